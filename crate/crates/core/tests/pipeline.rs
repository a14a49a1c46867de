//! End-to-end runs of the four pipeline stages on a small problem, plus the
//! command-line exit codes.

use std::path::Path;
use std::process::Command;

use gnatrom::model::{Grid1D, ParameterPoint, TimeDiscretization};
use gnatrom::pipeline::{
    exit, run_bounds, run_compare, run_offline, run_online, CompareOptions, Method, OfflineConfig,
    OnlineRom, MANIFEST_FILE,
};
use gnatrom::pod::Truncation;

fn toy_config() -> OfflineConfig {
    let mut config = OfflineConfig::benchmark();
    config.grid = Grid1D::new(33, 100.0).unwrap();
    config.time = TimeDiscretization::new(0.1, 8).unwrap();
    config.state_basis = Truncation::Fixed(3);
    config.residual_basis = Truncation::Fixed(6);
    config.jacobian_basis = Truncation::Fixed(4);
    config.sampling.sample_nodes = 8;
    config
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn all_stages_run_and_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config();
    let manifest = run_offline(&config, dir.path()).unwrap();
    assert_eq!(manifest.sizes.n_w, 3);
    assert_eq!(manifest.sizes.n_i, 8);
    let path = dir.path().join(MANIFEST_FILE);
    let rom = OnlineRom::load(&path).unwrap();
    assert_eq!(rom.operators.num_coords(), 3);

    let mu = ParameterPoint::new(5.0, 0.03);
    let (traj, report) = run_online(&path, mu, &dir.path().join("online")).unwrap();
    assert_eq!(traj.num_steps(), 8);
    assert_eq!(report.steps, 8);

    let out = dir.path().join("compare");
    let metrics = run_compare(&path, &Method::ALL, &CompareOptions::default(), &out).unwrap();
    assert_eq!(metrics.methods.len(), 5);
    assert_eq!(metrics.ranking.len(), 5);
    let tier2 = metrics
        .methods
        .iter()
        .find(|m| m.method == Method::Tier2Pg)
        .unwrap();
    assert!(tier2.failure.is_none());
    assert_eq!(tier2.max_residual_rows_per_iteration, 32);
    let names = files(&out);
    for f in [
        "compare_report.json",
        "errors.csv",
        "gnat_convergence.csv",
        "reference.snap",
    ] {
        assert!(names.iter().any(|n| n == f), "missing {f} in {names:?}");
    }

    // a stored reference is accepted at its own input and rejected elsewhere
    let stored = CompareOptions {
        reference: Some(out.join("reference.snap")),
        warmup: false,
        ..CompareOptions::default()
    };
    let again = run_compare(&path, &[Method::Gnat], &stored, &dir.path().join("c2")).unwrap();
    assert_eq!(again.methods[0].discrepancy, metrics.methods[0].discrepancy);
    let elsewhere = CompareOptions {
        mu: Some(mu),
        ..stored
    };
    let err = run_compare(&path, &[Method::Gnat], &elsewhere, &dir.path().join("c3")).unwrap_err();
    assert_eq!(err.exit_code(), exit::CONFIG);

    let bounds = run_bounds(&path, None, &dir.path().join("bounds")).unwrap();
    assert!(bounds.final_bounds[0] <= bounds.final_bounds[1] * (1.0 + 1e-12));
    assert!(bounds.final_bounds[1] <= bounds.final_bounds[2] * (1.0 + 1e-12));
    assert!(bounds.lipschitz_used.value > 0.0);
    assert_eq!(
        files(&dir.path().join("bounds")),
        ["bounds.csv", "bounds.json", "state_errors.csv"]
    );
}

#[test]
fn offline_artifacts_are_reproducible() {
    let config = toy_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_offline(&config, a.path()).unwrap();
    run_offline(&config, b.path()).unwrap();
    let names = files(a.path());
    assert_eq!(names, files(b.path()));
    // convergence logs end with a wall-clock column
    let untimed = |path: &Path| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    for name in names.iter().filter(|n| *n != "timings.json") {
        let (x, y) = (a.path().join(name), b.path().join(name));
        if name.ends_with("_convergence.csv") {
            assert_eq!(untimed(&x), untimed(&y), "{name} differs between runs");
        } else {
            assert!(
                std::fs::read(&x).unwrap() == std::fs::read(&y).unwrap(),
                "{name} differs between runs"
            );
        }
    }
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_gnatrom"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("config.json");
    std::fs::write(&config, toy_config().to_json()).unwrap();
    let out = d.join("rom");
    let (config_s, out_s) = (config.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(
        cli(&["offline", "--config", config_s, "--out", out_s]),
        exit::OK
    );
    let manifest = out.join(MANIFEST_FILE);
    let m = manifest.to_str().unwrap();
    assert_eq!(
        cli(&["online", "--manifest", m, "--mu", "a=5,b=0.03"]),
        exit::OK
    );
    assert!(out.join("online").is_dir());
    assert_eq!(
        cli(&[
            "compare",
            "--manifest",
            m,
            "--methods",
            "gnat,tier2-pg",
            "--no-warmup"
        ]),
        exit::OK
    );
    assert_eq!(cli(&["bounds", "--manifest", m]), exit::OK);

    assert_eq!(
        cli(&["online", "--manifest", m, "--mu", "a=5"]),
        exit::CONFIG
    );
    assert_eq!(
        cli(&["compare", "--manifest", m, "--methods", "qdeim"]),
        exit::CONFIG
    );
    assert_eq!(cli(&["offline", "--config", config_s]), exit::CONFIG);
    let bad = d.join("bad.json");
    std::fs::write(&bad, "{\"grid\": 3}").unwrap();
    assert_eq!(
        cli(&["offline", "--config", bad.to_str().unwrap(), "--out", out_s]),
        exit::CONFIG
    );
    let missing = d.join("nope").join(MANIFEST_FILE);
    assert_eq!(
        cli(&[
            "online",
            "--manifest",
            missing.to_str().unwrap(),
            "--mu",
            "a=5,b=0.03"
        ]),
        exit::IO
    );
}
