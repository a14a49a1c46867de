use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gnatrom::par;
use gnatrom::pipeline::{
    self, exit, parse_mu, run_bounds, run_compare, run_offline, run_online, CompareOptions, Method,
    OfflineConfig, PipelineError,
};

/// GNAT model reduction for the parameterized Burgers problem.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Training solves, bases, sample mesh and online operators.
    Offline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run GNAT at a new input.
    Online {
        #[arg(long)]
        manifest: PathBuf,
        /// `a=<v>,b=<v>`
        #[arg(long)]
        mu: String,
        /// Defaults to `online/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare GNAT with the tier II model and the collocation/DEIM baselines.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated method names, or `all`.
        #[arg(long, default_value = "all")]
        methods: String,
        /// Stored tier I trajectory at the comparison input.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        mu: Option<String>,
        /// Defaults to `compare/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the untimed warm-up runs.
        #[arg(long)]
        no_warmup: bool,
    },
    /// Error-bound diagnostics (reads full residuals; offline use only).
    Bounds {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        mu: Option<String>,
        /// Defaults to `bounds/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_out(manifest: &Path, name: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(name)
}

fn config_error(e: gnatrom::GnatError) -> PipelineError {
    PipelineError {
        stage: "arguments",
        source: e,
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Offline { config, out } => {
            let config = OfflineConfig::load(&config).map_err(|source| PipelineError {
                stage: "config",
                source,
            })?;
            let m = run_offline(&config, &out)?;
            println!(
                "offline: n_w={} n_R={} n_J={} n_i={} |J|={}; manifest at {}",
                m.sizes.n_w,
                m.sizes.n_r,
                m.sizes.n_j,
                m.sizes.n_i,
                m.sizes.state_entries,
                out.join(pipeline::MANIFEST_FILE).display()
            );
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Online { manifest, mu, out } => {
            let mu = parse_mu(&mu).map_err(config_error)?;
            let out = out.unwrap_or_else(|| default_out(&manifest, "online"));
            let (_, r) = run_online(&manifest, mu, &out)?;
            println!(
                "online at {}: {} steps in {:.3} s, {:.2} iterations/step, {} rows/iteration",
                r.mu,
                r.steps,
                r.wall_ns as f64 * 1e-9,
                r.avg_iterations,
                r.cost.max_residual_rows_per_iteration
            );
        }
        Command::Compare {
            manifest,
            methods,
            reference,
            mu,
            out,
            no_warmup,
        } => {
            let methods = Method::parse_list(&methods).map_err(config_error)?;
            let mu = mu
                .as_deref()
                .map(parse_mu)
                .transpose()
                .map_err(config_error)?;
            let out = out.unwrap_or_else(|| default_out(&manifest, "compare"));
            let options = CompareOptions {
                mu,
                reference,
                warmup: !no_warmup,
            };
            let report = run_compare(&manifest, &methods, &options, &out)?;
            println!(
                "{:<22} {:>12} {:>10} {:>8}",
                "method", "discrepancy", "speedup", "steps"
            );
            for m in &report.methods {
                println!(
                    "{:<22} {:>12.4e} {:>10.2} {:>8}{}",
                    m.method.name(),
                    m.discrepancy,
                    m.wall_time_ratio,
                    m.steps_completed,
                    m.failure
                        .as_deref()
                        .map(|f| format!("  failed: {f}"))
                        .unwrap_or_default()
                );
            }
        }
        Command::Bounds { manifest, mu, out } => {
            let mu = mu
                .as_deref()
                .map(parse_mu)
                .transpose()
                .map_err(config_error)?;
            let out = out.unwrap_or_else(|| default_out(&manifest, "bounds"));
            let r = run_bounds(&manifest, mu, &out)?;
            println!(
                "bounds at {}: a={:.4} ({}), final error {:.3e}, bounds b/c/d {:.3e} {:.3e} {:.3e}",
                r.mu,
                r.lipschitz_used.value,
                if r.lipschitz_used.certified {
                    "certified"
                } else {
                    "sampled"
                },
                r.final_error,
                r.final_bounds[0],
                r.final_bounds[1],
                r.final_bounds[2]
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::CONFIG as u8
            } else {
                0
            });
        }
    };
    par::init_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
