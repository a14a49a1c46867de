//! Conversions between solver results and persisted artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use faer::Mat;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{GnatError, Result};
use crate::linalg;
use crate::model::ParameterPoint;
use crate::snapshots::{self, Provenance, SnapshotKind, SnapshotMatrix};
use crate::solvers::{FullTrajectory, OnlineCost, ReducedTrajectory, StepStats};

fn step_provenance(times: &[f64], stats: &[StepStats]) -> Vec<Provenance> {
    times
        .iter()
        .enumerate()
        .map(|(step, &time)| {
            let s = if step == 0 {
                StepStats::default()
            } else {
                stats[step - 1]
            };
            Provenance::Step {
                step,
                time,
                iterations: s.iterations,
                residual_norm: s.residual_norm,
            }
        })
        .collect()
}

fn stats_from_provenance(m: &SnapshotMatrix) -> Result<(Vec<f64>, Vec<StepStats>)> {
    let mut times = Vec::with_capacity(m.ncols());
    let mut stats = Vec::with_capacity(m.ncols());
    for (k, p) in m.provenance.iter().enumerate() {
        let Provenance::Step {
            time,
            iterations,
            residual_norm,
            ..
        } = *p
        else {
            return Err(GnatError::InvalidConfig(format!(
                "column {k} of a trajectory file is not a time step"
            )));
        };
        times.push(time);
        if k > 0 {
            stats.push(StepStats {
                iterations,
                residual_norm,
                wall_ns: 0,
            });
        }
    }
    Ok((times, stats))
}

fn extra<T: DeserializeOwned>(m: &SnapshotMatrix, key: &str) -> Result<T> {
    let v = m
        .extras
        .get(key)
        .cloned()
        .ok_or_else(|| GnatError::InvalidConfig(format!("artifact lacks field {key}")))?;
    serde_json::from_value(v).map_err(|e| GnatError::InvalidConfig(format!("{key}: {e}")))
}

fn expect_kind(m: &SnapshotMatrix, kind: SnapshotKind) -> Result<()> {
    if m.kind == kind {
        Ok(())
    } else {
        Err(GnatError::InvalidConfig(format!(
            "expected a {kind:?} artifact, found {:?}",
            m.kind
        )))
    }
}

/// States as columns; wall-clock times are not stored.
pub fn full_trajectory_matrix(t: &FullTrajectory) -> SnapshotMatrix {
    let n = t.states.first().map_or(0, Vec::len);
    let mut m = SnapshotMatrix::new(
        SnapshotKind::FullTrajectory,
        linalg::from_columns(n, &t.states),
        step_provenance(&t.times, &t.stats),
    )
    .expect("one record per state");
    m.extras.insert("mu".into(), serde_json::json!(t.mu));
    m
}

pub fn full_trajectory_from_matrix(m: &SnapshotMatrix) -> Result<FullTrajectory> {
    expect_kind(m, SnapshotKind::FullTrajectory)?;
    let (times, stats) = stats_from_provenance(m)?;
    Ok(FullTrajectory {
        mu: extra::<ParameterPoint>(m, "mu")?,
        times,
        states: (0..m.ncols())
            .map(|j| m.columns.col_as_slice(j).to_vec())
            .collect(),
        stats,
    })
}

/// Generalized coordinates as columns, plus the cost counters.
pub fn reduced_trajectory_matrix(t: &ReducedTrajectory) -> SnapshotMatrix {
    let n = t.coords.first().map_or(0, Vec::len);
    let mut m = SnapshotMatrix::new(
        SnapshotKind::ReducedTrajectory,
        linalg::from_columns(n, &t.coords),
        step_provenance(&t.times, &t.stats),
    )
    .expect("one record per step");
    m.extras.insert("mu".into(), serde_json::json!(t.mu));
    m.extras.insert("cost".into(), serde_json::json!(t.cost));
    m
}

pub fn reduced_trajectory_from_matrix(m: &SnapshotMatrix) -> Result<ReducedTrajectory> {
    expect_kind(m, SnapshotKind::ReducedTrajectory)?;
    let (times, stats) = stats_from_provenance(m)?;
    Ok(ReducedTrajectory {
        mu: extra::<ParameterPoint>(m, "mu")?,
        times,
        coords: (0..m.ncols())
            .map(|j| m.columns.col_as_slice(j).to_vec())
            .collect(),
        stats,
        cost: extra::<OnlineCost>(m, "cost")?,
        iterates: None,
    })
}

pub fn vector_matrix(v: &[f64]) -> SnapshotMatrix {
    SnapshotMatrix::plain(
        SnapshotKind::Operator,
        Mat::from_fn(v.len(), 1, |i, _| v[i]),
    )
}

pub fn load_matrix(path: &Path, kind: SnapshotKind) -> Result<Mat<f64>> {
    let m = snapshots::load(path)?;
    expect_kind(&m, kind)?;
    Ok(m.columns)
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let m = load_matrix(path, SnapshotKind::Operator)?;
    if m.ncols() != 1 {
        return Err(GnatError::format(path, "expected a single column"));
    }
    Ok(m.col_as_slice(0).to_vec())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| GnatError::io(path, e))?,
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| GnatError::format(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| GnatError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| GnatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| GnatError::format(path, e.to_string()))
}

/// `step,iterations,residual_norm,wall_ns`.
pub fn write_convergence_csv(path: &Path, stats: &[StepStats]) -> Result<()> {
    let io = |e| GnatError::io(path, e);
    let mut w = create(path)?;
    writeln!(w, "step,iterations,residual_norm,wall_ns").map_err(io)?;
    for (k, s) in stats.iter().enumerate() {
        writeln!(
            w,
            "{},{},{:e},{}",
            k + 1,
            s.iterations,
            s.residual_norm,
            s.wall_ns
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `time,<name of each column>` with one row per step.
pub fn write_series_csv(
    path: &Path,
    times: &[f64],
    names: &[String],
    columns: &[Vec<f64>],
) -> Result<()> {
    let io = |e| GnatError::io(path, e);
    let mut w = create(path)?;
    writeln!(w, "time,{}", names.join(",")).map_err(io)?;
    for (n, t) in times.iter().enumerate() {
        write!(w, "{t}").map_err(io)?;
        for c in columns {
            match c.get(n) {
                Some(v) => write!(w, ",{v:e}").map_err(io)?,
                None => write!(w, ",").map_err(io)?,
            }
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
