//! CSV and manifest export. Floats are written in shortest round-trip form so
//! files re-read bit-exactly and identical runs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::discretization::{stress_field, Mesh, SystemState};
use crate::error::{Error, Result};
use crate::evolution::{EvolutionTrace, StepRecord};
use crate::materials::Materials;
use crate::verification::KktTriple;

/// Column order of `trace.csv`. The first twelve columns are the ledger proper;
/// the rest carry what the checker needs to recompute remainders and KKT parts.
pub const TRACE_HEADER: [&str; 21] = [
    "k",
    "t",
    "E",
    "D",
    "K",
    "W",
    "eb_residual",
    "stress_residual",
    "kkt_alpha_residual",
    "max_gamma_minus_dh",
    "solver_iters",
    "converged",
    "u_bar",
    "W_left",
    "stress_integral",
    "stiffness_integral",
    "kkt_min_dalpha",
    "kkt_gradient_violation",
    "kkt_complementarity",
    "kkt_max_dalpha",
    "warm_start_energy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceRow {
    k: usize,
    t: f64,
    #[serde(rename = "E")]
    elastic: f64,
    #[serde(rename = "D")]
    damage: f64,
    #[serde(rename = "K")]
    cohesive: f64,
    #[serde(rename = "W")]
    work: f64,
    eb_residual: f64,
    stress_residual: f64,
    kkt_alpha_residual: f64,
    max_gamma_minus_dh: f64,
    solver_iters: usize,
    converged: bool,
    u_bar: f64,
    #[serde(rename = "W_left")]
    work_left: f64,
    stress_integral: f64,
    stiffness_integral: f64,
    kkt_min_dalpha: f64,
    kkt_gradient_violation: f64,
    kkt_complementarity: f64,
    kkt_max_dalpha: f64,
    warm_start_energy: f64,
}

impl From<&StepRecord> for TraceRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            k: r.k,
            t: r.t,
            elastic: r.elastic,
            damage: r.damage,
            cohesive: r.cohesive,
            work: r.work,
            eb_residual: r.eb_residual,
            stress_residual: r.stress_residual,
            kkt_alpha_residual: r.kkt.combined(),
            max_gamma_minus_dh: r.max_gamma_minus_dh,
            solver_iters: r.solver_iters,
            converged: r.converged,
            u_bar: r.u_bar,
            work_left: r.work_left,
            stress_integral: r.stress_integral,
            stiffness_integral: r.stiffness_integral,
            kkt_min_dalpha: r.kkt.min_dalpha,
            kkt_gradient_violation: r.kkt.gradient_violation,
            kkt_complementarity: r.kkt.complementarity,
            kkt_max_dalpha: r.kkt.max_dalpha,
            warm_start_energy: r.warm_start_energy,
        }
    }
}

impl From<TraceRow> for StepRecord {
    fn from(r: TraceRow) -> Self {
        Self {
            k: r.k,
            t: r.t,
            u_bar: r.u_bar,
            elastic: r.elastic,
            damage: r.damage,
            cohesive: r.cohesive,
            work: r.work,
            work_left: r.work_left,
            eb_residual: r.eb_residual,
            stress_residual: r.stress_residual,
            kkt: KktTriple {
                min_dalpha: r.kkt_min_dalpha,
                gradient_violation: r.kkt_gradient_violation,
                complementarity: r.kkt_complementarity,
                max_dalpha: r.kkt_max_dalpha,
            },
            max_gamma_minus_dh: r.max_gamma_minus_dh,
            stress_integral: r.stress_integral,
            stiffness_integral: r.stiffness_integral,
            solver_iters: r.solver_iters,
            converged: r.converged,
            warm_start_energy: r.warm_start_energy,
            restarts_improved: 0,
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn trace_csv(records: &[StepRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(TraceRow::from(r)).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn write_trace(path: &Path, records: &[StepRecord]) -> Result<()> {
    fs::write(path, trace_csv(records))?;
    Ok(())
}

/// Reads a trace written by [`write_trace`]. `restarts_improved` is not stored and reads as zero.
pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<TraceRow>() {
        out.push(row.map_err(|e| csv_error(path, e))?.into());
    }
    if out.is_empty() {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: "trace has no rows".into(),
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct SnapshotRow {
    x: f64,
    u1: f64,
    u2: f64,
    alpha1: f64,
    alpha2: f64,
    delta: f64,
    delta_h: f64,
    gamma: f64,
}

#[derive(Serialize)]
struct StressRow {
    element: usize,
    x_mid: f64,
    sigma1: f64,
    sigma2: f64,
    sigma_sum: f64,
}

/// Nodal fields of one state.
pub fn snapshot_csv(mesh: &Mesh, state: &SystemState) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let slip = state.slip();
    for j in 0..mesh.n_nodes() {
        w.serialize(SnapshotRow {
            x: mesh.x(j),
            u1: state.u1[j],
            u2: state.u2[j],
            alpha1: state.alpha1[j],
            alpha2: state.alpha2[j],
            delta: slip[j],
            delta_h: state.delta_h[j],
            gamma: state.gamma[j],
        })
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

/// Element stresses of one state.
pub fn stress_csv(mesh: &Mesh, state: &SystemState, materials: &Materials) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (e, (s1, s2)) in stress_field(mesh, state, materials).into_iter().enumerate() {
        w.serialize(StressRow {
            element: e,
            x_mid: mesh.x(e) + 0.5 * mesh.h,
            sigma1: s1,
            sigma2: s2,
            sigma_sum: s1 + s2,
        })
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

/// Writes `snapshots/<k>.csv` and `snapshots/<k>_stress.csv` for each requested step.
pub fn write_snapshots(
    dir: &Path,
    mesh: &Mesh,
    trace: &EvolutionTrace,
    materials: &Materials,
    steps: &[usize],
) -> Result<Vec<PathBuf>> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let mut written = Vec::new();
    for &k in steps {
        let Some(state) = trace.states.get(k) else {
            continue;
        };
        let fields = snap_dir.join(format!("{k}.csv"));
        let stress = snap_dir.join(format!("{k}_stress.csv"));
        fs::write(&fields, snapshot_csv(mesh, state))?;
        fs::write(&stress, stress_csv(mesh, state, materials))?;
        written.push(fields);
        written.push(stress);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Run manifest: the command, version, seed, outputs and the full configuration.
pub fn manifest_text(run: &ManifestRun, config: &RunConfig) -> String {
    #[derive(Serialize)]
    struct Head<'a> {
        run: &'a ManifestRun,
    }
    let head = toml::to_string(&Head { run }).expect("manifest serializes");
    let body = toml::to_string(&toml::Table::from_iter([(
        "config".to_string(),
        toml::Value::try_from(config).expect("config serializes"),
    )]))
    .expect("manifest serializes");
    format!("{head}\n{body}")
}

pub fn write_manifest(dir: &Path, run: &ManifestRun, config: &RunConfig) -> Result<PathBuf> {
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest_text(run, config))?;
    Ok(path)
}

/// Relative path for the manifest file list.
pub fn relative(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir).unwrap_or(path).display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize) -> StepRecord {
        StepRecord {
            k,
            t: 0.1 * k as f64,
            u_bar: 1.0 / 3.0 * k as f64,
            elastic: std::f64::consts::PI * k as f64,
            damage: 1e-300,
            cohesive: 2.5e17,
            work: -0.0,
            work_left: 0.1 + 0.2,
            eb_residual: 5e-324,
            stress_residual: 1.0,
            kkt: KktTriple {
                min_dalpha: 0.0,
                gradient_violation: -1e-12,
                complementarity: 3e-15,
                max_dalpha: 0.25,
            },
            max_gamma_minus_dh: 0.0,
            stress_integral: 7.0,
            stiffness_integral: 8.0,
            solver_iters: 3,
            converged: k.is_multiple_of(2),
            warm_start_energy: 1.0,
            restarts_improved: 0,
        }
    }

    #[test]
    fn trace_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let records: Vec<_> = (0..4).map(record).collect();
        write_trace(&path, &records).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
        let back = read_trace(&path).unwrap();
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.elastic.to_bits(), b.elastic.to_bits());
            assert_eq!(a.work.to_bits(), b.work.to_bits());
            assert_eq!(a.eb_residual.to_bits(), b.eb_residual.to_bits());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        fs::write(&path, "k,t\n0,0\n").unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Format { .. })));
    }
}
