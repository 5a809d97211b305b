//! Subcommands behind the `laminate` binary. Each returns an [`Outcome`]
//! whose `ok` flag decides the exit status.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use crate::cohesive::{check_law, CheckStatus};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{run_evolution, EvolutionTrace, Problem, StepRecord};
use crate::io::{
    read_trace, relative, trace_csv, write_manifest, write_snapshots, write_trace, ManifestRun,
};
use crate::materials::check_regularity_condition;
use crate::verification::{energy_balance_residual, stability_residual, uniform_bounds};

/// Result of one named invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    /// Step where the worst value occurs, if step-indexed.
    pub at: Option<usize>,
    pub note: String,
}

impl Check {
    fn new(
        name: impl Into<String>,
        pass: bool,
        worst: f64,
        at: Option<usize>,
        note: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            pass,
            worst,
            at,
            note: note.into(),
        }
    }

    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let at = self.at.map(|k| format!(" at step {k}")).unwrap_or_default();
        format!(
            "{status} {:<22} worst={:.6e}{at}  {}",
            self.name, self.worst, self.note
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub ok: bool,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    /// Human-readable report, also written to `report.txt` when there is one.
    pub report: String,
}

impl Outcome {
    fn from_checks(checks: Vec<Check>, header: &str) -> Self {
        let mut report = format!("{header}\n");
        for c in &checks {
            report.push_str(&c.line());
            report.push('\n');
        }
        Self {
            ok: checks.iter().all(|c| c.pass),
            checks,
            files: Vec::new(),
            report,
        }
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> (f64, Option<usize>) {
    values.enumerate().fold(
        (0.0, None),
        |(m, at), (k, v)| if v > m { (v, Some(k)) } else { (m, at) },
    )
}

/// Checks that only need the ledger columns.
pub fn ledger_checks(records: &[StepRecord], problem: &Problem) -> Vec<Check> {
    let mut out = Vec::new();
    let length = problem.mesh.length;
    let total0 = records[0].total();
    let scale = 1.0
        + records
            .iter()
            .map(|r| r.total().abs().max(r.work.abs()))
            .fold(0.0, f64::max);

    // the eb_residual column must agree with the energies and the work it claims to balance
    let (worst, at) = argmax(
        records
            .iter()
            .map(|r| ((r.total() - total0 - r.work).abs() - r.eb_residual).abs()),
    );
    out.push(Check::new(
        "eb_residual",
        worst <= 1e-12 * scale,
        worst,
        at,
        "column vs recomputed |E+D+K - E0-D0-K0 - W|",
    ));

    let mut work = 0.0;
    let mut work_left = 0.0;
    let mut worst_work: f64 = 0.0;
    let mut at_work = None;
    for pair in records.windows(2) {
        let c = (pair[1].u_bar - pair[0].u_bar) / length;
        work += c * 0.5 * (pair[0].stress_integral + pair[1].stress_integral);
        work_left += c * pair[0].stress_integral;
        let dev = (work - pair[1].work)
            .abs()
            .max((work_left - pair[1].work_left).abs());
        if dev > worst_work {
            worst_work = dev;
            at_work = Some(pair[1].k);
        }
    }
    out.push(Check::new(
        "work",
        worst_work <= 1e-12 * scale,
        worst_work,
        at_work,
        "W and W_left vs stress integrals",
    ));

    let trace = EvolutionTrace {
        records: records.to_vec(),
        states: Vec::new(),
        initial_stable: true,
        initial_energy_change: 0.0,
    };
    let eb = energy_balance_residual(&trace, &problem.load, length);
    let (worst, at) = eb.one_sided_excess.iter().copied().enumerate().fold(
        (f64::NEG_INFINITY, None),
        |(m, a), (k, v)| {
            if v > m {
                (v, Some(k))
            } else {
                (m, a)
            }
        },
    );
    out.push(Check::new(
        "energy_inequality",
        worst <= 1e-10 * scale,
        worst,
        at,
        format!("E+D+K <= initial + W_left + R, R = {:.6e}", eb.remainder),
    ));

    let (worst, at) = argmax(records.iter().map(|r| if r.converged { 0.0 } else { 1.0 }));
    out.push(Check::new(
        "converged",
        worst == 0.0,
        worst,
        at,
        format!(
            "{} unconverged step(s)",
            records.iter().filter(|r| !r.converged).count()
        ),
    ));

    let (worst, at) = argmax(
        records
            .iter()
            .skip(1)
            .map(|r| r.total() - r.warm_start_energy),
    );
    out.push(Check::new(
        "warm_start_dominance",
        worst <= 1e-10 * scale,
        worst,
        at.map(|k| k + 1),
        "computed energy minus warm-start energy",
    ));

    let tol = problem.solver.tol_grad;
    let slack = 1.0 + 1e-6;
    let (worst, at) = argmax(records.iter().map(|r| (-r.kkt.min_dalpha).max(0.0)));
    out.push(Check::new(
        "kkt_irreversibility",
        worst == 0.0,
        worst,
        at,
        "negative part of min dalpha",
    ));
    let (worst, at) = argmax(records.iter().map(|r| r.kkt.gradient_violation));
    out.push(Check::new(
        "kkt_gradient",
        worst <= tol * slack,
        worst,
        at,
        format!("negative damage operator on alpha < 1, tol {tol:e}"),
    ));
    let (worst, at) = argmax(
        records
            .iter()
            .map(|r| r.kkt.complementarity - tol * slack * r.kkt.max_dalpha),
    );
    out.push(Check::new(
        "kkt_complementarity",
        worst <= 0.0,
        worst,
        at,
        "operator * dalpha minus tol * max dalpha",
    ));

    let (worst, at) = argmax(records.iter().map(|r| r.max_gamma_minus_dh));
    out.push(Check::new(
        "history_gap",
        worst <= 1e-8,
        worst,
        at,
        "max |gamma ^ dbar - dh ^ dbar|",
    ));

    let h = problem.mesh.h;
    let (worst, at) = argmax(
        records
            .iter()
            .map(|r| r.stress_residual / (10.0 * h * (r.stress_integral.abs() / length + 1.0))),
    );
    out.push(Check::new(
        "stress_constancy",
        worst <= 1.0,
        worst,
        at,
        "deviation of sigma1 + sigma2 over 10 h (mean + 1)",
    ));
    out
}

/// Checks that need the states of a run.
pub fn state_checks(trace: &EvolutionTrace, problem: &Problem) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(Check::new(
        "initial_stability",
        trace.initial_stable,
        trace.initial_energy_change,
        Some(0),
        "energy released by a zero-load increment from the initial data",
    ));
    let (mesh, law, mats) = (&problem.mesh, &problem.law, &problem.materials);
    let threshold = 10.0 * problem.solver.tol_grad;
    let (worst, at) = argmax(trace.states.iter().enumerate().map(|(k, s)| {
        stability_residual(mesh, s, law, mats, 16, problem.seed.wrapping_add(k as u64)).worst()
    }));
    out.push(Check::new(
        "stability_residual",
        worst <= threshold,
        worst,
        at,
        format!(
            "first-variation excess, cutoff {:e}",
            crate::verification::zero_history_cutoff(law)
        ),
    ));
    let bounds = uniform_bounds(trace, mesh, mats, law, &problem.load);
    let ratio = (bounds.u_norm2 / bounds.u_bound)
        .max(bounds.alpha_norm2 / bounds.alpha_bound)
        .max(bounds.holder_ratio / bounds.holder_constant);
    out.push(Check::new(
        "uniform_bounds",
        bounds.holds(1.0),
        ratio,
        None,
        "largest ratio of norm to a priori bound",
    ));
    out
}

fn header(command: &str, config: &RunConfig) -> String {
    format!(
        "laminate {} {command} seed={}",
        env!("CARGO_PKG_VERSION"),
        config.seed
    )
}

fn finish(dir: &Path, command: &str, config: &RunConfig, mut outcome: Outcome) -> Result<Outcome> {
    fs::create_dir_all(dir)?;
    let report = dir.join("report.txt");
    fs::write(&report, &outcome.report)?;
    outcome.files.push(report);
    let run = ManifestRun {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        files: outcome.files.iter().map(|p| relative(dir, p)).collect(),
        status: if outcome.ok {
            "ok".into()
        } else {
            format!("failed: {}", outcome.failed().join(", "))
        },
        notes: Vec::new(),
    };
    let manifest = write_manifest(dir, &run, config)?;
    outcome.files.push(manifest);
    Ok(outcome)
}

pub fn command_run(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let problem = config.build()?;
    let trace = run_evolution(&problem)?;
    let mut checks = ledger_checks(&trace.records, &problem);
    checks.extend(state_checks(&trace, &problem));
    let mut outcome = Outcome::from_checks(checks, &header("run", config));
    if config.output.verbosity >= 2 {
        for r in &trace.records {
            let _ = writeln!(
                outcome.report,
                "step {:>5} t={:.6} E={:.9e} D={:.9e} K={:.9e} W={:.9e} eb={:.3e} iters={}",
                r.k, r.t, r.elastic, r.damage, r.cohesive, r.work, r.eb_residual, r.solver_iters
            );
        }
    }
    fs::create_dir_all(out)?;
    let trace_path = out.join("trace.csv");
    write_trace(&trace_path, &trace.records)?;
    outcome.files.push(trace_path);
    let steps = config.snapshot_steps(trace.n_steps());
    outcome.files.extend(write_snapshots(
        out,
        &problem.mesh,
        &trace,
        &problem.materials,
        &steps,
    )?);
    finish(out, "run", config, outcome)
}

pub fn command_check_law(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let law = config.law.build()?;
    let report = check_law(&law, 256, 1e-10);
    let checks = report
        .entries
        .iter()
        .map(|e| {
            Check::new(
                e.name,
                e.status != CheckStatus::Fail,
                e.worst,
                None,
                format!("{:?} at {:?} {}", e.status, e.at, e.note),
            )
        })
        .collect();
    let mut outcome = Outcome::from_checks(checks, &header("check-law", config));
    outcome.report = format!("{}\n{}", header("check-law", config), report.to_text());
    finish(out, "check-law", config, outcome)
}

pub fn command_check_condition(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let law = config.law.build()?;
    let materials = config.materials()?;
    let budget = check_regularity_condition(&materials, &law, config.geometry.length, 256)?;
    let mut checks = Vec::new();
    for (i, p) in budget.layers.iter().enumerate() {
        checks.push(Check::new(
            if i == 0 {
                "layer1_hardening"
            } else {
                "layer2_hardening"
            },
            p.is_hardening(),
            p.ratio(),
            None,
            format!(
                "m = {:.12e}, M = {:.12e}, eps = {:.12e}",
                p.m, p.big_m, p.eps
            ),
        ));
    }
    checks.push(Check::new(
        "margin",
        budget.holds(),
        budget.margin,
        None,
        format!(
            "min m/M = {:.12e}, lambda L^2 / pi^2 = {:.12e}",
            budget.m_over_m,
            budget.lambda * budget.poincare_constant()
        ),
    ));
    let mut outcome = Outcome::from_checks(checks, &header("check-condition", config));
    let _ = writeln!(outcome.report, "margin = {}", budget.margin);
    finish(out, "check-condition", config, outcome)
}

/// Checks a stored trace against its configuration and reproduces the run.
pub fn command_verify(config: &RunConfig, trace_path: &Path, out: &Path) -> Result<Outcome> {
    let problem = config.build()?;
    let records = read_trace(trace_path)?;
    if records.len() != problem.partition.n_steps() + 1 {
        return Err(Error::Format {
            path: trace_path.display().to_string(),
            message: format!(
                "{} rows for a run of {} steps",
                records.len(),
                problem.partition.n_steps()
            ),
        });
    }
    let mut checks = ledger_checks(&records, &problem);
    let rerun = run_evolution(&problem)?;
    let stored = fs::read_to_string(trace_path)?;
    let fresh = trace_csv(&rerun.records);
    let first_diff = stored.lines().zip(fresh.lines()).position(|(a, b)| a != b);
    checks.push(Check::new(
        "reproduction",
        stored == fresh,
        first_diff.map_or(0.0, |_| 1.0),
        first_diff.map(|line| line.saturating_sub(1)),
        "stored trace vs fresh run with the same configuration and seed",
    ));
    checks.extend(state_checks(&rerun, &problem));
    let outcome = Outcome::from_checks(
        checks,
        &format!(
            "{} trace={}",
            header("verify", config),
            trace_path.display()
        ),
    );
    finish(out, "verify", config, outcome)
}

/// Per-point summary of a sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub ok: bool,
    pub failed: String,
    pub max_eb_residual: f64,
    pub max_stress_residual: f64,
    pub max_kkt_alpha_residual: f64,
    pub max_history_gap: f64,
    pub final_alpha1_max: f64,
    pub final_alpha2_max: f64,
    pub final_delta_h_max: f64,
    pub margin: f64,
}

fn sweep_point(config: &RunConfig, index: usize, value: f64, dir: &Path) -> Result<SweepPoint> {
    let sweep = config
        .sweep
        .as_ref()
        .expect("sweep block checked by caller");
    let point = config.with_parameter(&sweep.parameter, value)?;
    let point = RunConfig {
        sweep: None,
        ..point
    };
    let outcome = command_run(&point, dir)?;
    let problem = point.build()?;
    let records = read_trace(&dir.join("trace.csv"))?;
    let last = fs::read_to_string(
        dir.join("snapshots")
            .join(format!("{}.csv", records.len() - 1)),
    )
    .ok();
    let column_max = |name: &str| -> f64 {
        let Some(text) = &last else { return f64::NAN };
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let idx = reader
            .headers()
            .ok()
            .and_then(|h| h.iter().position(|c| c == name));
        let Some(idx) = idx else { return f64::NAN };
        reader
            .records()
            .filter_map(|r| r.ok()?.get(idx)?.parse::<f64>().ok())
            .fold(0.0, f64::max)
    };
    let margin =
        check_regularity_condition(&problem.materials, &problem.law, problem.mesh.length, 256)
            .map_or(f64::NAN, |b| b.margin);
    let max = |f: fn(&StepRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    Ok(SweepPoint {
        index,
        value,
        ok: outcome.ok,
        failed: outcome.failed().join(";"),
        max_eb_residual: max(|r| r.eb_residual),
        max_stress_residual: max(|r| r.stress_residual),
        max_kkt_alpha_residual: max(|r| r.kkt.combined()),
        max_history_gap: max(|r| r.max_gamma_minus_dh),
        final_alpha1_max: column_max("alpha1"),
        final_alpha2_max: column_max("alpha2"),
        final_delta_h_max: column_max("delta_h"),
        margin,
    })
}

/// Runs every sweep point concurrently into `points/<i>/` and merges summaries by index.
pub fn command_sweep(config: &RunConfig, out: &Path) -> Result<Outcome> {
    config.validate()?;
    let Some(sweep) = &config.sweep else {
        return Err(Error::Config(vec![crate::error::ConfigIssue::new(
            "sweep",
            "sweep needs a [sweep] block",
        )]));
    };
    let dirs: Vec<PathBuf> = (0..sweep.values.len())
        .map(|i| out.join("points").join(i.to_string()))
        .collect();
    let results: Vec<Result<SweepPoint>> = thread::scope(|scope| {
        let handles: Vec<_> = sweep
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let dir = &dirs[i];
                scope.spawn(move || sweep_point(config, i, v, dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep thread panicked"))
            .collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &points {
        w.serialize(p).expect("in-memory csv write");
    }
    fs::create_dir_all(out)?;
    let summary = out.join("sweep.csv");
    fs::write(&summary, w.into_inner().expect("in-memory csv flush"))?;
    let checks = points
        .iter()
        .map(|p| {
            Check::new(
                format!("point_{}", p.index),
                p.ok,
                p.value,
                None,
                p.failed.clone(),
            )
        })
        .collect();
    let mut outcome = Outcome::from_checks(
        checks,
        &format!("{} parameter={}", header("sweep", config), sweep.parameter),
    );
    outcome.files.push(summary);
    outcome
        .files
        .extend(dirs.iter().map(|d| d.join("manifest.toml")));
    finish(out, "sweep", config, outcome)
}
