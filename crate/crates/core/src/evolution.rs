//! Time stepping: load programs, partitions, the incremental loop and its ledger.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::cohesive::CohesiveLaw;
use crate::discretization::{
    cohesive_energy, damage_energy, elastic_energy, incremental_energy, stiffness_integral,
    stress_integral, Mesh, SystemState,
};
use crate::error::{Error, Result};
use crate::materials::Materials;
use crate::solver::{solve_increment, IncrementResult, SolverOptions};
use crate::verification::{kkt_step, stress_constancy_residual, KktTriple};

/// Prescribed end displacement as a function of time. All families are piecewise linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadProfile {
    LinearRamp {
        rate: f64,
        #[serde(default)]
        start: f64,
    },
    /// Zero at `t = 0`, `peak_value` at `peak_time`, `end_value` at the final time.
    Triangle {
        peak_time: f64,
        peak_value: f64,
        end_value: f64,
    },
    /// `(t, value)` samples, linearly interpolated, constant outside.
    Tabulated { samples: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    pub profile: LoadProfile,
    pub final_time: f64,
}

impl LoadProgram {
    pub fn new(profile: LoadProfile, final_time: f64) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::InvalidLoad(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        match &profile {
            LoadProfile::LinearRamp { rate, start } => {
                if !rate.is_finite() || !start.is_finite() {
                    return Err(Error::InvalidLoad("ramp parameters must be finite".into()));
                }
            }
            LoadProfile::Triangle {
                peak_time,
                peak_value,
                end_value,
            } => {
                if !(*peak_time > 0.0 && *peak_time < final_time) {
                    return Err(Error::InvalidLoad(format!(
                        "peak time {peak_time} must lie in (0, {final_time})"
                    )));
                }
                if !peak_value.is_finite() || !end_value.is_finite() {
                    return Err(Error::InvalidLoad("triangle values must be finite".into()));
                }
            }
            LoadProfile::Tabulated { samples } => {
                if samples.is_empty() {
                    return Err(Error::InvalidLoad("tabulated load needs samples".into()));
                }
                if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidLoad(
                        "tabulated load times must increase".into(),
                    ));
                }
                if samples
                    .iter()
                    .any(|(t, v)| !t.is_finite() || !v.is_finite())
                {
                    return Err(Error::InvalidLoad(
                        "tabulated load samples must be finite".into(),
                    ));
                }
            }
        }
        Ok(Self {
            profile,
            final_time,
        })
    }

    /// Knots of the piecewise-linear program, including 0 and the final time.
    fn knots(&self) -> Vec<(f64, f64)> {
        let t_end = self.final_time;
        match &self.profile {
            LoadProfile::LinearRamp { rate, start } => {
                vec![(0.0, *start), (t_end, start + rate * t_end)]
            }
            LoadProfile::Triangle {
                peak_time,
                peak_value,
                end_value,
            } => {
                vec![(0.0, 0.0), (*peak_time, *peak_value), (t_end, *end_value)]
            }
            LoadProfile::Tabulated { samples } => {
                let mut k = Vec::with_capacity(samples.len() + 2);
                if samples[0].0 > 0.0 {
                    k.push((0.0, samples[0].1));
                }
                k.extend(
                    samples
                        .iter()
                        .copied()
                        .filter(|(t, _)| (0.0..=t_end).contains(t)),
                );
                if k.is_empty() || k[0].0 > 0.0 {
                    k.insert(0, (0.0, self.tabulated_value(samples, 0.0)));
                }
                if k.last().unwrap().0 < t_end {
                    k.push((t_end, self.tabulated_value(samples, t_end)));
                }
                k
            }
        }
    }

    fn tabulated_value(&self, samples: &[(f64, f64)], t: f64) -> f64 {
        if t <= samples[0].0 {
            return samples[0].1;
        }
        for w in samples.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        samples[samples.len() - 1].1
    }

    pub fn u_bar(&self, t: f64) -> f64 {
        match &self.profile {
            LoadProfile::LinearRamp { rate, start } => start + rate * t,
            LoadProfile::Triangle {
                peak_time,
                peak_value,
                end_value,
            } => {
                if t <= *peak_time {
                    peak_value * t / peak_time
                } else {
                    peak_value
                        + (end_value - peak_value) * (t - peak_time) / (self.final_time - peak_time)
                }
            }
            LoadProfile::Tabulated { samples } => self.tabulated_value(samples, t),
        }
    }

    /// Right derivative of the program.
    pub fn u_bar_dot(&self, t: f64) -> f64 {
        let knots = self.knots();
        for w in knots.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t < t1 || t1 >= self.final_time {
                return if t1 > t0 { (v1 - v0) / (t1 - t0) } else { 0.0 };
            }
        }
        0.0
    }

    /// Linear pieces `(t0, t1, value0, slope)` covering `[a, b]`.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64, f64)> {
        let mut cuts = vec![a];
        cuts.extend(
            self.knots()
                .into_iter()
                .map(|(t, _)| t)
                .filter(|&t| t > a && t < b),
        );
        cuts.push(b);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let (t0, t1) = (w[0], w[1]);
                let (v0, v1) = (self.u_bar(t0), self.u_bar(t1));
                (t0, t1, v0, (v1 - v0) / (t1 - t0))
            })
            .collect()
    }

    /// `int_a^b |u_bar'|`.
    pub fn total_variation(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b)
            .iter()
            .map(|(t0, t1, _, s)| s.abs() * (t1 - t0))
            .sum()
    }

    /// `int_a^b |u_bar'(t)| |u_bar(t) - u_bar(a)| dt`, exact for piecewise-linear programs.
    pub fn lag_integral(&self, a: f64, b: f64) -> f64 {
        let base = self.u_bar(a);
        let mut total = 0.0;
        for (t0, t1, v0, s) in self.pieces(a, b) {
            let f0 = v0 - base;
            let f1 = f0 + s * (t1 - t0);
            let len = t1 - t0;
            let abs_int = if f0 * f1 >= 0.0 {
                0.5 * (f0.abs() + f1.abs()) * len
            } else {
                let root = f0.abs() / (f0.abs() + f1.abs()) * len;
                0.5 * f0.abs() * root + 0.5 * f1.abs() * (len - root)
            };
            total += s.abs() * abs_int;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    pub times: Vec<f64>,
}

impl TimePartition {
    pub fn uniform(n_steps: usize, final_time: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidLoad(
                "partition needs at least one step".into(),
            ));
        }
        let times = (0..=n_steps)
            .map(|k| {
                if k == n_steps {
                    final_time
                } else {
                    final_time * k as f64 / n_steps as f64
                }
            })
            .collect();
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>, final_time: f64) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 || *times.last().unwrap() != final_time {
            return Err(Error::InvalidLoad(format!(
                "partition must run from 0 to {final_time}"
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLoad(
                "partition times must increase strictly".into(),
            ));
        }
        Ok(Self { times })
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn max_gap(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// Initial displacement and damage fields on the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFields {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
}

/// Everything needed for one evolution.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub materials: Materials,
    pub law: CohesiveLaw,
    pub load: LoadProgram,
    pub partition: TimePartition,
    pub solver: SolverOptions,
    pub initial: InitialFields,
    pub seed: u64,
}

impl Problem {
    /// Same physical problem on a uniform partition with `n` steps.
    pub fn with_steps(&self, n: usize) -> Result<Self> {
        Ok(Self {
            partition: TimePartition::uniform(n, self.load.final_time)?,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone)]
pub struct Initialization {
    pub state: SystemState,
    pub energy: f64,
    /// Energy released by one increment at `t = 0` from the given data.
    pub energy_change: f64,
    pub stable: bool,
}

/// Builds the initial state and tests it with one increment at `t = 0`.
pub fn initialize(problem: &Problem) -> Result<Initialization> {
    let mesh = &problem.mesh;
    let init = &problem.initial;
    for (name, f) in [
        ("u1", &init.u1),
        ("u2", &init.u2),
        ("alpha1", &init.alpha1),
        ("alpha2", &init.alpha2),
    ] {
        if f.len() != mesh.n_nodes() {
            return Err(Error::IncompatibleData(format!(
                "{name} has {} values, mesh has {} nodes",
                f.len(),
                mesh.n_nodes()
            )));
        }
    }
    for (name, a) in [("alpha1", &init.alpha1), ("alpha2", &init.alpha2)] {
        if let Some((j, v)) = a
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::IncompatibleData(format!(
                "{name} = {v} at node {j} is outside [0, 1]"
            )));
        }
    }
    let u0 = problem.load.u_bar(0.0);
    let last = mesh.n_elems;
    for (name, u) in [("u1", &init.u1), ("u2", &init.u2)] {
        if u[0] != 0.0 || (u[last] - u0).abs() > 1e-12 * (1.0 + u0.abs()) {
            return Err(Error::IncompatibleData(format!(
                "{name} boundary values ({}, {}) must be (0, {u0})",
                u[0], u[last]
            )));
        }
    }
    let mut state = SystemState {
        u1: init.u1.clone(),
        u2: init.u2.clone(),
        alpha1: init.alpha1.clone(),
        alpha2: init.alpha2.clone(),
        delta_h: vec![0.0; mesh.n_nodes()],
        gamma: vec![0.0; mesh.n_nodes()],
        t: 0.0,
    };
    state.u1[last] = u0;
    state.u2[last] = u0;
    state.delta_h = state.slip();
    state.gamma = state.delta_h.clone();
    let energy = incremental_energy(
        mesh,
        &state,
        &state.delta_h,
        &problem.law,
        &problem.materials,
    );
    let probe = solve_increment(
        mesh,
        &state,
        u0,
        &problem.law,
        &problem.materials,
        &problem.solver,
    )?;
    let energy_change = energy - probe.energy;
    let stable = energy_change <= 1e-10 * (1.0 + energy.abs());
    Ok(Initialization {
        state,
        energy,
        energy_change,
        stable,
    })
}

/// Ledger row of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub u_bar: f64,
    pub elastic: f64,
    pub damage: f64,
    pub cohesive: f64,
    /// Work with the trapezoid rule in time.
    pub work: f64,
    /// Work with the left-point rule (frozen state on each step).
    pub work_left: f64,
    pub eb_residual: f64,
    pub stress_residual: f64,
    pub kkt: KktTriple,
    pub max_gamma_minus_dh: f64,
    /// `int (sigma_1 + sigma_2) dx`.
    pub stress_integral: f64,
    /// `sum_i int E_i(alpha_i) dx`.
    pub stiffness_integral: f64,
    pub solver_iters: usize,
    pub converged: bool,
    pub warm_start_energy: f64,
    pub restarts_improved: usize,
}

impl StepRecord {
    pub fn total(&self) -> f64 {
        self.elastic + self.damage + self.cohesive
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub records: Vec<StepRecord>,
    /// State after every step; index 0 is the initial state.
    pub states: Vec<SystemState>,
    pub initial_stable: bool,
    pub initial_energy_change: f64,
}

impl EvolutionTrace {
    pub fn n_steps(&self) -> usize {
        self.records.len() - 1
    }
}

fn truncated_gap(law: &CohesiveLaw, gamma: &[f64], dh: &[f64]) -> f64 {
    let bar = law.delta_bar();
    gamma
        .iter()
        .zip(dh)
        .map(|(g, d)| (bar.truncate(*g) - bar.truncate(*d)).abs())
        .fold(0.0, f64::max)
}

fn record(
    problem: &Problem,
    k: usize,
    state: &SystemState,
    prev: Option<(&SystemState, &StepRecord)>,
    dh_check: &[f64],
    result: Option<&IncrementResult>,
) -> Result<StepRecord> {
    let (mesh, mats, law) = (&problem.mesh, &problem.materials, &problem.law);
    let elastic = elastic_energy(mesh, state, mats);
    let damage = damage_energy(mesh, state, mats);
    let cohesive = cohesive_energy(mesh, state, law)?;
    let s_now = stress_integral(mesh, state, mats);
    let u_bar = state.u1[mesh.n_elems];
    let (work, work_left, kkt) = match prev {
        None => (0.0, 0.0, KktTriple::default()),
        Some((prev_state, prev_rec)) => {
            let c = (u_bar - prev_rec.u_bar) / mesh.length;
            let work = prev_rec.work + c * 0.5 * (prev_rec.stress_integral + s_now);
            let work_left = prev_rec.work_left + c * prev_rec.stress_integral;
            (work, work_left, kkt_step(mesh, prev_state, state, mats))
        }
    };
    Ok(StepRecord {
        k,
        t: state.t,
        u_bar,
        elastic,
        damage,
        cohesive,
        work,
        work_left,
        eb_residual: 0.0,
        stress_residual: stress_constancy_residual(mesh, state, mats),
        kkt,
        max_gamma_minus_dh: truncated_gap(law, &state.gamma, dh_check),
        stress_integral: s_now,
        stiffness_integral: stiffness_integral(mesh, state, mats),
        solver_iters: result.map_or(0, |r| r.outer_iters),
        converged: result.is_none_or(|r| r.converged),
        warm_start_energy: result.map_or(0.0, |r| r.warm_start_energy),
        restarts_improved: result.map_or(0, |r| r.restarts_improved),
    })
}

/// Runs the incremental scheme over the whole partition.
pub fn run_evolution(problem: &Problem) -> Result<EvolutionTrace> {
    let init = initialize(problem)?;
    let mut state = init.state;
    let first = record(problem, 0, &state, None, &state.delta_h, None)?;
    let initial_total = first.total();
    let mut records = vec![first];
    let mut states = vec![state.clone()];
    for k in 1..=problem.partition.n_steps() {
        let t = problem.partition.times[k];
        let u_bar = problem.load.u_bar(t);
        let opts = SolverOptions {
            rng_seed: problem.seed.wrapping_add(k as u64),
            ..problem.solver.clone()
        };
        let result = solve_increment(
            &problem.mesh,
            &state,
            u_bar,
            &problem.law,
            &problem.materials,
            &opts,
        )?;
        let mut next = result.state.clone();
        let slip = next.slip();
        let dh_check: Vec<f64> = state
            .delta_h
            .iter()
            .zip(&slip)
            .map(|(a, b)| a.max(*b))
            .collect();
        next.delta_h = dh_check.clone();
        next.gamma = dh_check.clone();
        next.t = t;
        let mut rec = record(
            problem,
            k,
            &next,
            Some((&state, records.last().unwrap())),
            &dh_check,
            Some(&result),
        )?;
        rec.eb_residual = (rec.total() - initial_total - rec.work).abs();
        records.push(rec);
        states.push(next.clone());
        state = next;
    }
    Ok(EvolutionTrace {
        records,
        states,
        initial_stable: init.stable,
        initial_energy_change: init.energy_change,
    })
}

/// Summary of one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineSummary {
    pub n_steps: usize,
    pub max_eb_residual: f64,
    pub remainder: f64,
    pub max_stress_residual: f64,
}

/// Runs the problem at each step count concurrently.
pub fn run_levels(problem: &Problem, partitions: &[usize]) -> Result<Vec<EvolutionTrace>> {
    let problems = partitions
        .iter()
        .map(|&n| problem.with_steps(n))
        .collect::<Result<Vec<_>>>()?;
    thread::scope(|scope| {
        let handles: Vec<_> = problems
            .iter()
            .map(|p| scope.spawn(move || run_evolution(p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evolution thread panicked"))
            .collect()
    })
}

pub fn refine_study(problem: &Problem, partitions: &[usize]) -> Result<Vec<RefineSummary>> {
    if partitions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidLoad(
            "refinement partitions must increase".into(),
        ));
    }
    let traces = run_levels(problem, partitions)?;
    Ok(partitions
        .iter()
        .zip(&traces)
        .map(|(&n, trace)| RefineSummary {
            n_steps: n,
            max_eb_residual: trace
                .records
                .iter()
                .map(|r| r.eb_residual)
                .fold(0.0, f64::max),
            remainder: crate::verification::measured_remainder(
                trace,
                &problem.load,
                problem.mesh.length,
            ),
            max_stress_residual: trace
                .records
                .iter()
                .map(|r| r.stress_residual)
                .fold(0.0, f64::max),
        })
        .collect())
}
