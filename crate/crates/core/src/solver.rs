//! One step of the incremental minimization: alternate minimization over the
//! displacement block and the damage block, with optional multi-start polish.
//!
//! The displacement block is written per node in mean/slip coordinates
//! `s = (u1 + u2) / 2`, `d = u1 - u2`, so the kink of the interface term at
//! zero slip lies along a coordinate axis. Both blocks use Newton directions on
//! the currently free coordinates and fall back to proximal or projected
//! gradient steps with backtracking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::BandedSym;
use crate::cohesive::CohesiveLaw;
use crate::discretization::{incremental_energy, Mesh, SystemState};
use crate::error::{Error, Result};
use crate::materials::Materials;

/// Backtracking line-search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub tol_energy: f64,
    pub tol_grad: f64,
    pub n_restarts: usize,
    pub restart_amplitude: f64,
    pub step_control: StepControl,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            max_inner_iters: 200,
            tol_energy: 1e-15,
            tol_grad: 1e-10,
            n_restarts: 0,
            restart_amplitude: 0.1,
            step_control: StepControl::default(),
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    /// Problems with the options, as `(field, message)` pairs.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.tol_energy > 0.0) {
            out.push(("tol_energy", "must be positive".to_string()));
        }
        if !(self.tol_grad > 0.0) {
            out.push(("tol_grad", "must be positive".to_string()));
        }
        if self.max_outer_iters == 0 {
            out.push(("max_outer_iters", "must be at least 1".to_string()));
        }
        if self.max_inner_iters == 0 {
            out.push(("max_inner_iters", "must be at least 1".to_string()));
        }
        if !(self.restart_amplitude >= 0.0) {
            out.push(("restart_amplitude", "must be nonnegative".to_string()));
        }
        let sc = &self.step_control;
        if !(sc.shrink > 0.0 && sc.shrink < 1.0) {
            out.push(("step_control.shrink", "must lie in (0, 1)".to_string()));
        }
        if !(sc.initial_step > 0.0) {
            out.push(("step_control.initial_step", "must be positive".to_string()));
        }
        if !(sc.sufficient_decrease > 0.0 && sc.sufficient_decrease < 1.0) {
            out.push((
                "step_control.sufficient_decrease",
                "must lie in (0, 1)".to_string(),
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct IncrementResult {
    pub state: SystemState,
    /// `E + D + K[delta, floor v delta]` of `state`.
    pub energy: f64,
    /// Energy of the affinely shifted previous state.
    pub warm_start_energy: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub restarts_improved: usize,
    /// Proximal residual of the displacement block at the returned state.
    pub u_residual: f64,
    /// Projected-gradient residual of the damage block at the returned state.
    pub alpha_residual: f64,
}

/// Outcome of one block solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Fixed data of one increment.
#[derive(Clone, Copy)]
pub struct IncrementData<'a> {
    pub mesh: &'a Mesh,
    pub law: &'a CohesiveLaw,
    pub materials: &'a Materials,
    /// Frozen history slip of the previous step.
    pub floor: &'a [f64],
    /// Irreversibility floors of the damage fields.
    pub lower: [&'a [f64]; 2],
}

const MAX_SHIFTS: usize = 80;
const MAX_BACKTRACKS: usize = 60;
const STALL_ROUNDS: usize = 8;

/// Energy changes below this are indistinguishable from rounding.
fn noise_floor(f: f64) -> f64 {
    1e-13 * (1.0 + f.abs())
}

struct UBlock<'a> {
    mesh: &'a Mesh,
    law: &'a CohesiveLaw,
    floor: &'a [f64],
    /// Stiffness `E_i(alpha_mid) / h` per element.
    stiff: [Vec<f64>; 2],
    u_bar: f64,
    /// Stick thresholds per node (zero where the interface term is smooth).
    tau: Vec<f64>,
    hessian: BandedSym,
}

impl<'a> UBlock<'a> {
    fn new(data: &IncrementData<'a>, state: &SystemState) -> Self {
        let mesh = data.mesh;
        let n_el = mesh.n_elems;
        let stiff = [0, 1].map(|i| {
            let alpha = state.alpha(i);
            (0..n_el)
                .map(|e| {
                    data.materials[i]
                        .modulus
                        .value(0.5 * (alpha[e] + alpha[e + 1]))
                        / mesh.h
                })
                .collect::<Vec<_>>()
        });
        let tau = (0..mesh.n_nodes())
            .map(|j| mesh.weight(j) * data.law.kink_threshold(data.floor[j]))
            .collect();
        let n_free = 2 * (n_el - 1);
        let mut hessian = BandedSym::zeros(n_free, 3);
        let vecs = [[-1.0, -0.5, 1.0, 0.5], [-1.0, 0.5, 1.0, -0.5]];
        for e in 0..n_el {
            let idx = |local: usize| -> Option<usize> {
                let node = e + local / 2;
                (node >= 1 && node < n_el).then(|| 2 * (node - 1) + local % 2)
            };
            for (i, v) in vecs.iter().enumerate() {
                let k = stiff[i][e];
                for p in 0..4 {
                    for q in 0..=p {
                        if let (Some(a), Some(b)) = (idx(p), idx(q)) {
                            if a == b && p != q {
                                continue;
                            }
                            hessian.add(a, b, k * v[p] * v[q]);
                        }
                    }
                }
            }
        }
        Self {
            mesh,
            law: data.law,
            floor: data.floor,
            stiff,
            u_bar: state.u1[n_el],
            tau,
            hessian,
        }
    }

    fn n_free(&self) -> usize {
        2 * (self.mesh.n_elems - 1)
    }

    fn pack(&self, state: &SystemState) -> Vec<f64> {
        let mut x = vec![0.0; self.n_free()];
        for j in 1..self.mesh.n_elems {
            let (a, b) = (state.u1[j], state.u2[j]);
            x[2 * (j - 1)] = if a == b { a } else { 0.5 * (a + b) };
            x[2 * (j - 1) + 1] = a - b;
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.mesh.n_nodes();
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        u1[n - 1] = self.u_bar;
        u2[n - 1] = self.u_bar;
        for j in 1..n - 1 {
            let (s, d) = (x[2 * (j - 1)], x[2 * (j - 1) + 1]);
            u1[j] = s + 0.5 * d;
            u2[j] = s - 0.5 * d;
        }
        (u1, u2)
    }

    fn slip(&self, x: &[f64], j: usize) -> f64 {
        if j == 0 || j == self.mesh.n_elems {
            0.0
        } else {
            x[2 * (j - 1) + 1]
        }
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let (u1, u2) = self.unpack(x);
        let mut total = 0.0;
        for (i, u) in [&u1, &u2].into_iter().enumerate() {
            for e in 0..self.mesh.n_elems {
                let du = u[e + 1] - u[e];
                total += 0.5 * self.stiff[i][e] * du * du;
            }
        }
        for j in 0..self.mesh.n_nodes() {
            total +=
                self.mesh.weight(j) * self.law.slip_energy(self.slip(x, j).abs(), self.floor[j]);
        }
        total
    }

    /// Energy without the `tau |d|` kink terms.
    fn smooth_energy(&self, x: &[f64]) -> f64 {
        let kinks: f64 = (1..self.mesh.n_elems)
            .map(|j| self.tau[j] * x[2 * (j - 1) + 1].abs())
            .sum();
        self.energy(x) - kinks
    }

    /// Gradient of the smooth part.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (u1, u2) = self.unpack(x);
        let n = self.mesh.n_nodes();
        let mut g = [vec![0.0; n], vec![0.0; n]];
        for (i, u) in [&u1, &u2].into_iter().enumerate() {
            for e in 0..self.mesh.n_elems {
                let f = self.stiff[i][e] * (u[e + 1] - u[e]);
                g[i][e] -= f;
                g[i][e + 1] += f;
            }
        }
        let mut out = vec![0.0; self.n_free()];
        for j in 1..n - 1 {
            let d = x[2 * (j - 1) + 1];
            out[2 * (j - 1)] = g[0][j] + g[1][j];
            let mut gd = 0.5 * (g[0][j] - g[1][j]);
            if d != 0.0 {
                let slope =
                    self.mesh.weight(j) * self.law.slip_slope(d.abs(), self.floor[j]) - self.tau[j];
                gd += slope * d.signum();
            }
            out[2 * (j - 1) + 1] = gd;
        }
        out
    }

    /// Minimum-norm subgradient and the stuck kink nodes.
    fn pseudo_gradient(&self, x: &[f64], g: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mut pg = g.to_vec();
        let mut stuck = vec![false; self.mesh.n_elems.saturating_sub(1)];
        for j in 1..self.mesh.n_elems {
            let (v, tau) = (2 * (j - 1) + 1, self.tau[j]);
            if tau <= 0.0 {
                continue;
            }
            let d = x[v];
            if d != 0.0 {
                pg[v] = g[v] + tau * d.signum();
            } else if g[v] > tau {
                pg[v] = g[v] - tau;
            } else if g[v] < -tau {
                pg[v] = g[v] + tau;
            } else {
                pg[v] = 0.0;
                stuck[j - 1] = true;
            }
        }
        (pg, stuck)
    }

    fn residual(pg: &[f64]) -> f64 {
        pg.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sign of the orthant each kink coordinate may occupy during a line search.
    fn orthants(&self, x: &[f64], pg: &[f64]) -> Vec<f64> {
        (1..self.mesh.n_elems)
            .map(|j| {
                let v = 2 * (j - 1) + 1;
                if self.tau[j] <= 0.0 {
                    0.0
                } else if x[v] != 0.0 {
                    x[v].signum()
                } else {
                    -pg[v].signum()
                }
            })
            .collect()
    }

    fn project(&self, y: &mut [f64], orthant: &[f64]) {
        for (k, &o) in orthant.iter().enumerate() {
            let v = 2 * k + 1;
            if o != 0.0 && y[v] * o < 0.0 {
                y[v] = 0.0;
            }
        }
    }

    fn newton_direction(&self, x: &[f64], pg: &[f64], stuck: &[bool]) -> Option<Vec<f64>> {
        let mut h = self.hessian.clone();
        for j in 1..self.mesh.n_elems {
            let v = 2 * (j - 1) + 1;
            if stuck[j - 1] {
                h.pin(v);
            } else {
                let d = x[v].abs();
                h.add(
                    v,
                    v,
                    self.mesh.weight(j) * self.law.slip_curvature(d, self.floor[j]),
                );
            }
        }
        let rhs: Vec<f64> = pg.iter().map(|g| -g).collect();
        let scale = h.max_diag().max(f64::MIN_POSITIVE);
        let mut shift = 0.0;
        for _ in 0..MAX_SHIFTS {
            if let Some(chol) = h.cholesky(shift) {
                let mut p = chol.solve(&rhs);
                for (k, &s) in stuck.iter().enumerate() {
                    if s {
                        p[2 * k + 1] = 0.0;
                    }
                }
                return p.iter().all(|v| v.is_finite()).then_some(p);
            }
            shift = if shift == 0.0 {
                1e-10 * scale
            } else {
                4.0 * shift
            };
        }
        None
    }

    /// Runs the block solver from `x` in place.
    fn solve(&self, x: &mut Vec<f64>, opts: &SolverOptions) -> BlockOutcome {
        let sc = opts.step_control;
        let mut f = self.energy(x);
        let mut g = self.gradient(x);
        let (mut pg, mut stuck) = self.pseudo_gradient(x, &g);
        let mut res = Self::residual(&pg);
        let mut iterations = 0;
        while res > opts.tol_grad && iterations < opts.max_inner_iters {
            iterations += 1;
            let orthant = self.orthants(x, &pg);
            let mut accepted = None;
            if let Some(mut p) = self.newton_direction(x, &pg, &stuck) {
                for (k, &o) in orthant.iter().enumerate() {
                    if o != 0.0 && x[2 * k + 1] == 0.0 && p[2 * k + 1] * o <= 0.0 {
                        p[2 * k + 1] = 0.0;
                    }
                }
                let slope: f64 = pg.iter().zip(&p).map(|(a, b)| a * b).sum();
                if slope < 0.0 {
                    let mut t = sc.initial_step;
                    for _ in 0..MAX_BACKTRACKS {
                        let mut y: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
                        self.project(&mut y, &orthant);
                        let fy = self.energy(&y);
                        let lin: f64 = pg
                            .iter()
                            .zip(y.iter().zip(x.iter()))
                            .map(|(gk, (a, b))| gk * (a - b))
                            .sum();
                        if fy <= f + sc.sufficient_decrease * lin {
                            accepted = Some((y, fy));
                            break;
                        }
                        if -lin <= noise_floor(f) && fy <= f + noise_floor(f) {
                            let gy = self.gradient(&y);
                            let (pgy, _) = self.pseudo_gradient(&y, &gy);
                            if Self::residual(&pgy) < res {
                                accepted = Some((y, fy));
                            }
                            break;
                        }
                        t *= sc.shrink;
                    }
                }
            }
            if accepted.is_none() {
                accepted = self.prox_step(x, f, &g, opts);
            }
            let Some((y, fy)) = accepted else { break };
            debug_assert!(fy <= f + noise_floor(f), "energy increased: {f} -> {fy}");
            *x = y;
            f = fy;
            g = self.gradient(x);
            (pg, stuck) = self.pseudo_gradient(x, &g);
            res = Self::residual(&pg);
        }
        BlockOutcome {
            iterations,
            residual: res,
            converged: res <= opts.tol_grad,
        }
    }

    /// Proximal-gradient step on the kink terms with backtracking.
    fn prox_step(
        &self,
        x: &[f64],
        f: f64,
        g: &[f64],
        opts: &SolverOptions,
    ) -> Option<(Vec<f64>, f64)> {
        let sc = opts.step_control;
        let smooth = self.smooth_energy(x);
        let lip = 2.0 * self.hessian.max_diag() + self.mesh.h * self.law.lambda();
        let mut t = sc.initial_step / lip.max(f64::MIN_POSITIVE);
        for _ in 0..MAX_BACKTRACKS {
            let mut y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - t * b).collect();
            for j in 1..self.mesh.n_elems {
                let v = 2 * (j - 1) + 1;
                let cut = t * self.tau[j];
                if cut > 0.0 {
                    y[v] = y[v].signum() * (y[v].abs() - cut).max(0.0);
                }
            }
            let step: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            let sq: f64 = step.iter().map(|v| v * v).sum();
            if sq == 0.0 {
                return None;
            }
            let lin: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            if self.smooth_energy(&y) <= smooth + lin + sq / (2.0 * t) {
                let fy = self.energy(&y);
                if fy <= f {
                    return Some((y, fy));
                }
            }
            t *= sc.shrink;
        }
        None
    }
}

/// Minimizes the displacement block with damage frozen. Boundary values are taken from `state`.
pub fn minimize_u(
    data: &IncrementData<'_>,
    state: &mut SystemState,
    opts: &SolverOptions,
) -> BlockOutcome {
    if data.mesh.n_elems < 2 {
        return BlockOutcome {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let block = UBlock::new(data, state);
    let mut x = block.pack(state);
    let outcome = block.solve(&mut x, opts);
    let (u1, u2) = block.unpack(&x);
    state.u1 = u1;
    state.u2 = u2;
    outcome
}

/// Proximal residual of the displacement block at `state`.
pub fn u_residual(data: &IncrementData<'_>, state: &SystemState) -> f64 {
    if data.mesh.n_elems < 2 {
        return 0.0;
    }
    let block = UBlock::new(data, state);
    let x = block.pack(state);
    let g = block.gradient(&x);
    UBlock::residual(&block.pseudo_gradient(&x, &g).0)
}

struct AlphaBlock<'a> {
    mesh: &'a Mesh,
    materials: &'a Materials,
    layer: usize,
    /// Squared strain per element.
    strain2: Vec<f64>,
    lower: &'a [f64],
}

impl AlphaBlock<'_> {
    fn energy(&self, a: &[f64]) -> f64 {
        let h = self.mesh.h;
        let (m, w) = (
            &self.materials[self.layer].modulus,
            &self.materials[self.layer].dissipation,
        );
        let mut total = 0.0;
        for e in 0..self.mesh.n_elems {
            total += 0.5 * h * m.value(0.5 * (a[e] + a[e + 1])) * self.strain2[e];
            total += 0.5 * (a[e + 1] - a[e]).powi(2) / h;
        }
        for (j, &v) in a.iter().enumerate() {
            total += self.mesh.weight(j) * w.value(v);
        }
        total
    }

    fn gradient(&self, a: &[f64]) -> Vec<f64> {
        let h = self.mesh.h;
        let (m, w) = (
            &self.materials[self.layer].modulus,
            &self.materials[self.layer].dissipation,
        );
        let mut g = vec![0.0; a.len()];
        for e in 0..self.mesh.n_elems {
            let drive = 0.25 * h * m.derivative(0.5 * (a[e] + a[e + 1])) * self.strain2[e];
            let lap = (a[e + 1] - a[e]) / h;
            g[e] += drive - lap;
            g[e + 1] += drive + lap;
        }
        for (j, &v) in a.iter().enumerate() {
            g[j] += self.mesh.weight(j) * w.derivative(v);
        }
        g
    }

    fn clamp(&self, j: usize, v: f64) -> f64 {
        v.max(self.lower[j]).min(1.0)
    }

    fn residual(&self, a: &[f64], g: &[f64]) -> f64 {
        (0..a.len()).fold(0.0, |m, j| m.max((a[j] - self.clamp(j, a[j] - g[j])).abs()))
    }

    fn newton_direction(&self, a: &[f64], g: &[f64], active: &[bool]) -> Option<Vec<f64>> {
        let h = self.mesh.h;
        let (m, w) = (
            &self.materials[self.layer].modulus,
            &self.materials[self.layer].dissipation,
        );
        let n = a.len();
        let mut hess = BandedSym::zeros(n, 1);
        for e in 0..self.mesh.n_elems {
            let c = 0.125 * h * m.second_derivative(0.5 * (a[e] + a[e + 1])) * self.strain2[e];
            hess.add(e, e, c + 1.0 / h);
            hess.add(e + 1, e + 1, c + 1.0 / h);
            hess.add(e, e + 1, c - 1.0 / h);
        }
        for j in 0..n {
            hess.add(j, j, self.mesh.weight(j) * w.second_derivative());
        }
        for j in 0..n {
            if active[j] {
                hess.pin(j);
            }
        }
        let rhs: Vec<f64> = (0..n)
            .map(|j| if active[j] { 0.0 } else { -g[j] })
            .collect();
        let scale = hess.max_diag().max(f64::MIN_POSITIVE);
        let mut shift = 0.0;
        for _ in 0..MAX_SHIFTS {
            if let Some(chol) = hess.cholesky(shift) {
                let mut p = chol.solve(&rhs);
                for j in 0..n {
                    if active[j] {
                        p[j] = -g[j];
                    }
                }
                return p.iter().all(|v| v.is_finite()).then_some(p);
            }
            shift = if shift == 0.0 {
                1e-10 * scale
            } else {
                4.0 * shift
            };
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        a: &[f64],
        f: f64,
        g: &[f64],
        p: &[f64],
        res: f64,
        opts: &SolverOptions,
        t0: f64,
    ) -> Option<(Vec<f64>, f64)> {
        let sc = opts.step_control;
        let mut t = t0;
        for _ in 0..MAX_BACKTRACKS {
            let y: Vec<f64> = (0..a.len())
                .map(|j| self.clamp(j, a[j] + t * p[j]))
                .collect();
            let lin: f64 = (0..a.len()).map(|j| g[j] * (y[j] - a[j])).sum();
            if y == a {
                return None;
            }
            let fy = self.energy(&y);
            if lin < 0.0 && fy <= f + sc.sufficient_decrease * lin {
                return Some((y, fy));
            }
            if -lin <= noise_floor(f) && fy <= f + noise_floor(f) {
                let gy = self.gradient(&y);
                return (self.residual(&y, &gy) < res).then_some((y, fy));
            }
            t *= sc.shrink;
        }
        None
    }

    fn solve(&self, a: &mut Vec<f64>, opts: &SolverOptions) -> BlockOutcome {
        let n = a.len();
        let mut f = self.energy(a);
        let mut g = self.gradient(a);
        let mut res = self.residual(a, &g);
        let mut iterations = 0;
        while res > opts.tol_grad && iterations < opts.max_inner_iters {
            iterations += 1;
            let eps = res.min(1e-6);
            let active: Vec<bool> = (0..n)
                .map(|j| {
                    (a[j] <= self.lower[j] + eps && g[j] > 0.0) || (a[j] >= 1.0 - eps && g[j] < 0.0)
                })
                .collect();
            let mut accepted = None;
            if let Some(p) = self.newton_direction(a, &g, &active) {
                accepted = self.search(a, f, &g, &p, res, opts, opts.step_control.initial_step);
            }
            if accepted.is_none() {
                let p: Vec<f64> = g.iter().map(|v| -v).collect();
                let lip = 4.0 / self.mesh.h + self.mesh.h * 10.0;
                accepted = self.search(
                    a,
                    f,
                    &g,
                    &p,
                    res,
                    opts,
                    opts.step_control.initial_step / lip,
                );
            }
            let Some((y, fy)) = accepted else { break };
            debug_assert!(fy <= f + noise_floor(f), "energy increased: {f} -> {fy}");
            *a = y;
            f = fy;
            g = self.gradient(a);
            res = self.residual(a, &g);
        }
        BlockOutcome {
            iterations,
            residual: res,
            converged: res <= opts.tol_grad,
        }
    }
}

fn strain2(mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    (0..mesh.n_elems)
        .map(|e| ((u[e + 1] - u[e]) / mesh.h).powi(2))
        .collect()
}

/// Minimizes the damage block over `[lower, 1]` with displacements frozen.
pub fn minimize_alpha(
    data: &IncrementData<'_>,
    state: &mut SystemState,
    opts: &SolverOptions,
) -> BlockOutcome {
    let mut total = BlockOutcome {
        iterations: 0,
        residual: 0.0,
        converged: true,
    };
    for layer in 0..2 {
        let block = AlphaBlock {
            mesh: data.mesh,
            materials: data.materials,
            layer,
            strain2: strain2(data.mesh, state.u(layer)),
            lower: data.lower[layer],
        };
        let mut a: Vec<f64> = (0..data.mesh.n_nodes())
            .map(|j| block.clamp(j, state.alpha(layer)[j]))
            .collect();
        let out = block.solve(&mut a, opts);
        *state.alpha_mut(layer) = a;
        total.iterations += out.iterations;
        total.residual = total.residual.max(out.residual);
        total.converged &= out.converged;
    }
    total
}

/// Projected-gradient residual of the damage block at `state`.
pub fn alpha_residual(data: &IncrementData<'_>, state: &SystemState) -> f64 {
    (0..2)
        .map(|layer| {
            let block = AlphaBlock {
                mesh: data.mesh,
                materials: data.materials,
                layer,
                strain2: strain2(data.mesh, state.u(layer)),
                lower: data.lower[layer],
            };
            let a = state.alpha(layer);
            block.residual(a, &block.gradient(a))
        })
        .fold(0.0, f64::max)
}

/// Alternate minimization from `state` until neither block moves.
pub fn alternate_minimization(
    data: &IncrementData<'_>,
    state: &mut SystemState,
    opts: &SolverOptions,
) -> (usize, bool) {
    let mut energy = incremental_energy(data.mesh, state, data.floor, data.law, data.materials);
    let mut stalled = 0;
    for outer in 1..=opts.max_outer_iters {
        let u_out = minimize_u(data, state, opts);
        let a_out = minimize_alpha(data, state, opts);
        if a_out.iterations == 0 {
            return (outer, u_out.converged && a_out.converged);
        }
        let next = incremental_energy(data.mesh, state, data.floor, data.law, data.materials);
        if energy - next < opts.tol_energy {
            let converged = u_residual(data, state) <= opts.tol_grad && a_out.converged;
            // the energy cannot resolve the last few digits; keep going while the residual still drops
            stalled += 1;
            if converged || stalled > STALL_ROUNDS {
                return (outer, converged);
            }
        } else {
            stalled = 0;
        }
        energy = next;
    }
    let converged =
        u_residual(data, state) <= opts.tol_grad && alpha_residual(data, state) <= opts.tol_grad;
    (opts.max_outer_iters, converged)
}

/// `prev` with displacements shifted by `(u_bar - u_bar_prev) x / L`.
pub fn warm_start(mesh: &Mesh, prev: &SystemState, boundary_value: f64) -> SystemState {
    let mut s = prev.clone();
    let last = mesh.n_elems;
    let jump = boundary_value - prev.u1[last];
    for u in [&mut s.u1, &mut s.u2] {
        for (j, v) in u.iter_mut().enumerate() {
            *v += jump * mesh.x(j) / mesh.length;
        }
        u[0] = 0.0;
        u[last] = boundary_value;
    }
    s
}

/// Solves one increment from `prev` to the boundary value `boundary_value`.
/// History is not updated; callers fold the new slip into `delta_h`.
pub fn solve_increment(
    mesh: &Mesh,
    prev: &SystemState,
    boundary_value: f64,
    law: &CohesiveLaw,
    materials: &Materials,
    opts: &SolverOptions,
) -> Result<IncrementResult> {
    for alpha in [&prev.alpha1, &prev.alpha2] {
        mesh.check_len(alpha)?;
        if let Some((node, &value)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(0.0..=1.0).contains(*a))
        {
            return Err(Error::InvalidBound { node, value });
        }
    }
    if !boundary_value.is_finite() {
        return Err(Error::InvalidLoad(format!(
            "boundary value {boundary_value} is not finite"
        )));
    }
    let data = IncrementData {
        mesh,
        law,
        materials,
        floor: &prev.delta_h,
        lower: [&prev.alpha1, &prev.alpha2],
    };
    let mut state = warm_start(mesh, prev, boundary_value);
    let warm_start_energy = incremental_energy(mesh, &state, data.floor, law, materials);
    let (outer_iters, converged) = alternate_minimization(&data, &mut state, opts);
    let energy = incremental_energy(mesh, &state, data.floor, law, materials);
    let mut result = IncrementResult {
        u_residual: u_residual(&data, &state),
        alpha_residual: alpha_residual(&data, &state),
        state,
        energy,
        warm_start_energy,
        outer_iters,
        converged,
        restarts_improved: 0,
    };
    if opts.n_restarts > 0 {
        result = global_polish(&data, result, opts);
    }
    Ok(result)
}

/// Restarts alternate minimization from random admissible perturbations of
/// `result` and keeps the lowest energy. Deterministic given `opts.rng_seed`.
pub fn global_polish(
    data: &IncrementData<'_>,
    result: IncrementResult,
    opts: &SolverOptions,
) -> IncrementResult {
    if opts.restart_amplitude == 0.0 || opts.n_restarts == 0 {
        return result;
    }
    let mesh = data.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let base_energy = result.energy;
    let mut best = result.clone();
    let mut improved = 0;
    for _ in 0..opts.n_restarts {
        let mut candidate = result.state.clone();
        for layer in 0..2 {
            let u = if layer == 0 {
                &mut candidate.u1
            } else {
                &mut candidate.u2
            };
            for v in u.iter_mut().take(mesh.n_elems).skip(1) {
                *v += opts.restart_amplitude * rng.gen_range(-1.0..=1.0);
            }
            let lower = data.lower[layer];
            for (j, a) in candidate.alpha_mut(layer).iter_mut().enumerate() {
                *a = (*a + opts.restart_amplitude * rng.gen::<f64>())
                    .max(lower[j])
                    .min(1.0);
            }
        }
        let (iters, converged) = alternate_minimization(data, &mut candidate, opts);
        let energy = incremental_energy(mesh, &candidate, data.floor, data.law, data.materials);
        if energy < base_energy - noise_floor(base_energy) {
            improved += 1;
        }
        if energy < best.energy - noise_floor(best.energy) {
            best = IncrementResult {
                u_residual: u_residual(data, &candidate),
                alpha_residual: alpha_residual(data, &candidate),
                state: candidate,
                energy,
                warm_start_energy: result.warm_start_energy,
                outer_iters: result.outer_iters + iters,
                converged,
                restarts_improved: 0,
            };
        }
    }
    best.restarts_improved = improved;
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohesive::{LoadingProfile, ScalarFn};
    use crate::materials::{DamageDissipation, ElasticModulus, LayerMaterial};

    fn mats(a1: f64, a2: f64, w1: f64) -> Materials {
        let layer = |a: f64| LayerMaterial {
            modulus: ElasticModulus::power(a, 0.5).unwrap(),
            dissipation: DamageDissipation::new(w1, 1.0).unwrap(),
        };
        [layer(a1), layer(a2)]
    }

    fn parabolic(c: f64, k: f64) -> CohesiveLaw {
        CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(c, k).unwrap()).unwrap()
    }

    #[test]
    fn decoupled_layers_relax_to_affine() {
        let law = CohesiveLaw::separable(ScalarFn::Zero, ScalarFn::Zero).unwrap();
        let mesh = Mesh::new(1.0, 8).unwrap();
        let m = mats(2.0, 5.0, 100.0);
        let mut prev = SystemState::zeros(9);
        prev.u1[3] = 0.3;
        prev.u2[5] = -0.2;
        prev.delta_h = prev.slip();
        prev.gamma = prev.delta_h.clone();
        let res = solve_increment(&mesh, &prev, 0.1, &law, &m, &SolverOptions::default()).unwrap();
        assert!(res.converged);
        for j in 0..9 {
            let exact = 0.1 * mesh.x(j);
            assert!((res.state.u1[j] - exact).abs() < 1e-12);
            assert!((res.state.u2[j] - exact).abs() < 1e-12);
        }
        assert_eq!(res.state.alpha1, prev.alpha1);
    }

    #[test]
    fn stick_below_threshold() {
        // different stiffnesses pull the layers apart; the interface holds them
        let law = parabolic(5.0, 1.0);
        let mesh = Mesh::new(1.0, 4).unwrap();
        let m = mats(1.0, 3.0, 100.0);
        let res = solve_increment(
            &mesh,
            &SystemState::zeros(5),
            0.01,
            &law,
            &m,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert_eq!(res.state.u1, res.state.u2);
        for j in 0..5 {
            assert!((res.state.u1[j] - 0.01 * mesh.x(j)).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let law = parabolic(0.1, 1.0);
        let mesh = Mesh::new(1.0, 6).unwrap();
        let m = mats(4.0, 4.0, 0.1);
        let mut prev = SystemState::zeros(7);
        prev.delta_h = vec![0.0, 0.2, 0.2, 0.2, 0.2, 0.2, 0.0];
        prev.gamma = prev.delta_h.clone();
        let res = solve_increment(&mesh, &prev, 0.8, &law, &m, &SolverOptions::default()).unwrap();
        assert_eq!(res.state.u1, res.state.u2);
        assert_eq!(res.state.alpha1, res.state.alpha2);
    }

    #[test]
    fn zero_step_at_equilibrium_is_fixed_point() {
        let law = parabolic(1.0, 1.0);
        let mesh = Mesh::new(1.0, 6).unwrap();
        let m = mats(4.0, 4.0, 0.5);
        let first = solve_increment(
            &mesh,
            &SystemState::zeros(7),
            0.2,
            &law,
            &m,
            &SolverOptions::default(),
        )
        .unwrap();
        let mut prev = first.state.clone();
        prev.delta_h = prev.slip();
        prev.gamma = prev.delta_h.clone();
        let again =
            solve_increment(&mesh, &prev, 0.2, &law, &m, &SolverOptions::default()).unwrap();
        assert_eq!(again.outer_iters, 1);
        assert_eq!(again.state.u1, prev.u1);
        assert_eq!(again.state.alpha1, prev.alpha1);
    }

    #[test]
    fn damage_floor_and_box() {
        let mesh = Mesh::new(1.0, 4).unwrap();
        let m = mats(4.0, 4.0, 0.5);
        let law = parabolic(1.0, 1.0);
        let mut state = SystemState::zeros(5);
        state.alpha1 = vec![0.2; 5];
        let lower = state.alpha1.clone();
        let ones = vec![1.0; 5];
        let floor = vec![0.0; 5];
        let data = IncrementData {
            mesh: &mesh,
            law: &law,
            materials: &m,
            floor: &floor,
            lower: [&lower, &ones],
        };
        let out = minimize_alpha(&data, &mut state, &SolverOptions::default());
        assert!(out.converged);
        assert_eq!(state.alpha1, lower);
        assert_eq!(state.alpha2, ones);
    }

    #[test]
    fn warm_start_never_beaten_upward() {
        let mesh = Mesh::new(1.0, 10).unwrap();
        let m = mats(3.0, 6.0, 0.2);
        let law = parabolic(0.5, 0.5);
        let mut prev = SystemState::zeros(11);
        let opts = SolverOptions::default();
        for k in 1..=10 {
            let res = solve_increment(&mesh, &prev, 0.05 * k as f64, &law, &m, &opts).unwrap();
            assert!(res.energy <= res.warm_start_energy + 1e-14);
            assert!(
                res.converged,
                "step {k}: {} {}",
                res.u_residual, res.alpha_residual
            );
            for j in 0..11 {
                assert!(res.state.alpha1[j] >= prev.alpha1[j]);
            }
            prev = res.state;
            prev.delta_h = prev
                .delta_h
                .iter()
                .zip(prev.slip())
                .map(|(a, b)| a.max(b))
                .collect();
            prev.gamma = prev.delta_h.clone();
        }
    }

    #[test]
    fn polish_with_zero_amplitude_is_identity() {
        let mesh = Mesh::new(1.0, 4).unwrap();
        let m = mats(3.0, 6.0, 0.2);
        let law = parabolic(0.5, 0.5);
        let opts = SolverOptions {
            n_restarts: 3,
            restart_amplitude: 0.0,
            ..SolverOptions::default()
        };
        let plain = solve_increment(
            &mesh,
            &SystemState::zeros(5),
            0.3,
            &law,
            &m,
            &SolverOptions::default(),
        )
        .unwrap();
        let polished =
            solve_increment(&mesh, &SystemState::zeros(5), 0.3, &law, &m, &opts).unwrap();
        assert_eq!(plain.state, polished.state);
        assert_eq!(polished.restarts_improved, 0);
    }
}
