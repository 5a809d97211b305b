//! Residuals and oracles computed from exported states and ledger rows only.

use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cohesive::{check_law, probe_extent, CohesiveLaw};
use crate::discretization::{incremental_energy, stress_field, Mesh, SystemState};
use crate::error::{Error, Result};
use crate::evolution::{run_levels, EvolutionTrace, LoadProgram, Problem};
use crate::materials::{check_regularity_condition, Materials};
use crate::solver::warm_start;

/// Discrete KKT diagnostics of one damage increment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktTriple {
    /// Smallest nodal increment; irreversibility requires it to be nonnegative.
    pub min_dalpha: f64,
    /// Largest negative part of the damage operator on `{alpha < 1}`.
    pub gradient_violation: f64,
    /// Largest `|operator * dalpha|` on `{alpha < 1}`.
    pub complementarity: f64,
    pub max_dalpha: f64,
}

impl KktTriple {
    /// Single figure for the ledger.
    pub fn combined(&self) -> f64 {
        self.gradient_violation
            .max(self.complementarity)
            .max((-self.min_dalpha).max(0.0))
    }
}

/// Weak form of `-alpha'' + E'(alpha) (u')^2 / 2 + w'(alpha)` tested with nodal hats.
pub fn damage_operator(
    mesh: &Mesh,
    state: &SystemState,
    materials: &Materials,
    layer: usize,
) -> Vec<f64> {
    let (u, a) = (state.u(layer), state.alpha(layer));
    let (modulus, w) = (&materials[layer].modulus, &materials[layer].dissipation);
    let h = mesh.h;
    let mut op = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elems {
        let strain = (u[e + 1] - u[e]) / h;
        // each endpoint hat averages to 1/2 on the element midpoint
        let drive = 0.5 * h * 0.5 * modulus.derivative(0.5 * (a[e] + a[e + 1])) * strain * strain;
        let flux = (a[e + 1] - a[e]) / h;
        op[e] += drive - flux;
        op[e + 1] += drive + flux;
    }
    for (j, v) in op.iter_mut().enumerate() {
        *v += mesh.weight(j) * w.derivative(a[j]);
    }
    op
}

pub fn kkt_step(
    mesh: &Mesh,
    prev: &SystemState,
    state: &SystemState,
    materials: &Materials,
) -> KktTriple {
    let mut out = KktTriple {
        min_dalpha: f64::INFINITY,
        ..KktTriple::default()
    };
    for layer in 0..2 {
        let op = damage_operator(mesh, state, materials, layer);
        let (a, a0) = (state.alpha(layer), prev.alpha(layer));
        for j in 0..mesh.n_nodes() {
            let da = a[j] - a0[j];
            out.min_dalpha = out.min_dalpha.min(da);
            out.max_dalpha = out.max_dalpha.max(da);
            if a[j] < 1.0 {
                out.gradient_violation = out.gradient_violation.max(-op[j]);
                out.complementarity = out.complementarity.max((op[j] * da).abs());
            }
        }
    }
    out
}

/// Largest deviation of `sigma_1 + sigma_2` from its spatial mean.
pub fn stress_constancy_residual(mesh: &Mesh, state: &SystemState, materials: &Materials) -> f64 {
    let sums: Vec<f64> = stress_field(mesh, state, materials)
        .iter()
        .map(|(a, b)| a + b)
        .collect();
    let mean = sums.iter().sum::<f64>() / sums.len() as f64;
    sums.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBalance {
    pub per_step: Vec<f64>,
    pub max: f64,
    /// `total_k - total_0 - W_left_k - R`, which must be nonpositive.
    pub one_sided_excess: Vec<f64>,
    pub remainder: f64,
}

/// Energy-balance residuals recomputed from the ledger columns.
pub fn energy_balance_residual(
    trace: &EvolutionTrace,
    load: &LoadProgram,
    length: f64,
) -> EnergyBalance {
    let total0 = trace.records[0].total();
    let per_step: Vec<f64> = trace
        .records
        .iter()
        .map(|r| (r.total() - total0 - r.work).abs())
        .collect();
    let remainder = measured_remainder(trace, load, length);
    let one_sided_excess = trace
        .records
        .iter()
        .map(|r| r.total() - total0 - r.work_left - remainder)
        .collect();
    EnergyBalance {
        max: per_step.iter().copied().fold(0.0, f64::max),
        per_step,
        one_sided_excess,
        remainder,
    }
}

/// Remainder of the discrete energy inequality for the piecewise-constant interpolants.
pub fn measured_remainder(trace: &EvolutionTrace, load: &LoadProgram, length: f64) -> f64 {
    let mut lag = 0.0;
    let mut tail: f64 = 0.0;
    for pair in trace.records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        lag += load.lag_integral(prev.t, cur.t) / (length * length) * prev.stiffness_integral;
        tail = tail.max(load.total_variation(prev.t, cur.t) / length * prev.stress_integral.abs());
    }
    lag + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub random_excess: f64,
    pub hat_excess: f64,
    /// Threshold below which history counts as zero.
    pub cutoff: f64,
}

impl StabilityReport {
    pub fn worst(&self) -> f64 {
        self.random_excess.max(self.hat_excess)
    }
}

/// Cutoff for the unbroken set `{gamma = 0}`.
pub fn zero_history_cutoff(law: &CohesiveLaw) -> f64 {
    1e-12 * law.delta_bar().value().min(probe_extent(law.delta_bar()))
}

/// Excess of the first-variation inequality over test pairs normalized in the H1 seminorm.
pub fn stability_residual(
    mesh: &Mesh,
    state: &SystemState,
    law: &CohesiveLaw,
    materials: &Materials,
    n_test_fields: usize,
    seed: u64,
) -> StabilityReport {
    let n = mesh.n_nodes();
    let h = mesh.h;
    let sigma = stress_field(mesh, state, materials);
    let cutoff = zero_history_cutoff(law);
    let slope0 = law.psi_prime(0.0);
    let excess = |v1: &[f64], v2: &[f64]| -> f64 {
        let norm2: f64 = (0..mesh.n_elems)
            .map(|e| ((v1[e + 1] - v1[e]).powi(2) + (v2[e + 1] - v2[e]).powi(2)) / h)
            .sum();
        if norm2 == 0.0 {
            return 0.0;
        }
        let scale = 1.0 / norm2.sqrt();
        let mut lhs: f64 = (0..mesh.n_elems)
            .map(|e| sigma[e].0 * (v1[e + 1] - v1[e]) + sigma[e].1 * (v2[e + 1] - v2[e]))
            .sum();
        let mut rhs = 0.0;
        for j in 0..n {
            let diff = state.u1[j] - state.u2[j];
            let dv = v1[j] - v2[j];
            if diff != 0.0 {
                lhs +=
                    mesh.weight(j) * law.d_phi_dy(diff.abs(), state.gamma[j]) * diff.signum() * dv;
            }
            if state.gamma[j] <= cutoff {
                rhs += mesh.weight(j) * slope0 * dv.abs();
            }
        }
        (lhs.abs() - rhs) * scale
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_excess = f64::NEG_INFINITY;
    for _ in 0..n_test_fields {
        let mut v1 = vec![0.0; n];
        let mut v2 = vec![0.0; n];
        for j in 1..n - 1 {
            v1[j] = rng.gen_range(-1.0..1.0);
            v2[j] = rng.gen_range(-1.0..1.0);
        }
        random_excess = random_excess.max(excess(&v1, &v2));
    }
    let mut hat_excess = f64::NEG_INFINITY;
    for j in 1..n - 1 {
        let mut hat = vec![0.0; n];
        hat[j] = 1.0;
        let zero = vec![0.0; n];
        hat_excess = hat_excess
            .max(excess(&hat, &zero))
            .max(excess(&zero, &hat))
            .max(excess(&hat, &hat));
    }
    StabilityReport {
        random_excess: random_excess.max(0.0),
        hat_excess: hat_excess.max(0.0),
        cutoff,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// Largest `sum_i ||u_i||_{H1}^2` over the trace, and its bound.
    pub u_norm2: f64,
    pub u_bound: f64,
    pub alpha_norm2: f64,
    pub alpha_bound: f64,
    /// Largest `|dh(x) - dh(y)| / sqrt|x - y|`, and the Hölder constant.
    pub holder_ratio: f64,
    pub holder_constant: f64,
}

impl BoundsReport {
    /// All quantities within `slack` times their bounds.
    pub fn holds(&self, slack: f64) -> bool {
        self.u_norm2 <= slack * self.u_bound
            && self.alpha_norm2 <= slack * self.alpha_bound
            && self.holder_ratio <= slack * self.holder_constant
    }
}

fn h1_norm2(mesh: &Mesh, f: &[f64]) -> f64 {
    let h = mesh.h;
    (0..mesh.n_elems)
        .map(|e| {
            let (a, b) = (f[e], f[e + 1]);
            (b - a).powi(2) / h + h / 3.0 * (a * a + a * b + b * b)
        })
        .sum()
}

/// A priori bounds from comparison with the affine, fully damaged competitor.
pub fn uniform_bounds(
    trace: &EvolutionTrace,
    mesh: &Mesh,
    materials: &Materials,
    law: &CohesiveLaw,
    load: &LoadProgram,
) -> BoundsReport {
    let length = mesh.length;
    let u_sup = load
        .pieces(0.0, load.final_time)
        .iter()
        .flat_map(|&(t0, t1, v0, s)| [v0.abs(), (v0 + s * (t1 - t0)).abs()])
        .fold(0.0, f64::max);
    let extent = 16.0 * probe_extent(law.delta_bar());
    let phi0_sup = (0..=4096)
        .map(|i| law.phi(0.0, extent * i as f64 / 4096.0))
        .fold(0.0, f64::max);
    let eps = materials
        .iter()
        .map(|m| {
            (0..=256)
                .map(|j| m.modulus.value(j as f64 / 256.0))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);
    let b: f64 = materials
        .iter()
        .map(|m| {
            0.5 * m.modulus.value(1.0) * u_sup * u_sup / length + length * m.dissipation.value(1.0)
        })
        .sum::<f64>()
        + length * phi0_sup;
    let poincare = 4.0 * length * length / (std::f64::consts::PI * std::f64::consts::PI);
    let mut report = BoundsReport {
        u_norm2: 0.0,
        u_bound: (1.0 + poincare) * 2.0 * b / eps,
        alpha_norm2: 0.0,
        alpha_bound: 2.0 * length + 2.0 * b,
        holder_ratio: 0.0,
        holder_constant: 2.0 * (b / eps).sqrt(),
    };
    let x = mesh.nodes();
    for s in &trace.states {
        report.u_norm2 = report
            .u_norm2
            .max(h1_norm2(mesh, &s.u1) + h1_norm2(mesh, &s.u2));
        report.alpha_norm2 = report
            .alpha_norm2
            .max(h1_norm2(mesh, &s.alpha1) + h1_norm2(mesh, &s.alpha2));
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                let r = (s.delta_h[i] - s.delta_h[j]).abs() / (x[j] - x[i]).sqrt();
                report.holder_ratio = report.holder_ratio.max(r);
            }
        }
    }
    report
}

/// Largest `||state_k - state_j||_{H1} / int_{t_j}^{t_k} |u_bar'|` over step pairs with load change.
pub fn temporal_modulus(trace: &EvolutionTrace, mesh: &Mesh, load: &LoadProgram) -> f64 {
    let mut worst: f64 = 0.0;
    let states = &trace.states;
    for k in 0..states.len() {
        for j in 0..k {
            let tv = load.total_variation(states[j].t, states[k].t);
            if tv <= 0.0 {
                continue;
            }
            let diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
                a.iter().zip(b).map(|(p, q)| p - q).collect()
            };
            let (a, b) = (&states[k], &states[j]);
            let norm2 = h1_norm2(mesh, &diff(&a.u1, &b.u1))
                + h1_norm2(mesh, &diff(&a.u2, &b.u2))
                + h1_norm2(mesh, &diff(&a.alpha1, &b.alpha1))
                + h1_norm2(mesh, &diff(&a.alpha2, &b.alpha2));
            worst = worst.max(norm2.sqrt() / tv);
        }
    }
    worst
}

/// Largest `|gamma ^ dbar - dh ^ dbar|` with `dh` recomputed as the running maximum of the slip.
pub fn history_gap(trace: &EvolutionTrace, law: &CohesiveLaw) -> f64 {
    let bar = law.delta_bar();
    let mut dh = trace.states[0].slip();
    let mut gap: f64 = 0.0;
    for s in &trace.states {
        for (d, slip) in dh.iter_mut().zip(s.slip()) {
            *d = d.max(slip);
        }
        for (g, d) in s.gamma.iter().zip(&dh) {
            gap = gap.max((bar.truncate(*g) - bar.truncate(*d)).abs());
        }
    }
    gap
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryLevel {
    pub n_steps: usize,
    pub scheme_gap: f64,
    /// Gap to the finest level at shared times, when the partitions nest.
    pub cross_level_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStudy {
    pub levels: Vec<HistoryLevel>,
    pub warnings: Vec<String>,
}

pub fn history_equivalence_study(problem: &Problem, partitions: &[usize]) -> Result<HistoryStudy> {
    let mut warnings = Vec::new();
    let report = check_law(&problem.law, 32, 1e-10);
    if report.strict_monotonicity_constant <= 0.0 {
        warnings.push(
            "interface law is not uniformly strictly monotone in the history variable".to_string(),
        );
    }
    let budget =
        check_regularity_condition(&problem.materials, &problem.law, problem.mesh.length, 256)?;
    if !budget.holds() {
        warnings.push(format!(
            "regularity condition fails (margin {})",
            budget.margin
        ));
    }
    let traces = run_levels(problem, partitions)?;
    let finest = traces.last();
    let bar = problem.law.delta_bar();
    let levels = partitions
        .iter()
        .zip(&traces)
        .map(|(&n, trace)| {
            let n_fine = finest.map_or(0, |f| f.n_steps());
            let cross_level_gap = (n_fine % n == 0).then(|| {
                let ratio = n_fine / n;
                let fine = finest.unwrap();
                (0..=n)
                    .flat_map(|k| {
                        let a = &trace.states[k].delta_h;
                        let b = &fine.states[k * ratio].delta_h;
                        a.iter()
                            .zip(b)
                            .map(|(p, q)| (bar.truncate(*p) - bar.truncate(*q)).abs())
                            .collect::<Vec<_>>()
                    })
                    .fold(0.0, f64::max)
            });
            HistoryLevel {
                n_steps: n,
                scheme_gap: history_gap(trace, &problem.law),
                cross_level_gap,
            }
        })
        .collect();
    Ok(HistoryStudy { levels, warnings })
}

/// Best point found by the multi-start oracle.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub state: SystemState,
    pub energy: f64,
    pub starts: usize,
    pub free_coords: usize,
}

pub const ORACLE_COORDINATE_CAP: usize = 8;

#[derive(Clone, Copy)]
enum Coord {
    Mean(usize),
    Slip(usize),
    Damage(usize, usize),
}

struct OracleSpace<'a> {
    mesh: &'a Mesh,
    law: &'a CohesiveLaw,
    materials: &'a Materials,
    floor: &'a [f64],
    base: SystemState,
    coords: Vec<Coord>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl OracleSpace<'_> {
    fn energy(&self, x: &[f64], scratch: &mut SystemState) -> f64 {
        // means first, then slips, so each node is rebuilt from both values
        for (k, c) in self.coords.iter().enumerate() {
            if let Coord::Mean(j) = *c {
                let d = self.slip_of(x, j);
                scratch.u1[j] = x[k] + 0.5 * d;
                scratch.u2[j] = x[k] - 0.5 * d;
            }
        }
        for (k, c) in self.coords.iter().enumerate() {
            if let Coord::Damage(layer, j) = *c {
                scratch.alpha_mut(layer)[j] = x[k];
            }
        }
        incremental_energy(self.mesh, scratch, self.floor, self.law, self.materials)
    }

    fn slip_of(&self, x: &[f64], node: usize) -> f64 {
        self.coords
            .iter()
            .position(|c| matches!(c, Coord::Slip(j) if *j == node))
            .map_or(0.0, |k| x[k])
    }

    fn compass(
        &self,
        x: &mut [f64],
        f: &mut f64,
        scratch: &mut SystemState,
        rel_tol: f64,
        max_evals: usize,
    ) {
        let range: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect();
        let mut step: Vec<f64> = range.iter().map(|r| 0.25 * r).collect();
        let mut evals = 0;
        while evals < max_evals {
            let mut improved = false;
            'coords: for i in 0..x.len() {
                for sign in [1.0, -1.0] {
                    let old = x[i];
                    let trial = (old + sign * step[i]).clamp(self.lo[i], self.hi[i]);
                    if trial == old {
                        continue;
                    }
                    x[i] = trial;
                    let ft = self.energy(x, scratch);
                    evals += 1;
                    if ft < *f {
                        *f = ft;
                        improved = true;
                        break 'coords;
                    }
                    x[i] = old;
                }
            }
            if !improved {
                let mut done = true;
                for (s, r) in step.iter_mut().zip(&range) {
                    *s *= 0.5;
                    done &= *s <= rel_tol * r;
                }
                if done {
                    break;
                }
            }
        }
    }
}

/// Multi-start compass search over the admissible box of one increment.
pub fn brute_force_increment_oracle(
    mesh: &Mesh,
    prev: &SystemState,
    boundary_value: f64,
    law: &CohesiveLaw,
    materials: &Materials,
    n_starts: usize,
    seed: u64,
) -> Result<OracleResult> {
    let base = warm_start(mesh, prev, boundary_value);
    let mut coords = Vec::new();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    let u_span = base
        .u1
        .iter()
        .chain(&base.u2)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let radius = 1.0 + 2.0 * u_span;
    for j in 1..mesh.n_elems {
        coords.push(Coord::Mean(j));
        lo.push(-radius);
        hi.push(radius);
        coords.push(Coord::Slip(j));
        lo.push(-2.0 * radius);
        hi.push(2.0 * radius);
    }
    for layer in 0..2 {
        for j in 0..mesh.n_nodes() {
            let floor = prev.alpha(layer)[j];
            if floor < 1.0 {
                coords.push(Coord::Damage(layer, j));
                lo.push(floor);
                hi.push(1.0);
            }
        }
    }
    if coords.len() > ORACLE_COORDINATE_CAP {
        return Err(Error::OracleTooLarge {
            found: coords.len(),
            cap: ORACLE_COORDINATE_CAP,
        });
    }
    let space = OracleSpace {
        mesh,
        law,
        materials,
        floor: &prev.delta_h,
        base,
        coords,
        lo,
        hi,
    };
    let free_coords = space.coords.len();
    let mut scratch = space.base.clone();
    if free_coords == 0 {
        let energy = incremental_energy(mesh, &scratch, &prev.delta_h, law, materials);
        return Ok(OracleResult {
            state: scratch,
            energy,
            starts: 0,
            free_coords,
        });
    }
    let warm_x: Vec<f64> = space
        .coords
        .iter()
        .map(|c| match *c {
            Coord::Mean(j) => 0.5 * (space.base.u1[j] + space.base.u2[j]),
            Coord::Slip(j) => space.base.u1[j] - space.base.u2[j],
            Coord::Damage(layer, j) => space.base.alpha(layer)[j],
        })
        .collect();
    const CHUNKS: usize = 4;
    let per_chunk = n_starts.div_ceil(CHUNKS);
    let bests: Vec<(Vec<f64>, f64)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..CHUNKS)
            .map(|c| {
                let space = &space;
                let warm_x = &warm_x;
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
                    let mut scratch = space.base.clone();
                    let mut best = (warm_x.clone(), f64::INFINITY);
                    let count = per_chunk.min(n_starts.saturating_sub(c * per_chunk));
                    for i in 0..count {
                        let mut x: Vec<f64> = if c == 0 && i == 0 {
                            warm_x.clone()
                        } else {
                            (0..space.coords.len())
                                .map(|k| rng.gen_range(space.lo[k]..=space.hi[k]))
                                .collect()
                        };
                        let mut f = space.energy(&x, &mut scratch);
                        space.compass(&mut x, &mut f, &mut scratch, 1e-9, 20_000);
                        if f < best.1 {
                            best = (x, f);
                        }
                    }
                    best
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("oracle thread panicked"))
            .collect()
    });
    let (mut x, mut f) = bests
        .into_iter()
        .fold((warm_x.clone(), f64::INFINITY), |acc, b| {
            if b.1 < acc.1 {
                b
            } else {
                acc
            }
        });
    space.compass(&mut x, &mut f, &mut scratch, 1e-13, 200_000);
    let mut state = space.base.clone();
    let energy = space.energy(&x, &mut state);
    Ok(OracleResult {
        state,
        energy,
        starts: n_starts,
        free_coords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohesive::LoadingProfile;
    use crate::materials::{DamageDissipation, ElasticModulus, LayerMaterial};

    fn mats(a: f64) -> Materials {
        let layer = LayerMaterial {
            modulus: ElasticModulus::power(a, 0.5).unwrap(),
            dissipation: DamageDissipation::new(0.5, 1.0).unwrap(),
        };
        [layer.clone(), layer]
    }

    #[test]
    fn homogeneous_state_residuals_vanish() {
        let mesh = Mesh::new(1.0, 8).unwrap();
        let law =
            CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(1.0, 1.0).unwrap())
                .unwrap();
        let mut s = SystemState::zeros(9);
        s.u1 = mesh.nodes().iter().map(|x| 0.1 * x).collect();
        s.u2 = s.u1.clone();
        let m = mats(2.0);
        assert!(stress_constancy_residual(&mesh, &s, &m) < 1e-15);
        let stab = stability_residual(&mesh, &s, &law, &m, 20, 3);
        assert!(stab.worst() < 1e-14);
        let kkt = kkt_step(&mesh, &s, &s, &m);
        assert_eq!(kkt.min_dalpha, 0.0);
        assert_eq!(kkt.complementarity, 0.0);
    }

    #[test]
    fn pinned_damage_has_empty_active_set() {
        let mesh = Mesh::new(1.0, 4).unwrap();
        let mut s = SystemState::zeros(5);
        s.u1 = mesh.nodes().iter().map(|x| 3.0 * x).collect();
        s.u2 = s.u1.clone();
        s.alpha1 = vec![1.0; 5];
        s.alpha2 = vec![1.0; 5];
        let kkt = kkt_step(&mesh, &s, &s, &mats(2.0));
        assert_eq!(
            (kkt.min_dalpha, kkt.gradient_violation, kkt.complementarity),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn oracle_rejects_large_problems() {
        let mesh = Mesh::new(1.0, 4).unwrap();
        let law =
            CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(1.0, 1.0).unwrap())
                .unwrap();
        let err = brute_force_increment_oracle(
            &mesh,
            &SystemState::zeros(5),
            0.1,
            &law,
            &mats(2.0),
            10,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OracleTooLarge { .. }));
    }

    #[test]
    fn oracle_without_free_coordinates_returns_input() {
        let mesh = Mesh::new(1.0, 1).unwrap();
        let law =
            CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(1.0, 1.0).unwrap())
                .unwrap();
        let mut prev = SystemState::zeros(2);
        prev.alpha1 = vec![1.0; 2];
        prev.alpha2 = vec![1.0; 2];
        let out = brute_force_increment_oracle(&mesh, &prev, 0.2, &law, &mats(2.0), 10, 0).unwrap();
        assert_eq!(out.free_coords, 0);
        assert_eq!(out.state.u1, vec![0.0, 0.2]);
    }
}
