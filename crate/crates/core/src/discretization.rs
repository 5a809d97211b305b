//! Uniform P1 mesh, nodal state and energy assembly.
//!
//! Stiffness is evaluated at element midpoints; `w` and the interface density
//! use nodal trapezoid weights.

use serde::{Deserialize, Serialize};

use crate::cohesive::CohesiveLaw;
use crate::error::{Error, Result};
use crate::materials::Materials;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub length: f64,
    pub n_elems: usize,
    pub h: f64,
}

impl Mesh {
    pub fn new(length: f64, n_elems: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) || n_elems == 0 {
            return Err(Error::IncompatibleData(format!(
                "mesh needs L > 0 and N >= 1, got L={length}, N={n_elems}"
            )));
        }
        Ok(Self {
            length,
            n_elems,
            h: length / n_elems as f64,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elems + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.n_elems {
            self.length
        } else {
            self.length * j as f64 / self.n_elems as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.x(j)).collect()
    }

    /// Trapezoid quadrature weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n_elems {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() == self.n_nodes() {
            Ok(())
        } else {
            Err(Error::FieldLength {
                expected: self.n_nodes(),
                found: field.len(),
            })
        }
    }
}

/// Nodal fields of both layers plus interface history at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub delta_h: Vec<f64>,
    pub gamma: Vec<f64>,
    pub t: f64,
}

impl SystemState {
    /// Undeformed, undamaged state with `n` nodes.
    pub fn zeros(n: usize) -> Self {
        Self {
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            alpha1: vec![0.0; n],
            alpha2: vec![0.0; n],
            delta_h: vec![0.0; n],
            gamma: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.u1.len()
    }

    pub fn u(&self, layer: usize) -> &[f64] {
        if layer == 0 {
            &self.u1
        } else {
            &self.u2
        }
    }

    pub fn alpha(&self, layer: usize) -> &[f64] {
        if layer == 0 {
            &self.alpha1
        } else {
            &self.alpha2
        }
    }

    pub fn alpha_mut(&mut self, layer: usize) -> &mut Vec<f64> {
        if layer == 0 {
            &mut self.alpha1
        } else {
            &mut self.alpha2
        }
    }

    pub fn slip(&self) -> Vec<f64> {
        self.u1
            .iter()
            .zip(&self.u2)
            .map(|(a, b)| (a - b).abs())
            .collect()
    }

    /// Checks field lengths, boundary values, the damage box and history ordering.
    pub fn validate(&self, mesh: &Mesh, boundary_value: f64) -> Result<()> {
        for field in [
            &self.u1,
            &self.u2,
            &self.alpha1,
            &self.alpha2,
            &self.delta_h,
            &self.gamma,
        ] {
            mesh.check_len(field)?;
        }
        let last = mesh.n_elems;
        for u in [&self.u1, &self.u2] {
            if u[0] != 0.0
                || (u[last] - boundary_value).abs() > 1e-12 * (1.0 + boundary_value.abs())
            {
                return Err(Error::IncompatibleData(format!(
                    "displacement boundary values ({}, {}) differ from (0, {boundary_value})",
                    u[0], u[last]
                )));
            }
        }
        for alpha in [&self.alpha1, &self.alpha2] {
            if let Some((node, &value)) = alpha
                .iter()
                .enumerate()
                .find(|(_, a)| !(0.0..=1.0).contains(*a))
            {
                return Err(Error::InvalidBound { node, value });
            }
        }
        for (node, delta) in self.slip().into_iter().enumerate() {
            let (dh, g) = (self.delta_h[node], self.gamma[node]);
            if dh < delta - 1e-12 || g < dh - 1e-12 {
                return Err(Error::HistoryBelowSlip {
                    node,
                    gamma: g.min(dh),
                    delta,
                });
            }
        }
        Ok(())
    }
}

fn midpoint(alpha: &[f64], e: usize) -> f64 {
    0.5 * (alpha[e] + alpha[e + 1])
}

pub fn elastic_energy(mesh: &Mesh, state: &SystemState, materials: &Materials) -> f64 {
    (0..2)
        .map(|i| layer_elastic_energy(mesh, state.u(i), state.alpha(i), materials, i))
        .sum()
}

pub(crate) fn layer_elastic_energy(
    mesh: &Mesh,
    u: &[f64],
    alpha: &[f64],
    materials: &Materials,
    layer: usize,
) -> f64 {
    let modulus = &materials[layer].modulus;
    let h = mesh.h;
    (0..mesh.n_elems)
        .map(|e| {
            let slope = (u[e + 1] - u[e]) / h;
            0.5 * h * modulus.value(midpoint(alpha, e)) * slope * slope
        })
        .sum()
}

pub fn damage_energy(mesh: &Mesh, state: &SystemState, materials: &Materials) -> f64 {
    (0..2)
        .map(|i| layer_damage_energy(mesh, state.alpha(i), materials, i))
        .sum()
}

pub(crate) fn layer_damage_energy(
    mesh: &Mesh,
    alpha: &[f64],
    materials: &Materials,
    layer: usize,
) -> f64 {
    let w = &materials[layer].dissipation;
    let h = mesh.h;
    let gradient: f64 = (0..mesh.n_elems)
        .map(|e| 0.5 * (alpha[e + 1] - alpha[e]).powi(2) / h)
        .sum();
    let local: f64 = alpha
        .iter()
        .enumerate()
        .map(|(j, &a)| mesh.weight(j) * w.value(a))
        .sum();
    gradient + local
}

/// Interface energy with the recorded history `gamma`.
pub fn cohesive_energy(mesh: &Mesh, state: &SystemState, law: &CohesiveLaw) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..mesh.n_nodes() {
        let delta = (state.u1[j] - state.u2[j]).abs();
        let gamma = state.gamma[j];
        if gamma < delta - 1e-12 {
            return Err(Error::HistoryBelowSlip {
                node: j,
                gamma,
                delta,
            });
        }
        total += mesh.weight(j) * law.phi(delta, gamma.max(delta));
    }
    Ok(total)
}

/// Interface energy of the incremental functional: history `floor` lifted by the current slip.
pub fn incremental_cohesive_energy(
    mesh: &Mesh,
    u1: &[f64],
    u2: &[f64],
    floor: &[f64],
    law: &CohesiveLaw,
) -> f64 {
    (0..mesh.n_nodes())
        .map(|j| mesh.weight(j) * law.slip_energy((u1[j] - u2[j]).abs(), floor[j]))
        .sum()
}

/// `E + D + K[delta, floor v delta]` for the fields of `state`.
pub fn incremental_energy(
    mesh: &Mesh,
    state: &SystemState,
    floor: &[f64],
    law: &CohesiveLaw,
    materials: &Materials,
) -> f64 {
    elastic_energy(mesh, state, materials)
        + damage_energy(mesh, state, materials)
        + incremental_cohesive_energy(mesh, &state.u1, &state.u2, floor, law)
}

/// Nodal gradient of the incremental energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    /// Nodes sitting on the kink of the interface term, with their stick threshold
    /// (trapezoid weight times the slope at zero slip).
    pub nonsmooth: Vec<(usize, f64)>,
}

pub fn total_gradient(
    mesh: &Mesh,
    state: &SystemState,
    law: &CohesiveLaw,
    materials: &Materials,
    floor: &[f64],
) -> Gradient {
    let n = mesh.n_nodes();
    let h = mesh.h;
    let mut grad_u = [vec![0.0; n], vec![0.0; n]];
    let mut grad_a = [vec![0.0; n], vec![0.0; n]];
    for i in 0..2 {
        let (u, alpha) = (state.u(i), state.alpha(i));
        let (modulus, w) = (&materials[i].modulus, &materials[i].dissipation);
        for e in 0..mesh.n_elems {
            let slope = (u[e + 1] - u[e]) / h;
            let a_mid = midpoint(alpha, e);
            let stress = modulus.value(a_mid) * slope;
            grad_u[i][e] -= stress;
            grad_u[i][e + 1] += stress;
            let drive = 0.25 * h * modulus.derivative(a_mid) * slope * slope;
            let lap = (alpha[e + 1] - alpha[e]) / h;
            grad_a[i][e] += drive - lap;
            grad_a[i][e + 1] += drive + lap;
        }
        for j in 0..n {
            grad_a[i][j] += mesh.weight(j) * w.derivative(alpha[j]);
        }
    }
    let mut nonsmooth = Vec::new();
    for j in 0..n {
        let diff = state.u1[j] - state.u2[j];
        let delta = diff.abs();
        if delta == 0.0 {
            let threshold = mesh.weight(j) * law.kink_threshold(floor[j]);
            if threshold > 0.0 {
                nonsmooth.push((j, threshold));
            }
            continue;
        }
        let force = mesh.weight(j) * law.slip_slope(delta, floor[j]) * diff.signum();
        grad_u[0][j] += force;
        grad_u[1][j] -= force;
    }
    let [u1, u2] = grad_u;
    let [alpha1, alpha2] = grad_a;
    Gradient {
        u1,
        u2,
        alpha1,
        alpha2,
        nonsmooth,
    }
}

/// Elementwise stresses `E_i(alpha_mid) u_i'` of both layers.
pub fn stress_field(mesh: &Mesh, state: &SystemState, materials: &Materials) -> Vec<(f64, f64)> {
    (0..mesh.n_elems)
        .map(|e| {
            let s = |i: usize| {
                let u = state.u(i);
                materials[i].modulus.value(midpoint(state.alpha(i), e)) * (u[e + 1] - u[e]) / mesh.h
            };
            (s(0), s(1))
        })
        .collect()
}

/// `sum_i int E_i(alpha_i) dx` with the midpoint rule.
pub fn stiffness_integral(mesh: &Mesh, state: &SystemState, materials: &Materials) -> f64 {
    (0..2)
        .map(|i| {
            (0..mesh.n_elems)
                .map(|e| mesh.h * materials[i].modulus.value(midpoint(state.alpha(i), e)))
                .sum::<f64>()
        })
        .sum()
}

/// `int (sigma_1 + sigma_2) dx`.
pub fn stress_integral(mesh: &Mesh, state: &SystemState, materials: &Materials) -> f64 {
    stress_field(mesh, state, materials)
        .iter()
        .map(|(a, b)| mesh.h * (a + b))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohesive::LoadingProfile;
    use crate::materials::{DamageDissipation, ElasticModulus, LayerMaterial};
    use approx::assert_relative_eq;

    fn materials(a: f64) -> Materials {
        let layer = LayerMaterial {
            modulus: ElasticModulus::power(a, 0.5).unwrap(),
            dissipation: DamageDissipation::new(0.5, 1.0).unwrap(),
        };
        [layer.clone(), layer]
    }

    fn ramp(mesh: &Mesh, u_bar: f64) -> SystemState {
        let mut s = SystemState::zeros(mesh.n_nodes());
        s.u1 = mesh
            .nodes()
            .iter()
            .map(|x| u_bar * x / mesh.length)
            .collect();
        s.u2 = s.u1.clone();
        s
    }

    #[test]
    fn homogeneous_energies() {
        let mesh = Mesh::new(2.0, 8).unwrap();
        let mats = materials(3.0);
        let s = ramp(&mesh, 0.5);
        assert_relative_eq!(
            elastic_energy(&mesh, &s, &mats),
            3.0 * 0.25 / 2.0,
            max_relative = 1e-14
        );
        let mut s1 = s.clone();
        s1.alpha1 = vec![1.0; 9];
        s1.alpha2 = vec![1.0; 9];
        let e1 = mats[0].modulus.value(1.0);
        assert_relative_eq!(
            elastic_energy(&mesh, &s1, &mats),
            e1 * 0.25 / 2.0,
            max_relative = 1e-14
        );

        let mut d = SystemState::zeros(9);
        d.alpha1 = vec![0.4; 9];
        assert_relative_eq!(
            damage_energy(&mesh, &d, &mats),
            2.0 * (0.16 + 0.4) / 2.0,
            max_relative = 1e-14
        );
        d.alpha1 = mesh.nodes().iter().map(|x| x / 2.0).collect();
        let w = DamageDissipation::new(0.0, 0.0).unwrap();
        let mut mats0 = mats.clone();
        mats0[0].dissipation = w;
        assert_relative_eq!(
            damage_energy(&mesh, &d, &mats0),
            1.0 / 4.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn cohesive_energy_constant_fields() {
        let law =
            CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(1.0, 1.0).unwrap())
                .unwrap();
        let mesh = Mesh::new(1.0, 10).unwrap();
        let mut s = SystemState::zeros(11);
        s.u1 = vec![0.25; 11];
        s.gamma = vec![0.5; 11];
        assert_relative_eq!(
            cohesive_energy(&mesh, &s, &law).unwrap(),
            0.5625,
            max_relative = 1e-14
        );
        s.gamma = vec![0.1; 11];
        assert!(cohesive_energy(&mesh, &s, &law).is_err());
    }

    #[test]
    fn stresses_of_ramp() {
        let mesh = Mesh::new(1.0, 5).unwrap();
        let mats = materials(2.0);
        let s = ramp(&mesh, 0.3);
        for (a, b) in stress_field(&mesh, &s, &mats) {
            assert_relative_eq!(a, 0.6, max_relative = 1e-14);
            assert_relative_eq!(b, 0.6, max_relative = 1e-14);
        }
    }

    #[test]
    fn symmetric_state_has_no_interface_force() {
        let law =
            CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(1.0, 1.0).unwrap())
                .unwrap();
        let mesh = Mesh::new(1.0, 6).unwrap();
        let mats = materials(2.0);
        let s = ramp(&mesh, 0.3);
        let g = total_gradient(&mesh, &s, &law, &mats, &[0.2; 7]);
        assert!(g.nonsmooth.is_empty());
        let g0 = total_gradient(&mesh, &s, &law, &mats, &[0.0; 7]);
        assert_eq!(g0.nonsmooth.len(), 7);
        assert_eq!(g.u1, g0.u1);
    }
}
