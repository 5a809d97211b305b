//! Layer constitutive data: damage-dependent stiffness and damage dissipation.

use std::f64::consts::PI;

use crate::cohesive::{CohesiveLaw, CustomFn};
use crate::error::{Error, Result};

/// Elastic modulus `E(y)` as a function of damage `y` in `[0, 1]`.
#[derive(Debug, Clone)]
pub enum ElasticModulus {
    /// `a (1 + y)^(-b)`
    Power {
        a: f64,
        b: f64,
    },
    /// `sum_k coef[k] y^k`
    Polynomial(Vec<f64>),
    Custom(CustomFn),
}

impl ElasticModulus {
    pub fn power(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidMaterial(format!(
                "power modulus needs a > 0 and 0 < b < 1, got a={a}, b={b}"
            )));
        }
        Ok(Self::Power { a, b })
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::polynomial(vec![a])
    }

    pub fn polynomial(coef: Vec<f64>) -> Result<Self> {
        if coef.is_empty() || coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMaterial(
                "polynomial modulus needs finite coefficients".into(),
            ));
        }
        let modulus = Self::Polynomial(coef);
        modulus.check_positive(256)?;
        Ok(modulus)
    }

    pub fn custom(f: CustomFn) -> Result<Self> {
        let modulus = Self::Custom(f);
        modulus.check_positive(256)?;
        Ok(modulus)
    }

    pub fn family_tag(&self) -> String {
        match self {
            Self::Power { a, b } => format!("power(a={a}, b={b})"),
            Self::Polynomial(c) => format!("polynomial{c:?}"),
            Self::Custom(_) => "custom".into(),
        }
    }

    fn check_positive(&self, res: usize) -> Result<()> {
        for j in 0..=res {
            let y = j as f64 / res as f64;
            let value = self.value(y);
            if !(value > 0.0) {
                return Err(Error::NonPositiveModulus { at: y, value });
            }
        }
        Ok(())
    }

    pub fn value(&self, y: f64) -> f64 {
        match self {
            Self::Power { a, b } => a * (1.0 + y).powf(-b),
            Self::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * y + ck),
            Self::Custom(f) => f.eval(y),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            Self::Power { a, b } => -a * b * (1.0 + y).powf(-b - 1.0),
            Self::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * y + k as f64 * ck),
            Self::Custom(f) => {
                let (lo, hi) = clamped_stencil(y);
                (f.eval(hi) - f.eval(lo)) / (hi - lo)
            }
        }
    }

    pub fn second_derivative(&self, y: f64) -> f64 {
        match self {
            Self::Power { a, b } => a * b * (b + 1.0) * (1.0 + y).powf(-b - 2.0),
            Self::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * y + (k * (k - 1)) as f64 * ck),
            Self::Custom(f) => {
                let (lo, hi) = clamped_stencil(y);
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                (f.eval(hi) - 2.0 * f.eval(mid) + f.eval(lo)) / (half * half)
            }
        }
    }
}

/// Central stencil of half-width 1e-5 around `y`, shifted to stay inside `[0, 1]`.
fn clamped_stencil(y: f64) -> (f64, f64) {
    const STEP: f64 = 1e-5;
    let centre = y.clamp(STEP, 1.0 - STEP);
    (centre - STEP, centre + STEP)
}

/// Hardening constants of a modulus on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardeningParams {
    /// `min (E'' E / 2 - E'^2)`
    pub m: f64,
    /// `max E''`
    pub big_m: f64,
    /// `min E`
    pub eps: f64,
    /// Set when `m` comes from a grid and sits within 1e-8 of zero.
    pub conservative: bool,
}

impl HardeningParams {
    pub fn is_hardening(&self) -> bool {
        self.m > 0.0 && self.big_m > 0.0 && !self.conservative
    }

    pub fn ratio(&self) -> f64 {
        self.m / self.big_m
    }
}

/// Closed form for the power family, grid extrema otherwise.
pub fn hardening_params(
    modulus: &ElasticModulus,
    grid_resolution: usize,
) -> Result<HardeningParams> {
    match modulus {
        ElasticModulus::Power { a, b } => Ok(HardeningParams {
            m: 0.5 * a * a * b * (1.0 - b) / 4f64.powf(1.0 + b),
            big_m: a * b * (1.0 + b),
            eps: a * 2f64.powf(-b),
            conservative: false,
        }),
        _ => hardening_params_on_grid(modulus, grid_resolution),
    }
}

pub fn hardening_params_on_grid(
    modulus: &ElasticModulus,
    grid_resolution: usize,
) -> Result<HardeningParams> {
    let res = grid_resolution.max(1);
    let (mut m, mut big_m, mut eps) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..=res {
        let y = j as f64 / res as f64;
        let e = modulus.value(y);
        if !(e > 0.0) {
            return Err(Error::NonPositiveModulus { at: y, value: e });
        }
        let (d1, d2) = (modulus.derivative(y), modulus.second_derivative(y));
        m = m.min(0.5 * d2 * e - d1 * d1);
        big_m = big_m.max(d2);
        eps = eps.min(e);
    }
    Ok(HardeningParams {
        m,
        big_m,
        eps,
        conservative: m.abs() <= 1e-8,
    })
}

/// Damage dissipation `w(y) = linear y + quadratic y^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageDissipation {
    pub linear: f64,
    pub quadratic: f64,
}

impl DamageDissipation {
    pub fn new(linear: f64, quadratic: f64) -> Result<Self> {
        if !linear.is_finite() || !quadratic.is_finite() {
            return Err(Error::InvalidMaterial(
                "dissipation coefficients must be finite".into(),
            ));
        }
        let w = Self { linear, quadratic };
        // w(0) = 0 and w is a parabola, so nonnegativity on [0, 1] reduces to the endpoint and vertex
        let vertex = if quadratic > 0.0 {
            (-linear / quadratic).clamp(0.0, 1.0)
        } else {
            1.0
        };
        for y in [1.0, vertex] {
            if w.value(y) < 0.0 {
                return Err(Error::InvalidMaterial(format!(
                    "dissipation is negative at y = {y}"
                )));
            }
        }
        Ok(w)
    }

    pub fn value(&self, y: f64) -> f64 {
        self.linear * y + 0.5 * self.quadratic * y * y
    }

    pub fn derivative(&self, y: f64) -> f64 {
        self.linear + self.quadratic * y
    }

    pub fn second_derivative(&self) -> f64 {
        self.quadratic
    }

    pub fn mu(&self) -> f64 {
        self.quadratic.max(0.0)
    }

    /// Worst excess of the midpoint test `w(m) <= (w(a)+w(b))/2 - mu (b-a)^2 / 8` on a grid.
    pub fn convexity_defect(&self, mu: f64, grid_resolution: usize) -> f64 {
        let res = grid_resolution.max(2);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..=res {
            for j in (i + 1)..=res {
                let (a, b) = (i as f64 / res as f64, j as f64 / res as f64);
                let excess = self.value(0.5 * (a + b)) - 0.5 * (self.value(a) + self.value(b))
                    + mu * (b - a).powi(2) / 8.0;
                worst = worst.max(excess);
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct LayerMaterial {
    pub modulus: ElasticModulus,
    pub dissipation: DamageDissipation,
}

pub type Materials = [LayerMaterial; 2];

/// Margin of the regularity condition `min m_i/M_i > lambda L^2 / pi^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityBudget {
    pub layers: [HardeningParams; 2],
    pub m_over_m: f64,
    pub mu: f64,
    pub lambda: f64,
    pub length: f64,
    pub margin: f64,
}

impl ConvexityBudget {
    pub fn holds(&self) -> bool {
        self.margin > 0.0 && self.layers.iter().all(|p| p.is_hardening())
    }

    pub fn poincare_constant(&self) -> f64 {
        self.length * self.length / (PI * PI)
    }
}

pub fn check_regularity_condition(
    materials: &Materials,
    law: &CohesiveLaw,
    length: f64,
    grid_resolution: usize,
) -> Result<ConvexityBudget> {
    let p1 = hardening_params(&materials[0].modulus, grid_resolution)?;
    let p2 = hardening_params(&materials[1].modulus, grid_resolution)?;
    let m_over_m = p1.ratio().min(p2.ratio());
    let lambda = law.lambda();
    Ok(ConvexityBudget {
        layers: [p1, p2],
        m_over_m,
        mu: materials[0]
            .dissipation
            .mu()
            .min(materials[1].dissipation.mu()),
        lambda,
        length,
        margin: m_over_m - lambda * length * length / (PI * PI),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohesive::{CohesiveLaw, LoadingProfile, ScalarFn};
    use approx::assert_relative_eq;

    fn layer(a: f64) -> LayerMaterial {
        LayerMaterial {
            modulus: ElasticModulus::power(a, 0.5).unwrap(),
            dissipation: DamageDissipation::new(0.5, 1.0).unwrap(),
        }
    }

    #[test]
    fn power_closed_forms() {
        let p = hardening_params(&ElasticModulus::power(96.0, 0.5).unwrap(), 0).unwrap();
        assert_relative_eq!(p.m, 144.0, max_relative = 1e-14);
        assert_relative_eq!(p.big_m, 72.0, max_relative = 1e-14);
        assert_relative_eq!(p.ratio(), 2.0, max_relative = 1e-14);
        for a in [1.0, 7.5, 24.0] {
            let p = hardening_params(&ElasticModulus::power(a, 0.5).unwrap(), 0).unwrap();
            assert_relative_eq!(p.ratio(), a / 48.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn grid_agrees_with_closed_form() {
        for (a, b) in [(96.0, 0.5), (3.0, 0.25), (10.0, 0.9)] {
            let m = ElasticModulus::power(a, b).unwrap();
            let exact = hardening_params(&m, 0).unwrap();
            let grid = hardening_params_on_grid(&m, 256).unwrap();
            assert_relative_eq!(exact.m, grid.m, max_relative = 1e-10);
            assert_relative_eq!(exact.big_m, grid.big_m, max_relative = 1e-10);
            assert_relative_eq!(exact.eps, grid.eps, max_relative = 1e-10);
        }
    }

    #[test]
    fn constant_modulus_is_not_hardening() {
        let p = hardening_params(&ElasticModulus::constant(5.0).unwrap(), 64).unwrap();
        assert!(p.m <= 0.0);
        assert!(!p.is_hardening());
    }

    #[test]
    fn custom_derivatives_match_exact() {
        let custom = ElasticModulus::custom(CustomFn::new(|y| 4.0 * (1.0 + y).powf(-0.5))).unwrap();
        let exact = ElasticModulus::power(4.0, 0.5).unwrap();
        for y in [0.0, 0.3, 0.77, 1.0] {
            assert_relative_eq!(
                custom.derivative(y),
                exact.derivative(y),
                max_relative = 1e-4
            );
            assert_relative_eq!(
                custom.second_derivative(y),
                exact.second_derivative(y),
                max_relative = 1e-3
            );
        }
        assert!(matches!(
            ElasticModulus::custom(CustomFn::new(|y| 1.0 - 2.0 * y)),
            Err(Error::NonPositiveModulus { .. })
        ));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let moduli = [
            ElasticModulus::power(3.0, 0.4).unwrap(),
            ElasticModulus::polynomial(vec![2.0, -0.5, 0.3]).unwrap(),
        ];
        for m in &moduli {
            for y in [0.1, 0.5, 0.9] {
                let h = 1e-5;
                let fd1 = (m.value(y + h) - m.value(y - h)) / (2.0 * h);
                let fd2 = (m.derivative(y + h) - m.derivative(y - h)) / (2.0 * h);
                assert_relative_eq!(m.derivative(y), fd1, max_relative = 1e-6);
                assert_relative_eq!(m.second_derivative(y), fd2, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn dissipation_convexity() {
        let w = DamageDissipation::new(0.5, 1.0).unwrap();
        assert_eq!(w.mu(), 1.0);
        assert!(w.convexity_defect(1.0, 32).abs() < 1e-15);
        assert!(w.convexity_defect(1.1, 32) > 0.0);
        assert!(DamageDissipation::new(-1.0, 0.5).is_err());
    }

    #[test]
    fn regularity_margins() {
        let law =
            CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(0.5, 1.0).unwrap())
                .unwrap();
        assert_eq!(law.lambda(), 1.0);
        let budget = check_regularity_condition(&[layer(96.0), layer(96.0)], &law, PI, 64).unwrap();
        assert_relative_eq!(budget.margin, 1.0, max_relative = 1e-12);
        assert!(budget.holds());

        let budget = check_regularity_condition(&[layer(24.0), layer(24.0)], &law, PI, 64).unwrap();
        assert_relative_eq!(budget.margin, -0.5, max_relative = 1e-12);
        assert!(!budget.holds());

        let flat = CohesiveLaw::separable(ScalarFn::Zero, ScalarFn::Linear { slope: 1.0 }).unwrap();
        assert_eq!(flat.lambda(), 0.0);
        let budget =
            check_regularity_condition(&[layer(24.0), layer(24.0)], &flat, PI, 64).unwrap();
        assert_relative_eq!(budget.margin, 0.5, max_relative = 1e-12);
    }
}
