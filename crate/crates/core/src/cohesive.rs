//! Loading-unloading densities `phi(y, z)` of the cohesive interface.
//!
//! `y` is the current slip and `z >= y` the largest slip seen so far. The
//! restriction to the diagonal, `psi(z) = phi(z, z)`, is the loading curve.
//! Two constructions are provided: the quadratic-unloading law built from a
//! loading profile, and the separable law `phi1(y) + phi2(z)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Limit slip beyond which the loading curve is flat (complete delamination).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlipLimit {
    Finite(f64),
    Unbounded,
}

impl SlipLimit {
    pub fn value(self) -> f64 {
        match self {
            SlipLimit::Finite(d) => d,
            SlipLimit::Unbounded => f64::INFINITY,
        }
    }

    pub fn truncate(self, x: f64) -> f64 {
        match self {
            SlipLimit::Finite(d) => x.min(d),
            SlipLimit::Unbounded => x,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, SlipLimit::Finite(_))
    }
}

/// A user-supplied scalar function. Derivatives are taken numerically.
#[derive(Clone)]
pub struct CustomFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl CustomFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }

    /// First derivative on `[0, inf)`; one-sided near the origin.
    pub fn derivative(&self, x: f64) -> f64 {
        let h = 1e-5 * x.abs().max(1.0);
        if x >= h {
            (self.eval(x + h) - self.eval(x - h)) / (2.0 * h)
        } else {
            (-3.0 * self.eval(x) + 4.0 * self.eval(x + h) - self.eval(x + 2.0 * h)) / (2.0 * h)
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let h = 1e-4 * x.abs().max(1.0);
        if x >= h {
            (self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h)
        } else {
            (self.eval(x) - 2.0 * self.eval(x + h) + self.eval(x + 2.0 * h)) / (h * h)
        }
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn(..)")
    }
}

/// Scalar functions on `[0, inf)` used by separable laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Zero,
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
    },
    /// `coef * x^2`
    Quadratic {
        coef: f64,
    },
    /// `min(slope * x, cap)`
    Capped {
        slope: f64,
        cap: f64,
    },
    /// `c * (1 - exp(-k x))`
    Saturating {
        c: f64,
        k: f64,
    },
    /// Monotone cubic (Fritsch-Carlson) through the samples, constant outside.
    Tabulated {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

impl ScalarFn {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match self {
            ScalarFn::Zero => Ok(()),
            ScalarFn::Constant { value } => finite(*value, "value"),
            ScalarFn::Linear { slope } => finite(*slope, "slope"),
            ScalarFn::Quadratic { coef } => finite(*coef, "coef"),
            ScalarFn::Capped { slope, cap } => {
                finite(*slope, "slope")?;
                finite(*cap, "cap")?;
                if *slope <= 0.0 || *cap < 0.0 {
                    return Err("capped needs slope > 0 and cap >= 0".into());
                }
                Ok(())
            }
            ScalarFn::Saturating { c, k } => {
                finite(*c, "c")?;
                finite(*k, "k")?;
                if *k <= 0.0 {
                    return Err("saturating needs k > 0".into());
                }
                Ok(())
            }
            ScalarFn::Tabulated { x, y } => {
                if x.len() != y.len() {
                    return Err(format!(
                        "tabulated x has {} samples but y has {}",
                        x.len(),
                        y.len()
                    ));
                }
                if x.len() < 2 {
                    return Err("tabulated needs at least two samples".into());
                }
                if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                    return Err("tabulated samples must be finite".into());
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("tabulated x must be strictly increasing".into());
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Constant { value } => *value,
            ScalarFn::Linear { slope } => slope * x,
            ScalarFn::Quadratic { coef } => coef * x * x,
            ScalarFn::Capped { slope, cap } => (slope * x).min(*cap),
            ScalarFn::Saturating { c, k } => c * (1.0 - (-k * x).exp()),
            ScalarFn::Tabulated { x: xs, y: ys } => hermite(xs, ys, x).0,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Zero | ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Linear { slope } => *slope,
            ScalarFn::Quadratic { coef } => 2.0 * coef * x,
            ScalarFn::Capped { slope, cap } => {
                if slope * x < *cap {
                    *slope
                } else {
                    0.0
                }
            }
            ScalarFn::Saturating { c, k } => c * k * (-k * x).exp(),
            ScalarFn::Tabulated { x: xs, y: ys } => hermite(xs, ys, x).1,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Quadratic { coef } => 2.0 * coef,
            ScalarFn::Saturating { c, k } => -c * k * k * (-k * x).exp(),
            ScalarFn::Tabulated { x: xs, y: ys } => hermite(xs, ys, x).2,
            _ => 0.0,
        }
    }

    /// Smallest `x` beyond which the function is constant, if any.
    pub fn saturation(&self) -> Option<f64> {
        match self {
            ScalarFn::Zero | ScalarFn::Constant { .. } => Some(0.0),
            ScalarFn::Linear { slope } if *slope == 0.0 => Some(0.0),
            ScalarFn::Quadratic { coef } if *coef == 0.0 => Some(0.0),
            ScalarFn::Capped { slope, cap } => Some(cap / slope),
            ScalarFn::Tabulated { x, .. } => x.last().copied(),
            _ => None,
        }
    }
}

/// Value, first and second derivative of the monotone cubic interpolant.
fn hermite(xs: &[f64], ys: &[f64], t: f64) -> (f64, f64, f64) {
    let n = xs.len();
    if t <= xs[0] {
        return (ys[0], 0.0, 0.0);
    }
    if t >= xs[n - 1] {
        return (ys[n - 1], 0.0, 0.0);
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    };
    let secant = |k: usize| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
    let slope_at = |k: usize| -> f64 {
        if k == 0 {
            return secant(0);
        }
        if k == n - 1 {
            return secant(n - 2);
        }
        let (d0, d1) = (secant(k - 1), secant(k));
        if d0 * d1 <= 0.0 {
            return 0.0;
        }
        let (h0, h1) = (xs[k] - xs[k - 1], xs[k + 1] - xs[k]);
        let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
        (w1 + w2) / (w1 / d0 + w2 / d1)
    };
    let h = xs[i + 1] - xs[i];
    let s = (t - xs[i]) / h;
    let (y0, y1) = (ys[i], ys[i + 1]);
    let (m0, m1) = (slope_at(i) * h, slope_at(i + 1) * h);
    let s2 = s * s;
    let s3 = s2 * s;
    let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * m1;
    let d1 = (6.0 * s2 - 6.0 * s) * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * m0
        + (-6.0 * s2 + 6.0 * s) * y1
        + (3.0 * s2 - 2.0 * s) * m1;
    let d2 = (12.0 * s - 6.0) * y0
        + (6.0 * s - 4.0) * m0
        + (-12.0 * s + 6.0) * y1
        + (6.0 * s - 2.0) * m1;
    (value, d1 / h, d2 / (h * h))
}

#[derive(Debug, Clone)]
pub enum ProfileFamily {
    /// `c z (2k - z)` on `[0, k)`, `c k^2` beyond.
    ParabolicCapped {
        c: f64,
        k: f64,
    },
    /// `c (1 - exp(-k z))`.
    Exponential {
        c: f64,
        k: f64,
    },
    Custom(CustomFn),
}

/// The loading curve `psi` with its concavity budget `lambda` and limit slip.
#[derive(Debug, Clone)]
pub struct LoadingProfile {
    family: ProfileFamily,
    lambda: f64,
    delta_bar: SlipLimit,
}

impl LoadingProfile {
    pub fn parabolic_capped(c: f64, k: f64) -> Result<Self> {
        positive_params(c, k)?;
        Ok(Self {
            family: ProfileFamily::ParabolicCapped { c, k },
            lambda: 2.0 * c,
            delta_bar: SlipLimit::Finite(k),
        })
    }

    pub fn exponential(c: f64, k: f64) -> Result<Self> {
        positive_params(c, k)?;
        Ok(Self {
            family: ProfileFamily::Exponential { c, k },
            lambda: c * k * k,
            delta_bar: SlipLimit::Unbounded,
        })
    }

    /// A profile given by its values only. `lambda` is estimated from second
    /// differences on a dyadic grid and inflated by 10%.
    pub fn custom(psi: CustomFn, delta_bar: SlipLimit) -> Result<Self> {
        if let SlipLimit::Finite(d) = delta_bar {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidProfile(format!(
                    "limit slip must be positive, got {d}"
                )));
            }
        }
        let at_zero = psi.eval(0.0);
        if at_zero.abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!(
                "psi(0) must vanish, got {at_zero:e}"
            )));
        }
        let extent = probe_extent(delta_bar);
        let n = 256;
        for i in 0..n {
            let (a, b) = (
                extent * i as f64 / n as f64,
                extent * (i + 1) as f64 / n as f64,
            );
            let (fa, fb) = (psi.eval(a), psi.eval(b));
            if fb < fa - 1e-12 {
                return Err(Error::NonMonotone {
                    at: a,
                    slope: (fb - fa) / (b - a),
                });
            }
            let mid = psi.eval(0.5 * (a + b));
            if mid < 0.5 * (fa + fb) - 1e-12 {
                return Err(Error::InvalidProfile(format!(
                    "psi is not concave near z = {a}"
                )));
            }
        }
        let lambda = 1.1 * dyadic_curvature_bound(|z| psi.eval(z), delta_bar);
        Ok(Self {
            family: ProfileFamily::Custom(psi),
            lambda,
            delta_bar,
        })
    }

    pub fn family(&self) -> &ProfileFamily {
        &self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta_bar(&self) -> SlipLimit {
        self.delta_bar
    }

    pub fn family_tag(&self) -> String {
        match &self.family {
            ProfileFamily::ParabolicCapped { c, k } => format!("parabolic_capped(c={c}, k={k})"),
            ProfileFamily::Exponential { c, k } => format!("exponential(c={c}, k={k})"),
            ProfileFamily::Custom(_) => "custom".to_string(),
        }
    }

    pub fn psi(&self, z: f64) -> f64 {
        match &self.family {
            ProfileFamily::ParabolicCapped { c, k } => {
                if z < *k {
                    c * z * (2.0 * k - z)
                } else {
                    c * k * k
                }
            }
            ProfileFamily::Exponential { c, k } => c * (1.0 - (-k * z).exp()),
            ProfileFamily::Custom(f) => f.eval(z),
        }
    }

    pub fn psi_prime(&self, z: f64) -> f64 {
        match &self.family {
            ProfileFamily::ParabolicCapped { c, k } => {
                if z < *k {
                    2.0 * c * (k - z)
                } else {
                    0.0
                }
            }
            ProfileFamily::Exponential { c, k } => c * k * (-k * z).exp(),
            ProfileFamily::Custom(f) => f.derivative(z),
        }
    }

    pub fn psi_second(&self, z: f64) -> f64 {
        match &self.family {
            ProfileFamily::ParabolicCapped { c, k } => {
                if z < *k {
                    -2.0 * c
                } else {
                    0.0
                }
            }
            ProfileFamily::Exponential { c, k } => -c * k * k * (-k * z).exp(),
            ProfileFamily::Custom(f) => f.second_derivative(z),
        }
    }

    fn is_custom(&self) -> bool {
        matches!(self.family, ProfileFamily::Custom(_))
    }
}

fn positive_params(c: f64, k: f64) -> Result<()> {
    if c > 0.0 && k > 0.0 && c.is_finite() && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!(
            "c and k must be positive and finite, got c={c}, k={k}"
        )))
    }
}

/// Range of slips probed by the grid checks.
pub fn probe_extent(delta_bar: SlipLimit) -> f64 {
    match delta_bar {
        SlipLimit::Finite(d) => 1.5 * d,
        SlipLimit::Unbounded => 10.0,
    }
}

/// Largest second-difference quotient of `f` on a dyadic grid of `[0, delta_bar)`.
fn dyadic_curvature_bound(f: impl Fn(f64) -> f64, delta_bar: SlipLimit) -> f64 {
    let top = match delta_bar {
        SlipLimit::Finite(d) => d,
        SlipLimit::Unbounded => 10.0,
    };
    let step = top / 1024.0;
    let mut sup: f64 = 0.0;
    let mut z = step;
    while z + step < top {
        let q = (f(z + step) - 2.0 * f(z) + f(z - step)) / (step * step);
        sup = sup.max(q.abs());
        z += step;
    }
    sup
}

#[derive(Debug, Clone)]
pub enum LawKind {
    QuadraticUnloading(LoadingProfile),
    Separable { phi1: ScalarFn, phi2: ScalarFn },
}

/// A loading-unloading density on `{0 <= y <= z}`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct CohesiveLaw {
    kind: LawKind,
    delta_bar: SlipLimit,
    lambda: f64,
}

impl CohesiveLaw {
    /// `phi(y, z) = psi'(z) y^2 / (2z) + psi(z) - z psi'(z) / 2`, with `phi(0, 0) = 0`.
    pub fn quadratic_unloading(profile: LoadingProfile) -> Result<Self> {
        let extent = probe_extent(profile.delta_bar());
        let n = 512;
        for i in 0..=n {
            let z = extent * i as f64 / n as f64;
            let slope = profile.psi_prime(z);
            if slope < -1e-12 {
                return Err(Error::NonMonotone { at: z, slope });
            }
        }
        let delta_bar = profile.delta_bar();
        let lambda = profile.lambda();
        Ok(Self {
            kind: LawKind::QuadraticUnloading(profile),
            delta_bar,
            lambda,
        })
    }

    /// `phi(y, z) = phi1(y) + phi2(z)`.
    pub fn separable(phi1: ScalarFn, phi2: ScalarFn) -> Result<Self> {
        phi1.validate()
            .map_err(|m| Error::InvalidProfile(format!("phi1: {m}")))?;
        phi2.validate()
            .map_err(|m| Error::InvalidProfile(format!("phi2: {m}")))?;
        let delta_bar = match (phi1.saturation(), phi2.saturation()) {
            (Some(a), Some(b)) if a.max(b) > 0.0 => SlipLimit::Finite(a.max(b)),
            _ => SlipLimit::Unbounded,
        };
        let extent = probe_extent(delta_bar);
        let n = 512;
        for i in 0..n {
            let (a, b) = (
                extent * i as f64 / n as f64,
                extent * (i + 1) as f64 / n as f64,
            );
            let (fa, fb) = (phi2.eval(a), phi2.eval(b));
            if fb < fa - 1e-12 {
                return Err(Error::NonMonotone {
                    at: a,
                    slope: (fb - fa) / (b - a),
                });
            }
        }
        let lambda = 1.1 * dyadic_curvature_bound(|z| phi1.eval(z) + phi2.eval(z), delta_bar);
        Ok(Self {
            kind: LawKind::Separable { phi1, phi2 },
            delta_bar,
            lambda,
        })
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn profile(&self) -> Option<&LoadingProfile> {
        match &self.kind {
            LawKind::QuadraticUnloading(p) => Some(p),
            LawKind::Separable { .. } => None,
        }
    }

    pub fn delta_bar(&self) -> SlipLimit {
        self.delta_bar
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            LawKind::QuadraticUnloading(p) => format!("quadratic_unloading[{}]", p.family_tag()),
            LawKind::Separable { phi1, phi2 } => format!("separable[{phi1:?} + {phi2:?}]"),
        }
    }

    /// Laws whose continuity cannot be inferred from their construction.
    pub fn has_opaque_parts(&self) -> bool {
        match &self.kind {
            LawKind::QuadraticUnloading(p) => p.is_custom(),
            LawKind::Separable { phi1, phi2 } => {
                matches!(phi1, ScalarFn::Tabulated { .. })
                    || matches!(phi2, ScalarFn::Tabulated { .. })
            }
        }
    }

    pub fn psi(&self, z: f64) -> f64 {
        match &self.kind {
            LawKind::QuadraticUnloading(p) => p.psi(z),
            LawKind::Separable { phi1, phi2 } => phi1.eval(z) + phi2.eval(z),
        }
    }

    pub fn psi_prime(&self, z: f64) -> f64 {
        match &self.kind {
            LawKind::QuadraticUnloading(p) => p.psi_prime(z),
            LawKind::Separable { phi1, phi2 } => phi1.derivative(z) + phi2.derivative(z),
        }
    }

    pub fn psi_second(&self, z: f64) -> f64 {
        match &self.kind {
            LawKind::QuadraticUnloading(p) => p.psi_second(z),
            LawKind::Separable { phi1, phi2 } => {
                phi1.second_derivative(z) + phi2.second_derivative(z)
            }
        }
    }

    pub fn phi(&self, y: f64, z: f64) -> f64 {
        let (y, z) = (self.delta_bar.truncate(y), self.delta_bar.truncate(z));
        match &self.kind {
            LawKind::QuadraticUnloading(p) => {
                if z <= 0.0 {
                    return 0.0;
                }
                let slope = p.psi_prime(z);
                0.5 * slope / z * y * y + p.psi(z) - 0.5 * z * slope
            }
            LawKind::Separable { phi1, phi2 } => phi1.eval(y) + phi2.eval(z),
        }
    }

    pub fn d_phi_dy(&self, y: f64, z: f64) -> f64 {
        if y >= self.delta_bar.value() {
            return 0.0;
        }
        let z = self.delta_bar.truncate(z);
        match &self.kind {
            LawKind::QuadraticUnloading(p) => {
                if z <= 0.0 {
                    0.0
                } else {
                    p.psi_prime(z) * y / z
                }
            }
            LawKind::Separable { phi1, .. } => phi1.derivative(y),
        }
    }

    /// Defined on `z < delta_bar`; zero beyond.
    pub fn d_phi_dz(&self, y: f64, z: f64) -> f64 {
        if z >= self.delta_bar.value() {
            return 0.0;
        }
        match &self.kind {
            LawKind::QuadraticUnloading(p) => {
                if z <= 0.0 {
                    return 0.5 * p.psi_prime(0.0);
                }
                let r = y / z;
                0.5 * (p.psi_prime(z) - z * p.psi_second(z)) * (1.0 - r * r)
            }
            LawKind::Separable { phi2, .. } => phi2.derivative(z),
        }
    }

    pub fn d2_phi_dy2(&self, y: f64, z: f64) -> f64 {
        if y >= self.delta_bar.value() {
            return 0.0;
        }
        let z = self.delta_bar.truncate(z);
        match &self.kind {
            LawKind::QuadraticUnloading(p) => {
                if z <= 0.0 {
                    0.0
                } else {
                    p.psi_prime(z) / z
                }
            }
            LawKind::Separable { phi1, .. } => phi1.second_derivative(y),
        }
    }

    /// Interface energy density at slip `d >= 0` when the frozen history is `floor`:
    /// `phi(d, max(floor, d))`.
    pub fn slip_energy(&self, d: f64, floor: f64) -> f64 {
        self.phi(d, floor.max(d))
    }

    /// Right derivative of `d -> phi(d, max(floor, d))`. Below the history the
    /// unloading branch applies, at or above it the loading curve does.
    pub fn slip_slope(&self, d: f64, floor: f64) -> f64 {
        if d >= self.delta_bar.value() {
            0.0
        } else if d < floor {
            self.d_phi_dy(d, floor)
        } else {
            self.psi_prime(d)
        }
    }

    pub fn slip_curvature(&self, d: f64, floor: f64) -> f64 {
        if d >= self.delta_bar.value() {
            0.0
        } else if d < floor {
            self.d2_phi_dy2(d, floor)
        } else {
            self.psi_second(d)
        }
    }

    /// Slope of `|y| -> phi(|y|, max(floor, |y|))` at `y = 0+`; a positive value
    /// means the node sticks until the tangential force exceeds it.
    pub fn kink_threshold(&self, floor: f64) -> f64 {
        self.slip_slope(0.0, floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not decidable by probing; taken on trust.
    Assumed,
}

#[derive(Debug, Clone)]
pub struct AssumptionEntry {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Worst probe value: a violation magnitude, or the reported constant.
    pub worst: f64,
    pub at: Option<(f64, f64)>,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub law: String,
    pub grid_resolution: usize,
    pub tolerance: f64,
    pub probe_extent: f64,
    /// Empirical constant of uniform strict monotonicity in `z` away from the diagonal.
    pub strict_monotonicity_constant: f64,
    /// `sup |psi''|` on the probe grid of `[0, delta_bar)`.
    pub curvature_sup: f64,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn entry(&self, name: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn passes(&self, name: &str) -> bool {
        self.entry(name)
            .is_some_and(|e| e.status == CheckStatus::Pass)
    }

    pub fn failures(&self) -> Vec<&AssumptionEntry> {
        self.entries
            .iter()
            .filter(|e| e.status == CheckStatus::Fail)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("law: {}\n", self.law));
        out.push_str(&format!(
            "grid_resolution: {}  tolerance: {:e}  probe_extent: {}\n",
            self.grid_resolution, self.tolerance, self.probe_extent
        ));
        for e in &self.entries {
            let status = match e.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Assumed => "ASSUMED",
            };
            let at =
                e.at.map(|(y, z)| format!(" at (y={y}, z={z})"))
                    .unwrap_or_default();
            out.push_str(&format!(
                "{status:<8} {:<14} worst={:e}{at}  {}\n",
                e.name, e.worst, e.note
            ));
        }
        out
    }
}

/// Tracks the worst probe value for one assumption.
struct Worst {
    value: f64,
    at: Option<(f64, f64)>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            at: None,
        }
    }

    fn offer(&mut self, v: f64, y: f64, z: f64) {
        if v > self.value || self.at.is_none() && v >= self.value {
            self.value = v;
            self.at = Some((y, z));
        }
    }
}

fn entry(name: &'static str, pass: bool, worst: Worst, note: impl Into<String>) -> AssumptionEntry {
    AssumptionEntry {
        name,
        status: if pass {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        worst: worst.value,
        at: worst.at,
        note: note.into(),
    }
}

/// Certifies the standing assumptions on `law` over a finite probe grid.
/// Failures are entries of the report, never errors.
pub fn check_law(law: &CohesiveLaw, grid_resolution: usize, tolerance: f64) -> AssumptionReport {
    let res = grid_resolution.max(8);
    let extent = probe_extent(law.delta_bar());
    let dbar = law.delta_bar().value();
    let grid = |i: usize, top: f64| top * i as f64 / res as f64;
    let mut entries = Vec::new();

    // loading profile
    let mut w = Worst::new();
    w.offer(law.psi(0.0).abs(), 0.0, 0.0);
    for j in 0..res {
        let (a, b) = (grid(j, extent), grid(j + 1, extent));
        let (fa, fb) = (law.psi(a), law.psi(b));
        w.offer(fa - fb, a, b);
        w.offer(0.5 * (fa + fb) - law.psi(0.5 * (a + b)), a, b);
        w.offer(-law.psi_prime(a), a, a);
    }
    let pass = w.value <= tolerance;
    entries.push(entry(
        "profile",
        pass,
        w,
        "psi(0)=0, non-decreasing, concave",
    ));

    // (phi1) lower semicontinuity
    let eta = 1e-9 * extent;
    let mut w = Worst::new();
    for j in 1..=res {
        let z = grid(j, extent);
        for i in 0..=res {
            let y = z * i as f64 / res as f64;
            let base = law.phi(y, z);
            w.offer((law.phi((y - eta).max(0.0), z) - base).abs(), y, z);
            w.offer((law.phi(y, z + eta) - base).abs(), y, z);
        }
    }
    if law.has_opaque_parts() {
        entries.push(AssumptionEntry {
            name: "phi1",
            status: CheckStatus::Assumed,
            worst: w.value,
            at: w.at,
            note: "lower semicontinuity of tabulated or custom input is taken on trust".into(),
        });
    } else {
        let pass = w.value <= 1e-6;
        entries.push(entry(
            "phi1",
            pass,
            w,
            "largest jump under perturbations of size 1e-9 x extent",
        ));
    }

    // (phi2) phi(0, .) bounded
    let sup_on = |lo: f64, hi: f64| -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, lo);
        for j in 0..=res {
            let z = lo + (hi - lo) * j as f64 / res as f64;
            let v = law.phi(0.0, z);
            if v > best.0 {
                best = (v, z);
            }
        }
        best
    };
    let (near, _) = sup_on(0.0, 16.0 * extent);
    let (far, far_at) = sup_on(16.0 * extent, 256.0 * extent);
    let growth = (far - near).max(0.0);
    let mut w = Worst::new();
    w.offer(growth, 0.0, far_at);
    let pass = growth.is_finite() && growth <= tolerance.max(1e-9 * near.abs());
    entries.push(entry(
        "phi2",
        pass,
        w,
        format!("sup phi(0,.) = {near:e}; worst is growth beyond 16 x extent"),
    ));

    // (phi3) phi(y, .) non-decreasing on [y, inf)
    let mut w = Worst::new();
    for i in 0..=res {
        let y = grid(i, extent);
        let mut prev = law.phi(y, y);
        for j in 1..=res {
            let z = y
                + (extent - y).max(0.0) * j as f64 / res as f64
                + 1e-3 * extent * (j as f64) / res as f64;
            let v = law.phi(y, z);
            w.offer(prev - v, y, z);
            prev = v;
        }
    }
    let pass = w.value <= tolerance;
    entries.push(entry(
        "phi3",
        pass,
        w,
        "largest decrease of phi(y,.) along z",
    ));

    // (phi5) lambda-convexity of psi, midpoint form
    let lambda = law.lambda();
    let mut w = Worst::new();
    for a in 0..=res {
        for b in (a + 1)..=res {
            let (za, zb) = (grid(a, extent), grid(b, extent));
            let excess = law.psi(0.5 * (za + zb))
                - 0.5 * (law.psi(za) + law.psi(zb))
                - 0.125 * lambda * (zb - za) * (zb - za);
            w.offer(excess, za, zb);
        }
    }
    let pass = w.value <= tolerance;
    entries.push(entry(
        "phi5",
        pass,
        w,
        format!("midpoint test with lambda = {lambda}"),
    ));

    // (phi6) phi(., z) non-decreasing and convex on [0, z]
    let mut w = Worst::new();
    for j in 1..=res {
        let z = grid(j, extent);
        let vals: Vec<f64> = (0..=res)
            .map(|i| law.phi(z * i as f64 / res as f64, z))
            .collect();
        for i in 0..res {
            let y = z * i as f64 / res as f64;
            w.offer(vals[i] - vals[i + 1], y, z);
            if i > 0 {
                w.offer(2.0 * vals[i] - vals[i - 1] - vals[i + 1], y, z);
            }
        }
    }
    let pass = w.value <= tolerance;
    entries.push(entry(
        "phi6",
        pass,
        w,
        "largest decrease or concavity of phi(.,z)",
    ));

    // (phi7) d_y phi(z,z) = psi'(z), d_y phi(0,z) = 0
    let mut w = Worst::new();
    for j in 1..=res {
        let z = grid(j, extent);
        w.offer((law.d_phi_dy(z, z) - law.psi_prime(z)).abs(), z, z);
        w.offer(law.d_phi_dy(0.0, z).abs(), 0.0, z);
    }
    let pass = w.value <= tolerance;
    entries.push(entry(
        "phi7",
        pass,
        w,
        "slope identities on the diagonal and at zero slip",
    ));

    // (phi8) d_y phi bounded
    let mut w = Worst::new();
    for j in 1..=res {
        let z = grid(j, extent);
        for i in 0..=res {
            let y = z * i as f64 / res as f64;
            w.offer(law.d_phi_dy(y, z).abs(), y, z);
        }
    }
    let pass = w.value.is_finite();
    entries.push(entry("phi8", pass, w, "sup |d_y phi| on the probe grid"));

    // (phi9) uniform strict monotonicity in z on a compact set off the diagonal
    let top = dbar.min(extent);
    let gap = top / 8.0;
    let mut c_k = f64::INFINITY;
    let mut c_at = None;
    for i in 0..=res {
        let y = (top - gap) * i as f64 / res as f64;
        let z_lo = y + gap;
        let mut prev = (z_lo, law.phi(y, z_lo));
        for j in 1..=res {
            let z = z_lo + (top - z_lo) * j as f64 / res as f64;
            if z <= prev.0 {
                continue;
            }
            let v = law.phi(y, z);
            let slope = (v - prev.1) / (z - prev.0);
            if slope < c_k {
                c_k = slope;
                c_at = Some((y, z));
            }
            prev = (z, v);
        }
    }
    let c_k = if c_k.is_finite() { c_k.max(0.0) } else { 0.0 };
    entries.push(AssumptionEntry {
        name: "phi9",
        status: if c_k > tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        worst: c_k,
        at: c_at,
        note: format!("C_K on z - y >= {gap:e}, z <= {top:e}"),
    });

    // truncation at the limit slip
    let mut w = Worst::new();
    let trunc = law.delta_bar();
    for j in 0..=res {
        let z = grid(j, extent);
        for i in 0..=res {
            let y = z * i as f64 / res as f64;
            w.offer(
                (law.phi(y, z) - law.phi(trunc.truncate(y), trunc.truncate(z))).abs(),
                y,
                z,
            );
        }
    }
    let pass = w.value <= tolerance;
    entries.push(entry("truncation", pass, w, format!("limit slip {dbar}")));

    // diagonal identity
    let mut w = Worst::new();
    for j in 0..=res {
        let z = grid(j, extent);
        w.offer((law.phi(z, z) - law.psi(z)).abs(), z, z);
    }
    let pass = w.value <= tolerance;
    entries.push(entry("diagonal", pass, w, "phi(z,z) = psi(z)"));

    // lambda >= sup |psi''| on [0, delta_bar)
    let mut sup = Worst::new();
    for j in 0..=res {
        let z = grid(j, extent);
        if z < dbar {
            sup.offer(law.psi_second(z).abs(), z, z);
        }
    }
    let curvature_sup = sup.value;
    let pass = lambda >= curvature_sup - tolerance;
    entries.push(entry(
        "lambda",
        pass,
        sup,
        format!("reported sup |psi''|; lambda = {lambda}"),
    ));

    AssumptionReport {
        law: law.describe(),
        grid_resolution: res,
        tolerance,
        probe_extent: extent,
        strict_monotonicity_constant: c_k,
        curvature_sup,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn parabolic(c: f64, k: f64) -> CohesiveLaw {
        CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(c, k).unwrap()).unwrap()
    }

    fn exponential(c: f64, k: f64) -> CohesiveLaw {
        CohesiveLaw::quadratic_unloading(LoadingProfile::exponential(c, k).unwrap()).unwrap()
    }

    #[test]
    fn quadratic_unloading_values() {
        let law = parabolic(1.0, 1.0);
        assert_eq!(law.phi(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(law.phi(0.5, 0.5), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(law.phi(0.25, 0.5), 0.5625, epsilon = 1e-15);
        assert_abs_diff_eq!(law.phi(0.3, 2.0), 1.0, epsilon = 1e-15);

        // 0.5 e^-1 / 2 + (1 - e^-1) - 0.5 e^-1
        let e = (-1.0f64).exp();
        let expected = 0.125 * e + 1.0 - e - 0.5 * e;
        assert_abs_diff_eq!(expected, 0.494166, epsilon = 1e-6);
        assert_abs_diff_eq!(
            exponential(1.0, 1.0).phi(0.5, 1.0),
            expected,
            epsilon = 1e-15
        );
    }

    #[test]
    fn separable_values() {
        let law = CohesiveLaw::separable(
            ScalarFn::Zero,
            ScalarFn::Capped {
                slope: 1.0,
                cap: 1.0,
            },
        )
        .unwrap();
        assert_eq!(law.phi(0.3, 0.5), 0.5);
        assert_eq!(law.delta_bar(), SlipLimit::Finite(1.0));

        let law = CohesiveLaw::separable(
            ScalarFn::Quadratic { coef: 1.0 },
            ScalarFn::Saturating { c: 1.0, k: 1.0 },
        )
        .unwrap();
        assert_abs_diff_eq!(law.phi(1.0, 2.0), 2.0 - (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(law.phi(1.0, 2.0), 1.864665, epsilon = 1e-6);
        assert_eq!(law.phi(0.0, 0.0), 0.0);
    }

    #[test]
    fn separable_rejects_decreasing_history_part() {
        let err =
            CohesiveLaw::separable(ScalarFn::Zero, ScalarFn::Linear { slope: -1.0 }).unwrap_err();
        assert!(matches!(err, Error::NonMonotone { .. }));
    }

    #[test]
    fn custom_profile_rejects_decreasing_psi() {
        let err = LoadingProfile::custom(CustomFn::new(|z| -z), SlipLimit::Unbounded).unwrap_err();
        assert!(matches!(err, Error::NonMonotone { .. }));
        let err =
            LoadingProfile::custom(CustomFn::new(|z| 1.0 + z), SlipLimit::Unbounded).unwrap_err();
        assert!(matches!(err, Error::InvalidProfile(_)));
    }

    #[test]
    fn custom_profile_lambda_is_inflated_curvature() {
        let p = LoadingProfile::custom(CustomFn::new(|z| 1.0 - (-z).exp()), SlipLimit::Unbounded)
            .unwrap();
        // sup |psi''| = 1 at the origin; the dyadic grid starts one step in
        assert!(
            p.lambda() > 1.05 && p.lambda() <= 1.1 + 1e-9,
            "lambda {}",
            p.lambda()
        );
        let law = CohesiveLaw::quadratic_unloading(p).unwrap();
        let reference = exponential(1.0, 1.0);
        for &(y, z) in &[(0.1, 0.5), (0.7, 1.3), (2.0, 4.0)] {
            assert_abs_diff_eq!(law.phi(y, z), reference.phi(y, z), epsilon = 1e-8);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for law in [
            parabolic(1.0, 1.0),
            exponential(2.0, 0.5),
            parabolic(0.5, 2.0),
        ] {
            let top = law.delta_bar().value().min(5.0);
            for i in 1..20 {
                let z = top * (i as f64 + 0.37) / 21.0;
                for frac in [0.2, 0.5, 0.8] {
                    let y = frac * z;
                    let h = 1e-6 * z;
                    let fd_y = (law.phi(y + h, z) - law.phi(y - h, z)) / (2.0 * h);
                    let fd_z = (law.phi(y, z + h) - law.phi(y, z - h)) / (2.0 * h);
                    let dy = law.d_phi_dy(y, z);
                    let dz = law.d_phi_dz(y, z);
                    assert!(
                        (dy - fd_y).abs() <= 1e-6 * dy.abs().max(1e-3),
                        "dy {dy} fd {fd_y}"
                    );
                    assert!(
                        (dz - fd_z).abs() <= 1e-6 * dz.abs().max(1e-3),
                        "dz {dz} fd {fd_z}"
                    );
                }
            }
        }
    }

    #[test]
    fn slip_branches() {
        let law = parabolic(1.0, 1.0);
        // loading from a virgin interface
        assert_abs_diff_eq!(law.kink_threshold(0.0), 2.0);
        // unloading branch is smooth at zero slip
        assert_eq!(law.kink_threshold(0.4), 0.0);
        assert_abs_diff_eq!(law.slip_slope(0.2, 0.4), law.psi_prime(0.4) * 0.5);
        assert_abs_diff_eq!(law.slip_slope(0.6, 0.4), law.psi_prime(0.6));
        assert_abs_diff_eq!(law.slip_curvature(0.2, 0.4), law.psi_prime(0.4) / 0.4);
        assert_eq!(law.slip_slope(1.5, 0.4), 0.0);
        assert_abs_diff_eq!(law.slip_energy(0.2, 0.4), law.phi(0.2, 0.4));
        assert_abs_diff_eq!(law.slip_energy(0.6, 0.4), law.psi(0.6));
    }

    #[test]
    fn tabulated_interpolates_monotonically() {
        let f = ScalarFn::Tabulated {
            x: vec![0.0, 0.5, 1.0, 2.0],
            y: vec![0.0, 0.6, 0.9, 1.0],
        };
        f.validate().unwrap();
        assert_abs_diff_eq!(f.eval(0.5), 0.6);
        assert_eq!(f.eval(3.0), 1.0);
        let mut prev = f.eval(0.0);
        for i in 1..=200 {
            let v = f.eval(2.0 * i as f64 / 200.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        let (x, h) = (0.73, 1e-6);
        assert_abs_diff_eq!(
            f.derivative(x),
            (f.eval(x + h) - f.eval(x - h)) / (2.0 * h),
            epsilon = 1e-6
        );
        assert!(ScalarFn::Tabulated {
            x: vec![0.0, 0.0],
            y: vec![0.0, 1.0]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn report_for_parabolic_law_passes() {
        let report = check_law(&parabolic(1.0, 1.0), 64, 1e-10);
        for name in [
            "phi2",
            "phi3",
            "phi5",
            "phi6",
            "phi7",
            "phi8",
            "phi9",
            "profile",
            "truncation",
        ] {
            assert!(report.passes(name), "{name}: {}", report.to_text());
        }
        assert!(report.strict_monotonicity_constant > 0.0);
    }

    #[test]
    fn report_flags_constant_history_part() {
        let law = CohesiveLaw::separable(
            ScalarFn::Quadratic { coef: 1.0 },
            ScalarFn::Constant { value: 0.3 },
        )
        .unwrap();
        let report = check_law(&law, 32, 1e-10);
        let e = report.entry("phi9").unwrap();
        assert_eq!(e.status, CheckStatus::Fail);
        assert_eq!(e.worst, 0.0);
    }

    #[test]
    fn report_curvature_for_exponential() {
        let report = check_law(&exponential(1.0, 1.0), 64, 1e-10);
        let e = report.entry("lambda").unwrap();
        assert_abs_diff_eq!(e.worst, 1.0, epsilon = 1e-15);
        assert_eq!(e.status, CheckStatus::Pass);
    }

    #[test]
    fn tabulated_inputs_are_assumed_lsc() {
        let law = CohesiveLaw::separable(
            ScalarFn::Zero,
            ScalarFn::Tabulated {
                x: vec![0.0, 1.0, 2.0],
                y: vec![0.0, 0.8, 1.0],
            },
        )
        .unwrap();
        let report = check_law(&law, 16, 1e-10);
        assert_eq!(report.entry("phi1").unwrap().status, CheckStatus::Assumed);
    }
}
