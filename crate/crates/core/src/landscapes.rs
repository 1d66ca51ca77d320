//! Closed-form loss landscapes with certified assumption constants.
//!
//! Every catalog entry carries its Hölder data `(L, alpha)`, the infimum of
//! the objective, a coercivity flag, the known stationary points and one
//! Łojasiewicz certificate per scope region. Landscapes are immutable once
//! built and can be shared freely between worker threads.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Black-box access to a differentiable objective.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient_into(&self, theta: &[f64], out: &mut [f64]);

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(theta, &mut g);
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderData {
    pub l: f64,
    pub alpha: f64,
}

impl HolderData {
    pub fn new(l: f64, alpha: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParam(format!("Hölder constant L must be > 0, got {l}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParam(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
        }
        Ok(Self { l, alpha })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertScope {
    Global,
    LocalAt { point: Vec<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LojasiewiczCert {
    pub beta: f64,
    pub zeta: f64,
    pub scope: CertScope,
    /// `F(theta_star)` for the certified point; `inf F` for global certificates.
    pub reference_level: f64,
}

impl LojasiewiczCert {
    pub fn contains(&self, theta: &[f64]) -> bool {
        match &self.scope {
            CertScope::Global => true,
            CertScope::LocalAt { point, radius } => distance(point, theta) <= *radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Family {
    Quadratic,
    PowerWell { q: f64 },
    SplicedQuartic,
    DoubleWell,
    LogisticTail,
    Quantile { mu: f64 },
    SineTrap { a: f64 },
}

pub const CATALOG_NAMES: [&str; 7] = [
    "quadratic",
    "power_well",
    "spliced_quartic",
    "double_well",
    "logistic_tail",
    "quantile",
    "sine_trap",
];

/// Default half-width of the box used for statistical checks and for the
/// numerically certified region of spliced landscapes.
pub const DEFAULT_BOX: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct Landscape {
    name: String,
    family: Family,
    dim: usize,
    pub holder: HolderData,
    pub inf_value: f64,
    pub coercive: bool,
    pub certs: Vec<LojasiewiczCert>,
    pub stationary_points: Vec<Vec<f64>>,
    /// The infimum is only approached as `|theta| -> inf`.
    pub inf_at_infinity: bool,
}

fn take_param(
    params: &mut BTreeMap<String, f64>,
    key: &str,
    default: f64,
) -> f64 {
    params.remove(key).unwrap_or(default)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Largest ratio `|F - level|^beta / |F'|` over a 1-D grid around `center`,
/// mixing log-spaced and uniform offsets up to `radius`. Inflated by 1e-9
/// relative so that off-grid points inherit the certificate.
fn sup_ratio_1d(
    value: impl Fn(f64) -> f64,
    deriv: impl Fn(f64) -> f64,
    center: f64,
    level: f64,
    beta: f64,
    radius: f64,
) -> f64 {
    const LOG_POINTS: usize = 50_000;
    const LIN_POINTS: usize = 50_000;
    let mut sup: f64 = 0.0;
    let mut visit = |r: f64| {
        for t in [center - r, center + r] {
            let g = deriv(t).abs();
            if g > 0.0 {
                sup = sup.max((value(t) - level).abs().powf(beta) / g);
            }
        }
    };
    let lo = (radius * 1e-8).ln();
    let hi = radius.ln();
    for i in 0..=LOG_POINTS {
        visit((lo + (hi - lo) * i as f64 / LOG_POINTS as f64).exp());
    }
    for i in 1..=LIN_POINTS {
        visit(radius * i as f64 / LIN_POINTS as f64);
    }
    sup * (1.0 + 1e-9)
}

impl Landscape {
    /// Builds a certified landscape from the catalog.
    ///
    /// Recognised parameters per family (all optional):
    /// `quadratic{dim}`, `power_well{q}`, `spliced_quartic{box}`,
    /// `double_well{radius}`, `quantile{mu}`, `sine_trap{a}`.
    pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut p = params.clone();
        let land = match name {
            "quadratic" => {
                let dim = take_param(&mut p, "dim", 1.0);
                if dim < 1.0 || dim.fract() != 0.0 || dim > 1e6 {
                    return Err(Error::InvalidParam(format!("quadratic: dim must be a positive integer, got {dim}")));
                }
                let dim = dim as usize;
                Self {
                    name: name.into(),
                    family: Family::Quadratic,
                    dim,
                    holder: HolderData::new(1.0, 1.0)?,
                    inf_value: 0.0,
                    coercive: true,
                    certs: vec![LojasiewiczCert {
                        beta: 0.5,
                        zeta: std::f64::consts::FRAC_1_SQRT_2,
                        scope: CertScope::Global,
                        reference_level: 0.0,
                    }],
                    stationary_points: vec![vec![0.0; dim]],
                    inf_at_infinity: false,
                }
            }
            "power_well" => {
                let q = take_param(&mut p, "q", 1.5);
                if !(q > 1.0 && q <= 2.0) {
                    return Err(Error::InvalidParam(format!(
                        "power_well: q must lie in (1, 2] (q > 2 breaks global Hölder continuity of the gradient), got {q}"
                    )));
                }
                let alpha = q - 1.0;
                // Opposite-sign pairs are the extremal case: |t|^a + |s|^a <= 2^(1-a) |t - s|^a.
                let l = q * 2f64.powf(1.0 - alpha);
                Self {
                    name: name.into(),
                    family: Family::PowerWell { q },
                    dim: 1,
                    holder: HolderData::new(l, alpha)?,
                    inf_value: 0.0,
                    coercive: true,
                    certs: vec![LojasiewiczCert {
                        beta: (q - 1.0) / q,
                        zeta: 1.0 / q,
                        scope: CertScope::Global,
                        reference_level: 0.0,
                    }],
                    stationary_points: vec![vec![0.0]],
                    inf_at_infinity: false,
                }
            }
            "spliced_quartic" => {
                let half_width = take_param(&mut p, "box", DEFAULT_BOX);
                if !(half_width >= 1.0 && half_width.is_finite()) {
                    return Err(Error::InvalidParam(format!("spliced_quartic: box must be >= 1, got {half_width}")));
                }
                let mut land = Self {
                    name: name.into(),
                    family: Family::SplicedQuartic,
                    dim: 1,
                    holder: HolderData::new(12.0, 1.0)?,
                    inf_value: 0.0,
                    coercive: true,
                    certs: Vec::new(),
                    stationary_points: vec![vec![0.0]],
                    inf_at_infinity: false,
                };
                // Quadratic growth outside the core rules out a beta = 3/4
                // certificate on all of R, so it is certified on [-box, box].
                let zeta = sup_ratio_1d(
                    |t| land.value(&[t]),
                    |t| land.gradient(&[t])[0],
                    0.0,
                    0.0,
                    0.75,
                    half_width,
                );
                land.certs.push(LojasiewiczCert {
                    beta: 0.75,
                    zeta,
                    scope: CertScope::LocalAt { point: vec![0.0], radius: half_width },
                    reference_level: 0.0,
                });
                land
            }
            "double_well" => {
                let radius = take_param(&mut p, "radius", 0.5);
                if !(radius > 0.0 && radius < 1.0) {
                    return Err(Error::InvalidParam(format!("double_well: radius must lie in (0, 1), got {radius}")));
                }
                let mut land = Self {
                    name: name.into(),
                    family: Family::DoubleWell,
                    dim: 1,
                    holder: HolderData::new(44.0, 1.0)?,
                    inf_value: 0.0,
                    coercive: true,
                    certs: Vec::new(),
                    stationary_points: vec![vec![-1.0], vec![0.0], vec![1.0]],
                    inf_at_infinity: false,
                };
                for center in [-1.0, 0.0, 1.0] {
                    let level = land.value(&[center]);
                    let zeta = sup_ratio_1d(
                        |t| land.value(&[t]),
                        |t| land.gradient(&[t])[0],
                        center,
                        level,
                        0.5,
                        radius,
                    );
                    land.certs.push(LojasiewiczCert {
                        beta: 0.5,
                        zeta,
                        scope: CertScope::LocalAt { point: vec![center], radius },
                        reference_level: level,
                    });
                }
                land
            }
            "logistic_tail" => Self {
                name: name.into(),
                family: Family::LogisticTail,
                dim: 1,
                holder: HolderData::new(0.25, 1.0)?,
                inf_value: 0.0,
                coercive: false,
                certs: Vec::new(),
                stationary_points: Vec::new(),
                inf_at_infinity: true,
            },
            "quantile" => {
                let mu = take_param(&mut p, "mu", 0.5);
                if !(mu > 0.0 && mu < 1.0) {
                    return Err(Error::InvalidParam(format!("quantile: mu must lie in (0, 1), got {mu}")));
                }
                // X ~ Uniform(0, 1): ||f_X||_inf = 1.
                let l = 1.0 / (1.0 - mu);
                Self {
                    name: name.into(),
                    family: Family::Quantile { mu },
                    dim: 1,
                    holder: HolderData::new(l, 1.0)?,
                    inf_value: (1.0 + mu) / 2.0,
                    coercive: true,
                    certs: vec![LojasiewiczCert {
                        beta: 0.5,
                        zeta: ((1.0 - mu) / 2.0).sqrt(),
                        scope: CertScope::LocalAt {
                            point: vec![mu],
                            radius: mu.min(1.0 - mu),
                        },
                        reference_level: (1.0 + mu) / 2.0,
                    }],
                    stationary_points: vec![vec![mu]],
                    inf_at_infinity: false,
                }
            }
            "sine_trap" => {
                let a = take_param(&mut p, "a", 1.0);
                if !(a > 0.0 && a < 2.0) {
                    return Err(Error::InvalidParam(format!("sine_trap: a must lie in (0, 2), got {a}")));
                }
                // F'' = 2 + a cos(theta) >= 2 - a > 0: strongly convex, so PL holds globally.
                Self {
                    name: name.into(),
                    family: Family::SineTrap { a },
                    dim: 1,
                    holder: HolderData::new(2.0 + a, 1.0)?,
                    inf_value: 0.0,
                    coercive: true,
                    certs: vec![LojasiewiczCert {
                        beta: 0.5,
                        zeta: 1.0 / (2.0 * (2.0 - a)).sqrt(),
                        scope: CertScope::Global,
                        reference_level: 0.0,
                    }],
                    stationary_points: vec![vec![0.0]],
                    inf_at_infinity: false,
                }
            }
            other => return Err(Error::Catalog(other.to_string())),
        };
        if let Some(key) = p.keys().next() {
            return Err(Error::InvalidParam(format!("{name}: unknown parameter `{key}`")));
        }
        Ok(land)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The level `mu` of a quantile landscape.
    pub fn quantile_level(&self) -> Option<f64> {
        match self.family {
            Family::Quantile { mu } => Some(mu),
            _ => None,
        }
    }

    /// Distinct critical levels among the listed stationary points.
    pub fn critical_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = self.stationary_points.iter().map(|p| self.value(p)).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        levels
    }

    pub fn nearest_stationary(&self, theta: &[f64]) -> Option<&[f64]> {
        self.stationary_points
            .iter()
            .min_by(|a, b| distance(a, theta).total_cmp(&distance(b, theta)))
            .map(Vec::as_slice)
    }

    /// `zeta * ||grad F(theta)|| - |F(theta) - reference_level|^beta`.
    pub fn lojasiewicz_residual(&self, cert_index: usize, theta: &[f64]) -> Result<f64> {
        let cert = self.certs.get(cert_index).ok_or_else(|| {
            Error::Domain(format!("{} has no certificate #{cert_index}", self.name))
        })?;
        if theta.len() != self.dim {
            return Err(Error::Domain(format!("expected a point of dimension {}, got {}", self.dim, theta.len())));
        }
        if !cert.contains(theta) {
            return Err(Error::OutOfScope(format!("{theta:?} is outside certificate #{cert_index} of {}", self.name)));
        }
        let g = norm(&self.gradient(theta));
        Ok(cert.zeta * g - (self.value(theta) - cert.reference_level).abs().powf(cert.beta))
    }

    /// Counts pairs in `[-half_width, half_width]^m` violating
    /// `||grad F(a) - grad F(b)|| <= L ||a - b||^alpha` (1e-12 relative slack).
    pub fn holder_violations<R: Rng + ?Sized>(&self, n_pairs: usize, half_width: f64, rng: &mut R) -> usize {
        let HolderData { l, alpha } = self.holder;
        let mut a = vec![0.0; self.dim];
        let mut b = vec![0.0; self.dim];
        let mut ga = vec![0.0; self.dim];
        let mut gb = vec![0.0; self.dim];
        let mut violations = 0;
        for _ in 0..n_pairs {
            for i in 0..self.dim {
                a[i] = rng.random_range(-half_width..=half_width);
                b[i] = rng.random_range(-half_width..=half_width);
            }
            self.gradient_into(&a, &mut ga);
            self.gradient_into(&b, &mut gb);
            let lhs = distance(&ga, &gb);
            let rhs = l * distance(&a, &b).powf(alpha);
            // rounding slack scales with the gradient magnitudes being subtracted
            let slack = 1e-12 * (1.0 + norm(&ga) + norm(&gb));
            if lhs > rhs + slack {
                violations += 1;
            }
        }
        violations
    }
}

impl Objective for Landscape {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let t = theta[0];
        match self.family {
            Family::Quadratic => 0.5 * theta.iter().map(|x| x * x).sum::<f64>(),
            Family::PowerWell { q } => t.abs().powf(q),
            Family::SplicedQuartic => {
                let a = t.abs();
                if a <= 1.0 {
                    t.powi(4)
                } else {
                    let u = a - 1.0;
                    6.0 * u * u + 4.0 * u + 1.0
                }
            }
            Family::DoubleWell => {
                let a = t.abs();
                if a <= 2.0 {
                    let w = t * t - 1.0;
                    w * w
                } else {
                    let u = a - 2.0;
                    9.0 + 24.0 * u + 22.0 * u * u
                }
            }
            Family::LogisticTail => softplus(-t),
            Family::Quantile { mu } => {
                // F(t) = t + E[(X - t)^+] / (1 - mu) with X ~ U(0, 1).
                let excess = if t <= 0.0 {
                    0.5 - t
                } else if t >= 1.0 {
                    0.0
                } else {
                    0.5 * (1.0 - t) * (1.0 - t)
                };
                t + excess / (1.0 - mu)
            }
            Family::SineTrap { a } => t * t + a * (1.0 - t.cos()),
        }
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let t = theta[0];
        match self.family {
            Family::Quadratic => out.copy_from_slice(theta),
            Family::PowerWell { q } => out[0] = q * t.signum() * t.abs().powf(q - 1.0) * (t != 0.0) as u8 as f64,
            Family::SplicedQuartic => {
                let a = t.abs();
                out[0] = if a <= 1.0 {
                    4.0 * t * t * t
                } else {
                    t.signum() * (12.0 * (a - 1.0) + 4.0)
                };
            }
            Family::DoubleWell => {
                let a = t.abs();
                out[0] = if a <= 2.0 {
                    4.0 * t * (t * t - 1.0)
                } else {
                    t.signum() * (24.0 + 44.0 * (a - 2.0))
                };
            }
            // d/dt ln(1 + e^-t) = -1 / (1 + e^t)
            Family::LogisticTail => {
                out[0] = if t >= 0.0 {
                    let e = (-t).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + t.exp())
                };
            }
            Family::Quantile { mu } => out[0] = (t.clamp(0.0, 1.0) - mu) / (1.0 - mu),
            Family::SineTrap { a } => out[0] = 2.0 * t + a * t.sin(),
        }
    }
}
