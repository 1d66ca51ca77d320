//! Stochastic gradient oracles with closed-form bias maps.
//!
//! Noise conventions:
//!
//! * `Unbiased`, `ScaledBias`: `g = k' grad F + tau sqrt(F - inf F + 1) N(0, I)`
//!   (`k' = 1` for `Unbiased`).
//! * `MultiplicativeNoise`: `g = (1 + xi) grad F + eta`, `xi ~ U[-tau, tau]`,
//!   `eta` the additive noise above.
//! * `QuantileIndicator`: `g = 1 - 1{X > theta} / (1 - mu)`, `X ~ U(0, 1)`.
//!
//! Draws are taken in a fixed order (xi first, then one normal per
//! coordinate) so that trajectories are reproducible from their seed.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscapes::{Landscape, Objective};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Unbiased,
    ScaledBias,
    MultiplicativeNoise,
    QuantileIndicator,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub kind: OracleKind,
    #[serde(default = "one")]
    pub bias_scale: f64,
    #[serde(default)]
    pub noise_level: f64,
}

/// Constants `(kappa, c, C)` of the bias/variance assumption.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConstants {
    pub kappa: f64,
    pub c: f64,
    pub c_var: f64,
}

#[derive(Clone, Debug)]
pub struct Oracle {
    land: Arc<Landscape>,
    kind: OracleKind,
    bias_scale: f64,
    noise_level: f64,
    mu: f64,
    pub constants: OracleConstants,
}

impl Oracle {
    pub fn new(land: Arc<Landscape>, spec: &OracleSpec) -> Result<Self> {
        let OracleSpec { kind, bias_scale, noise_level } = *spec;
        if !(noise_level >= 0.0 && noise_level.is_finite()) {
            return Err(Error::InvalidParam(format!("noise_level must be >= 0, got {noise_level}")));
        }
        if kind == OracleKind::ScaledBias {
            if !(bias_scale > 0.0 && bias_scale.is_finite()) {
                return Err(Error::InvalidParam(format!("bias_scale must be > 0, got {bias_scale}")));
            }
        } else if bias_scale != 1.0 {
            return Err(Error::InvalidParam(format!("bias_scale only applies to scaled_bias oracles, got {bias_scale}")));
        }
        let mut mu = f64::NAN;
        if kind == OracleKind::QuantileIndicator {
            mu = land.quantile_level().ok_or_else(|| {
                Error::InvalidParam(format!("quantile_indicator needs the quantile landscape, got {}", land.name()))
            })?;
            if noise_level != 0.0 {
                return Err(Error::InvalidParam("quantile_indicator draws its own noise; noise_level must be 0".into()));
            }
        }

        // ||grad F||^2 <= K^(2a/(1+a)) (F - inf F + 1) with K = (1+a) L^(1/a) / a.
        let alpha = land.holder.alpha;
        let k = (1.0 + alpha) * land.holder.l.powf(1.0 / alpha) / alpha;
        let grad_sq_bound = k.powf(2.0 * alpha / (1.0 + alpha));
        let m = land.dim() as f64;
        let tau2 = noise_level * noise_level;
        let constants = match kind {
            OracleKind::Unbiased => OracleConstants { kappa: 1.0, c: 1.0, c_var: grad_sq_bound + m * tau2 },
            OracleKind::ScaledBias => OracleConstants {
                kappa: bias_scale,
                c: bias_scale,
                c_var: bias_scale * bias_scale * grad_sq_bound + m * tau2,
            },
            OracleKind::MultiplicativeNoise => OracleConstants {
                kappa: 1.0,
                c: 1.0,
                c_var: (1.0 + tau2 / 3.0) * grad_sq_bound + m * tau2,
            },
            OracleKind::QuantileIndicator => {
                let r = mu / (1.0 - mu);
                OracleConstants { kappa: 1.0, c: 1.0, c_var: (r * r).max(1.0) }
            }
        };
        Ok(Self { land, kind, bias_scale, noise_level, mu, constants })
    }

    pub fn landscape(&self) -> &Arc<Landscape> {
        &self.land
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn bias_scale(&self) -> f64 {
        self.bias_scale
    }

    /// `b(theta)` from an already evaluated gradient.
    pub fn bias_from_gradient(&self, grad: &[f64], out: &mut [f64]) {
        match self.kind {
            OracleKind::ScaledBias => {
                for (o, g) in out.iter_mut().zip(grad) {
                    *o = self.bias_scale * g;
                }
            }
            _ => out.copy_from_slice(grad),
        }
    }

    pub fn bias_map(&self, theta: &[f64]) -> Vec<f64> {
        let grad = self.land.gradient(theta);
        let mut out = vec![0.0; grad.len()];
        self.bias_from_gradient(&grad, &mut out);
        out
    }

    /// One draw of `g(X, theta)` given `F(theta)` and `grad F(theta)`.
    pub fn draw<R: Rng + ?Sized>(&self, theta: &[f64], value: f64, grad: &[f64], rng: &mut R, out: &mut [f64]) {
        match self.kind {
            OracleKind::QuantileIndicator => {
                let x: f64 = rng.random();
                out[0] = if x > theta[0] { 1.0 - 1.0 / (1.0 - self.mu) } else { 1.0 };
            }
            OracleKind::Unbiased | OracleKind::ScaledBias | OracleKind::MultiplicativeNoise => {
                let scale = match self.kind {
                    OracleKind::ScaledBias => self.bias_scale,
                    OracleKind::MultiplicativeNoise => {
                        let xi = if self.noise_level > 0.0 {
                            rng.random_range(-self.noise_level..=self.noise_level)
                        } else {
                            0.0
                        };
                        1.0 + xi
                    }
                    _ => 1.0,
                };
                let sd = if self.noise_level > 0.0 {
                    self.noise_level * ((value - self.land.inf_value).max(0.0) + 1.0).sqrt()
                } else {
                    0.0
                };
                for (o, g) in out.iter_mut().zip(grad) {
                    *o = scale * g;
                    if sd > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        *o += sd * z;
                    }
                }
            }
        }
    }

    pub fn sample_gradient<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Vec<f64> {
        let value = self.land.value(theta);
        let grad = self.land.gradient(theta);
        let mut out = vec![0.0; grad.len()];
        self.draw(theta, value, &grad, rng, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::collections::BTreeMap;

    fn land(name: &str, params: &[(&str, f64)]) -> Arc<Landscape> {
        let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Arc::new(Landscape::catalog(name, &p).unwrap())
    }

    fn spec(kind: OracleKind, bias_scale: f64, noise_level: f64) -> OracleSpec {
        OracleSpec { kind, bias_scale, noise_level }
    }

    fn all_oracles() -> Vec<Oracle> {
        let mut v = Vec::new();
        for l in [
            land("quadratic", &[("dim", 2.0)]),
            land("power_well", &[]),
            land("spliced_quartic", &[]),
            land("double_well", &[]),
            land("logistic_tail", &[]),
            land("sine_trap", &[]),
        ] {
            v.push(Oracle::new(l.clone(), &spec(OracleKind::Unbiased, 1.0, 0.5)).unwrap());
            v.push(Oracle::new(l.clone(), &spec(OracleKind::ScaledBias, 0.7, 0.3)).unwrap());
            v.push(Oracle::new(l.clone(), &spec(OracleKind::MultiplicativeNoise, 1.0, 0.8)).unwrap());
        }
        for mu in [0.5, 0.8, 0.2] {
            let l = land("quantile", &[("mu", mu)]);
            v.push(Oracle::new(l, &spec(OracleKind::QuantileIndicator, 1.0, 0.0)).unwrap());
        }
        v
    }

    #[test]
    fn zero_noise_scaled_bias_is_exact() {
        let o = Oracle::new(land("quadratic", &[]), &spec(OracleKind::ScaledBias, 1.5, 0.0)).unwrap();
        assert_eq!(o.sample_gradient(&[2.0], &mut stream(1)), vec![3.0]);
        let o = Oracle::new(land("quadratic", &[("dim", 2.0)]), &spec(OracleKind::ScaledBias, 0.5, 0.0)).unwrap();
        assert_eq!(o.bias_map(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn quantile_bias_and_bound() {
        let o = Oracle::new(land("quantile", &[("mu", 0.5)]), &spec(OracleKind::QuantileIndicator, 1.0, 0.0)).unwrap();
        assert_eq!(o.bias_map(&[0.75]), vec![0.5]);
        assert_eq!(o.constants.c_var, 1.0);
        let mut rng = stream(2);
        for i in 0..1000 {
            let th = -0.5 + 2.0 * i as f64 / 1000.0;
            assert!(o.sample_gradient(&[th], &mut rng)[0].abs() <= 1.0);
        }
    }

    #[test]
    fn unbiased_mean_at_minimum() {
        let o = Oracle::new(land("quadratic", &[]), &spec(OracleKind::Unbiased, 1.0, 0.5)).unwrap();
        let mut rng = stream(3);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| o.sample_gradient(&[0.0], &mut rng)[0]).sum::<f64>() / n as f64;
        // sd of a draw is 0.5 at the minimum
        assert!(mean.abs() <= 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn bias_vanishes_at_stationary_points() {
        for o in all_oracles() {
            for p in &o.landscape().stationary_points {
                assert!(o.bias_map(p).iter().all(|x| x.abs() <= 1e-10));
            }
        }
    }

    #[test]
    fn rejects_mismatched_configuration() {
        assert!(Oracle::new(land("quadratic", &[]), &spec(OracleKind::QuantileIndicator, 1.0, 0.0)).is_err());
        assert!(Oracle::new(land("quadratic", &[]), &spec(OracleKind::ScaledBias, 0.0, 0.0)).is_err());
        assert!(Oracle::new(land("quadratic", &[]), &spec(OracleKind::Unbiased, 2.0, 0.0)).is_err());
        assert!(Oracle::new(land("quadratic", &[]), &spec(OracleKind::Unbiased, 1.0, -0.1)).is_err());
    }

    #[test]
    fn alignment_and_magnitude_hold_pointwise() {
        let mut rng = stream(4);
        for o in all_oracles() {
            let l = o.landscape();
            let k = o.constants;
            assert!(0.0 < k.kappa && k.kappa <= k.c);
            for _ in 0..10_000 {
                let th: Vec<f64> = (0..l.dim()).map(|_| rng.random_range(-10.0..10.0)).collect();
                let g = l.gradient(&th);
                let b = o.bias_map(&th);
                let gg: f64 = g.iter().map(|x| x * x).sum();
                let bg: f64 = b.iter().zip(&g).map(|(x, y)| x * y).sum();
                let bn = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(bg >= k.kappa * gg * (1.0 - 1e-12));
                assert!(bn <= k.c * gg.sqrt() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn second_moment_is_bounded() {
        let mut rng = stream(5);
        let draws = 10_000;
        for o in all_oracles() {
            let l = o.landscape();
            for _ in 0..100 {
                let th: Vec<f64> = (0..l.dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
                let m2 = (0..draws)
                    .map(|_| o.sample_gradient(&th, &mut rng).iter().map(|x| x * x).sum::<f64>())
                    .sum::<f64>()
                    / draws as f64;
                let bound = o.constants.c_var * (l.value(&th) - l.inf_value + 1.0) * (1.0 + 5.0 / (draws as f64).sqrt());
                assert!(m2 <= bound, "{} {:?}: {m2} > {bound}", l.name(), o.kind());
            }
        }
    }

    #[test]
    fn quantile_second_moment_is_one_inside_the_support() {
        // 1 - 2 * 1{X > theta}: the square is identically 1 when mu = 1/2
        let o = Oracle::new(land("quantile", &[("mu", 0.5)]), &spec(OracleKind::QuantileIndicator, 1.0, 0.0)).unwrap();
        let mut rng = stream(6);
        for i in 1..100 {
            let th = i as f64 / 100.0;
            assert_eq!(o.sample_gradient(&[th], &mut rng)[0].powi(2), 1.0);
        }
    }
}
