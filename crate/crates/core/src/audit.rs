//! Statistical estimates of the Hölder, Łojasiewicz and bias/variance
//! constants from black-box access to values, gradients and oracle draws.
//!
//! Defaults: box `[-5, 5]^m` for Hölder pairs, radius 0.5 around the
//! reference point for Łojasiewicz samples.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscapes::{norm, CertScope, Landscape, Objective};
use crate::oracles::Oracle;

pub const DEFAULT_HALF_WIDTH: f64 = 5.0;
pub const DEFAULT_RADIUS: f64 = 0.5;
const ENVELOPE_BINS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    #[serde(rename = "L_hat")]
    pub l_hat: f64,
    pub alpha_hat: f64,
    pub n_pairs: usize,
    /// Largest `|dg| - L_hat |dtheta|^alpha_hat` on the sample; `<= 0` by construction.
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LojasiewiczEstimate {
    pub beta_hat: f64,
    pub zeta_hat: f64,
    pub r2: f64,
    pub radius: f64,
    pub n_used: usize,
    pub discarded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbcEstimate {
    #[serde(rename = "C_hat")]
    pub big_c_hat: f64,
    pub kappa_hat: f64,
    pub c_hat: f64,
    pub n_points: usize,
    pub n_draws: usize,
    /// Points where the empirical bias is not aligned with the gradient.
    pub violations: usize,
    /// One entry per stationary point left out of the ratios.
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub landscape: String,
    pub holder: Option<HolderEstimate>,
    /// Sample violations of the declared `(L, alpha)`.
    pub declared_holder_violations: usize,
    pub lojasiewicz: Option<LojasiewiczEstimate>,
    pub abc: Option<AbcEstimate>,
    pub notes: Vec<String>,
}

fn unit_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r2)`.
fn ols(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Some((b, my - b * mx, r2))
}

/// Hölder exponent and constant of the gradient over `[-half_width, half_width]^m`.
///
/// Displacements are log-uniform over `[2e-3, 1] * half_width`. A plain
/// regression of `log|dg|` on `log|dtheta|` is biased by pairs where the
/// gradient barely changes, so the slope is fitted to the per-bin upper
/// envelope instead; `L_hat` then makes the fitted bound hold on every pair.
pub fn estimate_holder<R: Rng + ?Sized>(
    f: &dyn Objective,
    half_width: f64,
    n_pairs: usize,
    rng: &mut R,
) -> Result<HolderEstimate> {
    if n_pairs < 100 {
        return Err(Error::Domain(format!("n_pairs must be >= 100, got {n_pairs}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Domain(format!("half_width must be > 0, got {half_width}")));
    }
    let dim = f.dim();
    let (lo, hi) = ((2e-3 * half_width).ln(), half_width.ln());
    let mut pts = Vec::with_capacity(n_pairs);
    let (mut ga, mut gb) = (vec![0.0; dim], vec![0.0; dim]);
    for _ in 0..n_pairs {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-half_width..=half_width)).collect();
        let r = rng.random_range(lo..=hi).exp();
        let u = unit_direction(dim, rng);
        let b: Vec<f64> = a.iter().zip(&u).map(|(x, d)| x + r * d).collect();
        f.gradient_into(&a, &mut ga);
        f.gradient_into(&b, &mut gb);
        let dg = ga.iter().zip(&gb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let dt = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if dg > 0.0 && dt > 0.0 {
            pts.push((dt.ln(), dg.ln()));
        }
    }
    if pts.is_empty() {
        return Err(Error::DegenerateSample("the gradient is identical at every sampled pair".into()));
    }
    let mut envelope: Vec<Option<(f64, f64)>> = vec![None; ENVELOPE_BINS];
    for &(x, y) in &pts {
        let i = (((x - lo) / (hi - lo) * ENVELOPE_BINS as f64) as usize).min(ENVELOPE_BINS - 1);
        if envelope[i].is_none_or(|(_, best)| y > best) {
            envelope[i] = Some((x, y));
        }
    }
    let envelope: Vec<(f64, f64)> = envelope.into_iter().flatten().collect();
    if envelope.len() < 2 {
        return Err(Error::DegenerateSample("too few distinct displacement scales".into()));
    }
    let (slope, _, _) = ols(&envelope).ok_or_else(|| Error::DegenerateSample("no spread in displacements".into()))?;
    let alpha_hat = slope.clamp(1e-6, 1.0);
    let log_l = pts.iter().map(|&(x, y)| y - alpha_hat * x).fold(f64::NEG_INFINITY, f64::max);
    let l_hat = log_l.exp();
    let max_violation = pts
        .iter()
        .map(|&(x, y)| y.exp() - l_hat * (alpha_hat * x).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HolderEstimate { l_hat, alpha_hat, n_pairs, max_violation })
}

/// Łojasiewicz exponent and constant around `theta_star`.
///
/// Points sit at log-uniform distances in `[1e-4, 1] * radius`. `beta_hat` is
/// the inverse slope of `log|F - f_star|` against `log|grad F|`; `zeta_hat`
/// is the smallest constant with no violation on the sample.
pub fn estimate_lojasiewicz<R: Rng + ?Sized>(
    f: &dyn Objective,
    theta_star: &[f64],
    f_star: f64,
    radius: f64,
    n_points: usize,
    rng: &mut R,
) -> Result<LojasiewiczEstimate> {
    if n_points < 100 {
        return Err(Error::Domain(format!("n_points must be >= 100, got {n_points}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("radius must be > 0, got {radius}")));
    }
    if theta_star.len() != f.dim() {
        return Err(Error::Domain(format!("theta_star has dimension {}, expected {}", theta_star.len(), f.dim())));
    }
    let (lo, hi) = ((radius * 1e-4).ln(), radius.ln());
    let mut samples = Vec::with_capacity(n_points);
    let mut g = vec![0.0; f.dim()];
    for _ in 0..n_points {
        let r = rng.random_range(lo..=hi).exp();
        let u = unit_direction(f.dim(), rng);
        let theta: Vec<f64> = theta_star.iter().zip(&u).map(|(x, d)| x + r * d).collect();
        let gap = (f.value(&theta) - f_star).abs();
        f.gradient_into(&theta, &mut g);
        let gn = norm(&g);
        if gap > 0.0 && gn > 0.0 && gap.is_finite() && gn.is_finite() {
            samples.push((gn, gap));
        }
    }
    let discarded = n_points - samples.len();
    if 2 * discarded > n_points {
        return Err(Error::InsufficientData(format!("{discarded} of {n_points} points sit on the level set or are stationary")));
    }
    let logs: Vec<(f64, f64)> = samples.iter().map(|&(gn, gap)| (gn.ln(), gap.ln())).collect();
    let (slope, _, r2) = ols(&logs).ok_or_else(|| Error::DegenerateSample("gradient norm is constant on the sample".into()))?;
    if !(slope > 0.0) {
        return Err(Error::DegenerateSample(format!("gap does not grow with the gradient (slope {slope})")));
    }
    let beta_hat = 1.0 / slope;
    let zeta_hat = samples.iter().map(|&(gn, gap)| gap.powf(beta_hat) / gn).fold(0.0, f64::max);
    Ok(LojasiewiczEstimate { beta_hat, zeta_hat, r2, radius, n_used: samples.len(), discarded })
}

/// Empirical bias/variance constants of `orc` at the given points.
pub fn check_abc<R: Rng + ?Sized>(
    orc: &Oracle,
    theta_points: &[Vec<f64>],
    n_draws: usize,
    rng: &mut R,
) -> Result<AbcEstimate> {
    if n_draws < 1000 {
        return Err(Error::Domain(format!("n_draws must be >= 1000, got {n_draws}")));
    }
    if theta_points.is_empty() {
        return Err(Error::InsufficientData("no points to check".into()));
    }
    let land = orc.landscape();
    let dim = land.dim();
    let mut big_c_hat: f64 = 0.0;
    let mut kappa_hat = f64::INFINITY;
    let mut c_hat: f64 = 0.0;
    let mut violations = 0;
    let mut warnings = Vec::new();
    let mut draw = vec![0.0; dim];
    for theta in theta_points {
        if theta.len() != dim {
            return Err(Error::Domain(format!("point has dimension {}, expected {dim}", theta.len())));
        }
        let value = land.value(theta);
        let grad = land.gradient(theta);
        let mut mean = vec![0.0; dim];
        let mut m2 = 0.0;
        for _ in 0..n_draws {
            orc.draw(theta, value, &grad, rng, &mut draw);
            for (m, d) in mean.iter_mut().zip(&draw) {
                *m += d;
            }
            m2 += draw.iter().map(|d| d * d).sum::<f64>();
        }
        let k = n_draws as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        big_c_hat = big_c_hat.max(m2 / k / ((value - land.inf_value).max(0.0) + 1.0));
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        if gsq < 1e-24 {
            warnings.push(format!("skipped stationary point {theta:?} for kappa_hat and c_hat"));
            continue;
        }
        let kappa = mean.iter().zip(&grad).map(|(b, g)| b * g).sum::<f64>() / gsq;
        if kappa <= 0.0 {
            violations += 1;
        }
        kappa_hat = kappa_hat.min(kappa);
        c_hat = c_hat.max(norm(&mean) / gsq.sqrt());
    }
    if kappa_hat == f64::INFINITY {
        return Err(Error::InsufficientData("every point is stationary".into()));
    }
    Ok(AbcEstimate {
        big_c_hat,
        kappa_hat,
        c_hat,
        n_points: theta_points.len(),
        n_draws,
        violations,
        warnings,
    })
}

#[derive(Clone, Debug)]
pub struct AuditOptions {
    pub half_width: f64,
    pub radius: f64,
    pub n_pairs: usize,
    pub n_points: usize,
    pub n_draws: usize,
    pub abc_points: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            half_width: DEFAULT_HALF_WIDTH,
            radius: DEFAULT_RADIUS,
            n_pairs: 20_000,
            n_points: 2_000,
            n_draws: 10_000,
            abc_points: 16,
        }
    }
}

/// Runs every estimator that applies to the oracle's landscape.
pub fn audit<R: Rng + ?Sized>(orc: &Oracle, opts: &AuditOptions, rng: &mut R) -> Result<AuditReport> {
    let land: &Landscape = orc.landscape();
    let mut notes = Vec::new();
    let holder = match estimate_holder(land, opts.half_width, opts.n_pairs, rng) {
        Ok(h) => Some(h),
        Err(e @ Error::DegenerateSample(_)) => {
            notes.push(format!("holder: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let declared_holder_violations = land.holder_violations(opts.n_pairs, opts.half_width, rng);

    let lojasiewicz = match land.certs.first() {
        None => {
            notes.push("lojasiewicz: no stationary point to audit around".into());
            None
        }
        Some(cert) => {
            let (point, radius) = match &cert.scope {
                CertScope::LocalAt { point, radius } => (point.clone(), opts.radius.min(*radius)),
                CertScope::Global => (land.stationary_points[0].clone(), opts.radius),
            };
            notes.push(format!("lojasiewicz: sampled within radius {radius} of {point:?}"));
            Some(estimate_lojasiewicz(land, &point, cert.reference_level, radius, opts.n_points, rng)?)
        }
    };

    // Grid over the box, stepping around stationary points
    let points: Vec<Vec<f64>> = match land.quantile_level() {
        Some(mu) => (1..=opts.abc_points)
            .map(|i| i as f64 / (opts.abc_points + 1) as f64)
            .filter(|t| (t - mu).abs() > 0.05)
            .map(|t| vec![t])
            .collect(),
        None => (0..opts.abc_points)
            .map(|i| {
                let t = -opts.half_width + 2.0 * opts.half_width * (i as f64 + 0.5) / opts.abc_points as f64;
                vec![t; land.dim()]
            })
            .collect(),
    };
    let abc = Some(check_abc(orc, &points, opts.n_draws, rng)?);
    Ok(AuditReport {
        landscape: land.name().to_string(),
        holder,
        declared_holder_violations,
        lojasiewicz,
        abc,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{OracleKind, OracleSpec};
    use crate::rng::stream;
    use std::sync::Arc;

    fn land(name: &str, params: &[(&str, f64)]) -> Landscape {
        let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Landscape::catalog(name, &p).unwrap()
    }

    struct Scaled<'a>(&'a Landscape, f64);

    impl Objective for Scaled<'_> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, theta: &[f64]) -> f64 {
            self.1 * self.0.value(theta)
        }
        fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
            self.0.gradient_into(theta, out);
            out.iter_mut().for_each(|g| *g *= self.1);
        }
    }

    struct Affine;

    impl Objective for Affine {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, theta: &[f64]) -> f64 {
            3.0 * theta[0] - theta[1]
        }
        fn gradient_into(&self, _: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[3.0, -1.0]);
        }
    }

    #[test]
    fn holder_on_quadratic_is_exact() {
        let h = estimate_holder(&land("quadratic", &[("dim", 3.0)]), 5.0, 2000, &mut stream(1)).unwrap();
        assert!((h.alpha_hat - 1.0).abs() < 1e-9);
        assert!(h.l_hat >= 1.0 - 1e-9 && h.l_hat <= 1.05);
        assert!(h.max_violation <= 1e-12);
    }

    #[test]
    fn holder_on_power_well() {
        let h = estimate_holder(&land("power_well", &[("q", 1.5)]), 5.0, 20_000, &mut stream(2)).unwrap();
        assert!((h.alpha_hat - 0.5).abs() < 0.05, "{h:?}");
        // extremal pairs straddle 0: |dg| = 1.5 * 2 (r/2)^0.5; L_hat moves with alpha_hat
        let declared = 1.5 * 2f64.sqrt();
        assert!(h.l_hat > 0.5 * declared && h.l_hat < 1.5 * declared, "{h:?}");
    }

    #[test]
    fn affine_is_degenerate() {
        assert!(matches!(estimate_holder(&Affine, 5.0, 500, &mut stream(3)), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn lojasiewicz_on_quadratic() {
        let l = land("quadratic", &[("dim", 2.0)]);
        let e = estimate_lojasiewicz(&l, &[0.0, 0.0], 0.0, 0.5, 500, &mut stream(4)).unwrap();
        assert!((e.beta_hat - 0.5).abs() < 0.005);
        assert!((e.zeta_hat - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(e.r2 > 0.999);
    }

    #[test]
    fn lojasiewicz_on_quartic_and_double_well() {
        let e = estimate_lojasiewicz(&land("spliced_quartic", &[]), &[0.0], 0.0, 0.5, 1000, &mut stream(5)).unwrap();
        assert!(e.beta_hat >= 0.73 && e.beta_hat <= 0.77, "{e:?}");
        let e = estimate_lojasiewicz(&land("double_well", &[]), &[1.0], 0.0, 0.2, 1000, &mut stream(6)).unwrap();
        assert!((e.beta_hat - 0.5).abs() < 0.02, "{e:?}");
    }

    #[test]
    fn lojasiewicz_is_scale_consistent() {
        let base = land("spliced_quartic", &[]);
        let e1 = estimate_lojasiewicz(&base, &[0.0], 0.0, 0.5, 400, &mut stream(7)).unwrap();
        for lambda in [0.1, 3.0, 40.0] {
            let e2 = estimate_lojasiewicz(&Scaled(&base, lambda), &[0.0], 0.0, 0.5, 400, &mut stream(7)).unwrap();
            assert!((e1.beta_hat - e2.beta_hat).abs() < 1e-9);
            // |lambda F|^b / |lambda grad F| = lambda^(b - 1) |F|^b / |grad F|
            let expect = e1.zeta_hat * lambda.powf(e1.beta_hat - 1.0);
            assert!((e2.zeta_hat / expect - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lojasiewicz_discards_flat_points() {
        let flat = Scaled(&land("quadratic", &[]), 0.0);
        assert!(matches!(
            estimate_lojasiewicz(&flat, &[0.0], 0.0, 0.5, 200, &mut stream(8)),
            Err(Error::InsufficientData(_))
        ));
    }

    fn oracle(name: &str, kind: OracleKind, bias_scale: f64, noise: f64) -> Oracle {
        Oracle::new(Arc::new(land(name, &[])), &OracleSpec { kind, bias_scale, noise_level: noise }).unwrap()
    }

    #[test]
    fn abc_on_quantile_indicator() {
        let orc = oracle("quantile", OracleKind::QuantileIndicator, 1.0, 0.0);
        let pts: Vec<Vec<f64>> = [0.05, 0.15, 0.25, 0.3, 0.7, 0.75, 0.85, 0.95].iter().map(|&t| vec![t]).collect();
        let n = 100_000;
        let a = check_abc(&orc, &pts, n, &mut stream(9)).unwrap();
        // E[g^2] = 1 exactly when mu = 1/2
        assert!(a.big_c_hat <= 1.0 + 4.0 / (n as f64).sqrt());
        assert!((a.kappa_hat - 1.0).abs() < 0.05 && (a.c_hat - 1.0).abs() < 0.05, "{a:?}");
        assert_eq!(a.violations, 0);
    }

    #[test]
    fn abc_noise_free_scaled_bias_is_exact() {
        let orc = oracle("quadratic", OracleKind::ScaledBias, 1.5, 0.0);
        let pts: Vec<Vec<f64>> = vec![vec![-2.0], vec![0.0], vec![0.5], vec![3.0]];
        let a = check_abc(&orc, &pts, 1000, &mut stream(10)).unwrap();
        assert!((a.kappa_hat - 1.5).abs() < 1e-12 && (a.c_hat - 1.5).abs() < 1e-12);
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn abc_unbiased_noise_free_respects_gradient_bound() {
        // |grad F|^2 <= 2 L (F - inf F) when alpha = 1
        let orc = oracle("sine_trap", OracleKind::Unbiased, 1.0, 0.0);
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![-5.0 + 0.5 * i as f64 + 0.1]).collect();
        let a = check_abc(&orc, &pts, 1000, &mut stream(11)).unwrap();
        assert!(a.big_c_hat <= 2.0 * 3.0);
    }

    #[test]
    fn full_audit_report_serializes() {
        let orc = oracle("double_well", OracleKind::Unbiased, 1.0, 0.2);
        let opts = AuditOptions { n_pairs: 2000, n_points: 500, n_draws: 2000, ..Default::default() };
        let rep = audit(&orc, &opts, &mut stream(12)).unwrap();
        assert_eq!(rep.declared_holder_violations, 0);
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["holder"]["L_hat"].is_f64() && json["abc"]["C_hat"].is_f64());
        let l = rep.lojasiewicz.unwrap();
        assert!(l.r2 >= 0.0 && l.r2 <= 1.0);
    }
}
