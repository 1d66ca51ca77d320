//! Predicted convergence exponents, iteration budgets, log-log slope fits
//! and ensemble quantiles.
//!
//! Regimes:
//!
//! * `LocalA`: Łojasiewicz inequality with constants `(beta, zeta)` on a sublevel set
//!   containing the limit set with probability `1 - delta`.
//! * `LocalB`: the same with `zeta = 1` (no constant).
//! * `Unified`: a single exponent `beta in (0, 1]` valid around every critical point.
//! * `Global`: the inequality holds on all of `R^m` with reference level `inf F`.
//!
//! Predicted rates are upper bounds with unknown constants, so empirical
//! checks are one-sided: a fitted slope passes when it is at least as steep
//! as the prediction, up to a tolerance.

use serde::{Deserialize, Serialize};

use crate::engine::{Ensemble, Record};
use crate::error::{Error, Result};
use crate::schedules::{Family, H6Regime, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LocalA,
    LocalB,
    Unified,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `inf_{k<=n} F(theta_k) - F_star`
    MinFGap,
    /// `F(theta_n) - F_star`
    FGap,
    /// `inf_{k<=n} ||grad F(theta_k)||^2`
    MinGradSq,
    /// `||theta_n - theta_star||`
    IterateGap,
}

/// Variable the rate decays in: `value ~ base^-exponent`, where the base is
/// `1/gamma_n`, `sum_{k<=n} gamma_k`, `n` or `ln n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    GammaN,
    SumGamma,
    N,
    LogN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideCondition {
    pub description: String,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedRate {
    pub regime: Regime,
    pub quantity: Quantity,
    pub base: Base,
    pub exponent: f64,
    pub side_conditions: Vec<SideCondition>,
    pub valid: bool,
    /// `sigma` used for iterate rates.
    pub sigma: Option<f64>,
    /// Smallest admissible `sigma` for iterate rates.
    pub sigma_min: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub beta: f64,
    pub zeta: f64,
    pub kappa: f64,
}

impl Default for ProblemConstants {
    fn default() -> Self {
        Self { alpha: 1.0, l: 1.0, beta: 0.5, zeta: 1.0, kappa: 1.0 }
    }
}

struct Conditions(Vec<SideCondition>);

impl Conditions {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn check(&mut self, satisfied: bool, description: impl Into<String>) {
        self.0.push(SideCondition { description: description.into(), satisfied });
    }

    fn all(&self) -> bool {
        self.0.iter().all(|c| c.satisfied)
    }
}

fn finish(
    regime: Regime,
    quantity: Quantity,
    base: Base,
    exponent: f64,
    mut conds: Conditions,
    sigma: Option<f64>,
    sigma_min: Option<f64>,
) -> PredictedRate {
    let positive = exponent > 0.0 && exponent.is_finite();
    if !positive {
        conds.check(false, format!("predicted exponent {exponent} must be positive and finite"));
    }
    let valid = conds.all();
    PredictedRate { regime, quantity, base, exponent, side_conditions: conds.0, valid, sigma, sigma_min }
}

/// `1/(2b-1) ^ (a rho - 1) ^ (rho - 1)/2` for local/unified regimes,
/// `1/(2b-1) ^ (a rho - 1)` for the global one.
pub fn r_exponent(alpha: f64, beta: f64, rho: f64, regime: Regime) -> f64 {
    let mut r = (1.0 / (2.0 * beta - 1.0)).min(alpha * rho - 1.0);
    if regime != Regime::Global {
        r = r.min((rho - 1.0) / 2.0);
    }
    r
}

/// `kappa gamma_star` threshold of the global regime with `beta <= 1/2`.
pub fn global_threshold(k: &ProblemConstants) -> f64 {
    let ProblemConstants { alpha, l, beta, zeta, .. } = *k;
    let lambda = if beta < 0.5 { (1.0 - 2.0 * beta) / ((1.0 + alpha) / alpha * beta - 1.0) } else { 0.0 };
    let big_k = (1.0 + alpha) * l.powf(1.0 / alpha) / alpha;
    zeta.powf(2.0 + lambda * (1.0 + alpha) / alpha) * big_k.powf(lambda) * alpha
}

fn basic_conditions(conds: &mut Conditions, k: &ProblemConstants, regime: Regime) {
    let ProblemConstants { alpha, beta, .. } = *k;
    conds.check(alpha > 0.0 && alpha <= 1.0, format!("alpha = {alpha} in (0, 1]"));
    conds.check(k.zeta > 0.0 && k.kappa > 0.0 && k.l > 0.0, "zeta, kappa, L > 0");
    match regime {
        Regime::Unified => conds.check(beta > 0.0 && beta <= 1.0, format!("beta = {beta} in (0, 1]")),
        Regime::Global => {
            let lo = alpha / (1.0 + alpha);
            conds.check(
                (beta > lo && beta < 1.0) || beta == 0.5,
                format!("beta = {beta} in (alpha/(1+alpha), 1) or beta = 1/2 (alpha/(1+alpha) = {lo})"),
            );
        }
        _ => conds.check(beta > 0.0 && beta < 1.0, format!("beta = {beta} in (0, 1)")),
    }
}

fn schedule_conditions(conds: &mut Conditions, sch: &Schedule, alpha: f64, rho: f64) {
    let rep = sch.validate(alpha, rho);
    conds.check(rep.h3_ok, "sum gamma_n = inf and sum gamma_n^(1+alpha) < inf");
    conds.check(rep.h6_regime != H6Regime::Neither, "ln(gamma_{n-1}/gamma_n) = o(gamma_n) or ~ gamma_n/gamma_star");
    conds.check(rep.rho_admissible, format!("gamma_n = O((sum gamma)^-rho) with rho = {rho} <= {}", rep.max_rho));
    conds.check(rep.rho_above_inverse_alpha, format!("rho = {rho} > 1/alpha = {}", 1.0 / alpha));
}

/// Rate of `F(theta_n) - F_star` (`FGap`).
pub fn predict_fvalue_rate(k: &ProblemConstants, sch: &Schedule, rho: f64, regime: Regime) -> PredictedRate {
    let ProblemConstants { alpha, beta, zeta, kappa, .. } = *k;
    let mut conds = Conditions::new();
    basic_conditions(&mut conds, k, regime);
    schedule_conditions(&mut conds, sch, alpha, rho);
    let ib = sch.h6_regime() == H6Regime::Ib;
    let kg = kappa * sch.gamma_star().unwrap_or(f64::NAN);

    let small_beta = beta <= 0.5;
    let (base, exponent) = if regime == Regime::Global {
        if small_beta {
            if ib {
                let th = global_threshold(k);
                conds.check(kg > th, format!("kappa gamma_star = {kg} > {th}"));
            }
            (Base::GammaN, alpha)
        } else {
            (Base::SumGamma, r_exponent(alpha, beta, rho, regime))
        }
    } else if small_beta {
        if ib {
            let th = if regime == Regime::LocalA { zeta.powf(1.0 / beta) * alpha.max(0.5) } else { alpha.max(0.5) };
            conds.check(kg > th, format!("kappa gamma_star = {kg} > {th}"));
        }
        (Base::GammaN, alpha.min(0.5))
    } else {
        (Base::SumGamma, r_exponent(alpha, beta, rho, regime))
    };
    finish(regime, Quantity::FGap, base, exponent, conds, None, None)
}

/// Rate of `inf_{k<=n} F(theta_k) - F_star` (`MinFGap`).
pub fn predict_min_fvalue_rate(k: &ProblemConstants, sch: &Schedule, regime: Regime) -> PredictedRate {
    let ProblemConstants { alpha, beta, .. } = *k;
    let mut conds = Conditions::new();
    basic_conditions(&mut conds, k, regime);
    if regime == Regime::Global {
        // beta = alpha/(1+alpha) is allowed for the running minimum
        let lo = alpha / (1.0 + alpha);
        conds.0.retain(|c| !c.description.starts_with("beta"));
        conds.check(beta >= lo && beta < 1.0, format!("beta = {beta} in [alpha/(1+alpha), 1)"));
    }
    let rep = sch.validate(alpha, f64::INFINITY);
    conds.check(rep.h3_ok, "sum gamma_n = inf and sum gamma_n^(1+alpha) < inf");
    let exponent = if regime == Regime::Global { 1.0 / (2.0 * beta) } else { (1.0 / (2.0 * beta)).min(1.0) };
    finish(regime, Quantity::MinFGap, Base::SumGamma, exponent, conds, None, None)
}

/// Rate of `inf_{k<=n} ||grad F(theta_k)||^2`: `O((sum gamma)^-1)`, over `n`
/// (`s < 1`) or `ln n` (`s = 1`) for polynomial schedules.
pub fn predict_min_gradsq_rate(sch: &Schedule) -> PredictedRate {
    let mut conds = Conditions::new();
    let rep = sch.validate(1.0, f64::INFINITY);
    conds.check(rep.h6ii_ok, "sum gamma_n = inf");
    let (base, exponent) = match sch.family() {
        Family::Poly if sch.s() < 1.0 => (Base::N, 1.0 - sch.s()),
        Family::Poly if sch.s() == 1.0 => (Base::LogN, 1.0),
        _ => (Base::SumGamma, 1.0),
    };
    finish(Regime::Unified, Quantity::MinGradSq, base, exponent, conds, None, None)
}

/// Rate of `||theta_n - theta_star||` for polynomial schedules.
pub fn predict_iterate_rate(
    k: &ProblemConstants,
    sch: &Schedule,
    rho: f64,
    sigma: Option<f64>,
    regime: Regime,
) -> PredictedRate {
    let ProblemConstants { alpha, beta, zeta, kappa, .. } = *k;
    let s = sch.s();
    let mut conds = Conditions::new();
    basic_conditions(&mut conds, k, regime);
    schedule_conditions(&mut conds, sch, alpha, rho);
    conds.check(regime != Regime::Unified, "iterate rates cover the local and global regimes only");
    conds.check(sch.family() == Family::Poly, "iterate rates need gamma_n = Theta(1/n^s)");
    conds.check(rho > 3.0f64.max(2.0 / alpha), format!("rho = {rho} > 3 v 2/alpha"));
    let s_lo = if rho.is_infinite() { 1.0 } else { rho / (1.0 + rho) };
    conds.check(s >= s_lo && s <= 1.0, format!("s = {s} in [rho/(1+rho), 1] = [{s_lo}, 1]"));
    let kg = kappa * sch.gamma_star().unwrap_or(f64::NAN);
    if s == 1.0 {
        let th = alpha.max(0.5);
        conds.check(kg > th, format!("kappa gamma_star = {kg} > 1/2 v alpha = {th}"));
    }

    let t1 = 1.0 / (2.0 * (2.0 * s - 1.0));
    let t2 = alpha * s / (2.0 * ((1.0 + alpha) * s - 1.0));
    let common = ((2.0 * s - 1.0) / 2.0).min((1.0 + alpha) * s - 1.0);
    let r = r_exponent(alpha, beta, rho, regime);
    let (base, raw, sigma_min) = if beta <= 0.5 {
        if s == 1.0 {
            if regime == Regime::LocalA {
                let th = zeta.powf(1.0 / beta) * alpha.max(0.5);
                conds.check(kg > th, format!("kappa gamma_star = {kg} > {th}"));
            } else if regime == Regime::Global {
                let th = global_threshold(k);
                conds.check(kg > th, format!("kappa gamma_star = {kg} > {th}"));
            }
        }
        if regime == Regime::Global {
            (Base::N, (alpha * s).min(common), t1.max(t2))
        } else {
            let a = alpha.min(0.5);
            let t3 = (1.0 - (1.0 - alpha).max(0.5) * s) / (2.0 * a * s);
            (Base::N, (a * s).min(common), t1.max(t2).max(t3))
        }
    } else {
        conds.check(r > 1.0, format!("r = {r} > 1"));
        let t4 = (1.0 + r) / (2.0 * r);
        if s < 1.0 {
            (Base::N, (r * (1.0 - s)).min(common), t1.max(t2).max(t4))
        } else {
            (Base::LogN, r, t4)
        }
    };
    let used = sigma.unwrap_or(sigma_min);
    conds.check(
        used >= sigma_min && used < 1.0,
        format!("sigma = {used} in [{sigma_min}, 1)"),
    );
    finish(regime, Quantity::IterateGap, base, raw * (1.0 - used), conds, Some(used), Some(sigma_min))
}

pub fn predict(
    quantity: Quantity,
    k: &ProblemConstants,
    sch: &Schedule,
    rho: f64,
    sigma: Option<f64>,
    regime: Regime,
) -> PredictedRate {
    match quantity {
        Quantity::FGap => predict_fvalue_rate(k, sch, rho, regime),
        Quantity::MinFGap => predict_min_fvalue_rate(k, sch, regime),
        Quantity::MinGradSq => predict_min_gradsq_rate(sch),
        Quantity::IterateGap => predict_iterate_rate(k, sch, rho, sigma, regime),
    }
}

impl PredictedRate {
    /// The same rate expressed over `n` (or `ln n` when `s = 1`) for
    /// polynomial schedules.
    pub fn over_n(&self, sch: &Schedule) -> Option<(Base, f64)> {
        if sch.family() != Family::Poly {
            return matches!(self.base, Base::N | Base::LogN).then_some((self.base, self.exponent));
        }
        let s = sch.s();
        match self.base {
            Base::N | Base::LogN => Some((self.base, self.exponent)),
            Base::GammaN => Some((Base::N, self.exponent * s)),
            Base::SumGamma if s < 1.0 => Some((Base::N, self.exponent * (1.0 - s))),
            Base::SumGamma => Some((Base::LogN, self.exponent)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetParams {
    pub constants: ProblemConstants,
    pub rho: f64,
    pub regime: Regime,
    pub quantity: Quantity,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub epsilon: f64,
    pub delta: f64,
    pub regime: Regime,
    pub quantity: Quantity,
    /// Proportionality constant is 1; saturates at `u64::MAX`.
    pub n: u64,
    pub formula_tag: String,
}

fn ceil_exp(log_n: f64) -> u64 {
    if log_n >= (u64::MAX as f64).ln() {
        u64::MAX
    } else {
        (log_n.exp().ceil() as u64).max(1)
    }
}

/// Iterations needed to reach tolerance `eps` for the given regime and quantity.
pub fn budget(eps: f64, delta: f64, params: &BudgetParams, sch: &Schedule) -> Result<Budget> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let ProblemConstants { alpha, beta, .. } = params.constants;
    let rho = params.rho;
    let regime = params.regime;
    let global = regime == Regime::Global;
    let unsupported = |why: &str| Err(Error::UnsupportedRegime(why.to_string()));
    if !(alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta <= 1.0) {
        return unsupported("need alpha in (0, 1] and beta in (0, 1]");
    }
    if beta == 1.0 && regime != Regime::Unified {
        return unsupported("beta = 1 is only covered by the unified regime");
    }
    let (n, tag) = match params.quantity {
        Quantity::MinFGap => {
            if global {
                (sch.sigma_inverse(eps.powf(-2.0 * beta))?, "min-gap/global: Sigma^-1(eps^(-2 beta))")
            } else {
                (
                    sch.sigma_inverse(eps.powf(-(1.0f64).max(2.0 * beta)))?,
                    "min-gap/local: Sigma^-1(eps^(-(1 v 2 beta)))",
                )
            }
        }
        Quantity::FGap => {
            if beta <= 0.5 {
                if global {
                    if beta < 0.5 && beta <= alpha / (1.0 + alpha) {
                        return unsupported("global regime needs beta > alpha/(1+alpha) or beta = 1/2");
                    }
                    (sch.gamma_inverse(eps.powf(1.0 / alpha))?, "gap/global beta <= 1/2: gamma^-1(eps^(1/alpha))")
                } else {
                    (
                        sch.gamma_inverse(eps.powf(2.0f64.max(1.0 / alpha)))?,
                        "gap/local beta <= 1/2: gamma^-1(eps^(2 v 1/alpha))",
                    )
                }
            } else {
                let r = r_exponent(alpha, beta, rho, regime);
                if !(r > 0.0) {
                    return unsupported("the rate exponent r is not positive for this rho");
                }
                (sch.sigma_inverse(eps.powf(-1.0 / r))?, "gap beta > 1/2: Sigma^-1(eps^(-1/r))")
            }
        }
        Quantity::IterateGap => {
            let pred = predict_iterate_rate(&params.constants, sch, rho, params.sigma, regime);
            if !pred.valid {
                let failed: Vec<&str> = pred
                    .side_conditions
                    .iter()
                    .filter(|c| !c.satisfied)
                    .map(|c| c.description.as_str())
                    .collect();
                return Err(Error::UnsupportedRegime(format!("iterate budget outside hypotheses: {}", failed.join("; "))));
            }
            if pred.base == Base::LogN {
                let sigma = pred.sigma.expect("iterate predictions carry sigma");
                let r = pred.exponent / (1.0 - sigma);
                let log_n = eps.powf(-1.0 / (r * (1.0 - sigma)));
                (ceil_exp(log_n), "iterates s = 1: ceil(exp(eps^(-1/(r(1-sigma)))))")
            } else {
                (ceil_exp(-eps.ln() / pred.exponent), "iterates: ceil(eps^(-1/exponent))")
            }
        }
        Quantity::MinGradSq => return unsupported("no budget formula covers the gradient minimum"),
    };
    Ok(Budget { epsilon: eps, delta, regime, quantity: params.quantity, n, formula_tag: tag.to_string() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (u64, u64),
    pub rms_residual: f64,
    pub n_points: usize,
    /// Values at or below 1e-300 dropped from the fit.
    pub clipped: usize,
}

/// `ln` of the base variable at step `n`.
pub fn log_base(base: Base, sch: &Schedule, n: u64) -> f64 {
    match base {
        Base::N => (n as f64).ln(),
        Base::LogN => (n as f64).ln().ln(),
        Base::GammaN => -sch.at(n).ln(),
        Base::SumGamma => sch.cumulative(n).ln(),
    }
}

/// Least-squares slope of `ln value` against `ln base(n)` over `window`.
pub fn fit_decay(series: &[(u64, f64)], window: (u64, u64), base: Base, sch: &Schedule) -> Result<RateFit> {
    let (lo, hi) = window;
    let mut clipped = 0;
    let mut pts = Vec::new();
    for &(n, v) in series {
        if n < lo.max(1) || n > hi {
            continue;
        }
        if base == Base::LogN && n < 2 {
            continue;
        }
        if !(v > 1e-300) || !v.is_finite() {
            clipped += 1;
            continue;
        }
        pts.push((n, log_base(base, sch, n), v.ln()));
    }
    if pts.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} usable points in window [{lo}, {hi}], need 8 ({clipped} clipped)",
            pts.len()
        )));
    }
    let n_lo = pts.iter().map(|p| p.0).min().expect("nonempty");
    let n_hi = pts.iter().map(|p| p.0).max().expect("nonempty");
    if (n_hi as f64) < 10.0 * n_lo as f64 {
        return Err(Error::InsufficientData(format!("window [{n_lo}, {n_hi}] spans less than a decade")));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.2).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.1 - mx) * (p.1 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("base variable is constant over the window".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.2 - intercept - slope * p.1).powi(2)).sum::<f64>() / k).sqrt();
    Ok(RateFit { slope, intercept, window: (n_lo, n_hi), rms_residual: rms, n_points: pts.len(), clipped })
}

/// Window covering the last `decades` decades before `n_max`.
pub fn tail_window(n_max: u64, decades: f64) -> (u64, u64) {
    (((n_max as f64) / 10f64.powf(decades)).ceil().max(1.0) as u64, n_max)
}

/// Nearest-rank `(1 - delta)` quantile: element `ceil((1 - delta) R)` of the sorted values.
pub fn nearest_rank_quantile(values: &[f64], delta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no values".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let r = v.len();
    // 1e-9 absorbs rounding in (1 - delta) * R, e.g. 0.9 * 100 = 90.00000000000001
    let rank = (((1.0 - delta) * r as f64) - 1e-9).ceil().clamp(1.0, r as f64) as usize;
    Ok(v[rank - 1])
}

pub fn record_value(quantity: Quantity, r: &Record) -> Result<f64> {
    match quantity {
        Quantity::FGap => Ok(r.f_gap),
        Quantity::MinFGap => Ok(r.min_f_gap),
        Quantity::MinGradSq => Ok(r.min_gradsq),
        Quantity::IterateGap => Err(Error::UnsupportedRegime("the iterate limit is unknown during a run".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantileValue {
    pub value: f64,
    /// Recorded step actually used (nearest to the requested one).
    pub n_used: u64,
    pub warning: Option<String>,
}

pub fn hp_quantile(ens: &Ensemble, delta: f64, quantity: Quantity, n: u64) -> Result<QuantileValue> {
    record_value(quantity, ens.replicates[0].last())?;
    let (used, vals) = ens.values_at(n, |r| record_value(quantity, r).unwrap_or(f64::NAN));
    let value = nearest_rank_quantile(&vals, delta)?;
    let r = vals.len();
    let need = (10.0 / delta).ceil() as usize;
    let warning = (r < need).then(|| format!("{r} replicates is below the recommended ceil(10/delta) = {need}"));
    Ok(QuantileValue { value, n_used: used, warning })
}

/// `(n, quantile)` at every step recorded by all replicates.
pub fn hp_quantile_series(ens: &Ensemble, delta: f64, quantity: Quantity) -> Result<Vec<(u64, f64)>> {
    record_value(quantity, ens.replicates[0].last())?;
    ens.common_steps()
        .into_iter()
        .map(|n| {
            let (_, vals) = ens.values_at(n, |r| record_value(quantity, r).unwrap_or(f64::NAN));
            Ok((n, nearest_rank_quantile(&vals, delta)?))
        })
        .collect()
}

pub fn mean_series(ens: &Ensemble, quantity: Quantity) -> Result<Vec<(u64, f64)>> {
    record_value(quantity, ens.replicates[0].last())?;
    Ok(ens
        .common_steps()
        .into_iter()
        .map(|n| {
            let (_, vals) = ens.values_at(n, |r| record_value(quantity, r).unwrap_or(f64::NAN));
            (n, vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One-sided check: the fitted slope must be at most `-exponent + tolerance`.
pub fn judge(fit: &RateFit, predicted_exponent: f64, tolerance: f64) -> Verdict {
    if fit.slope <= -predicted_exponent + tolerance {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn k(alpha: f64, l: f64, beta: f64, zeta: f64, kappa: f64) -> ProblemConstants {
        ProblemConstants { alpha, l, beta, zeta, kappa }
    }

    fn poly(g0: f64, s: f64) -> Schedule {
        Schedule::poly(g0, 0.0, s).unwrap()
    }

    #[test]
    fn global_pl_rate() {
        let p = predict_fvalue_rate(&k(1.0, 1.0, 0.5, 0.5f64.sqrt(), 1.0), &poly(1.0, 1.0), 2.0, Regime::Global);
        assert!(p.valid, "{:?}", p.side_conditions);
        assert_eq!((p.base, p.exponent), (Base::GammaN, 1.0));
        assert_eq!(p.over_n(&poly(1.0, 1.0)), Some((Base::N, 1.0)));
        assert!((global_threshold(&k(1.0, 1.0, 0.5, 0.5f64.sqrt(), 1.0)) - 0.5).abs() < 1e-15);
        // threshold violated with a small gamma_star
        let p = predict_fvalue_rate(&k(1.0, 1.0, 0.5, 0.5f64.sqrt(), 1.0), &poly(0.4, 1.0), 2.0, Regime::Global);
        assert!(!p.valid);
    }

    #[test]
    fn global_three_quarter_rate() {
        let sch = poly(1.0, 0.75);
        let p = predict_fvalue_rate(&k(1.0, 12.0, 0.75, 1.0, 1.0), &sch, 3.0, Regime::Global);
        assert!(p.valid, "{:?}", p.side_conditions);
        assert_eq!((p.base, p.exponent), (Base::SumGamma, 2.0));
        let (b, e) = p.over_n(&sch).unwrap();
        assert_eq!(b, Base::N);
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unified_half_rate() {
        let sch = poly(2.0, 1.0);
        let p = predict_fvalue_rate(&k(1.0, 1.0, 0.5, 1.0, 1.0), &sch, 2.0, Regime::Unified);
        assert!(p.valid);
        assert_eq!(p.over_n(&sch), Some((Base::N, 0.5)));
        // kappa gamma_star must exceed 1/2 v alpha = 1
        assert!(!predict_fvalue_rate(&k(1.0, 1.0, 0.5, 1.0, 1.0), &poly(1.0, 1.0), 2.0, Regime::Unified).valid);
    }

    #[test]
    fn excluded_global_boundary() {
        let p = predict_fvalue_rate(&k(0.5, 1.0, 1.0 / 3.0, 1.0, 1.0), &poly(10.0, 1.0), 3.0, Regime::Global);
        assert!(!p.valid);
        let p = predict_fvalue_rate(&k(1.0, 1.0, 0.5, 1.0, 1.0), &poly(10.0, 1.0), 3.0, Regime::Global);
        assert!(p.valid);
    }

    #[test]
    fn local_a_threshold_depends_on_zeta() {
        let sch = poly(1.5, 1.0);
        assert!(predict_fvalue_rate(&k(1.0, 1.0, 0.5, 1.0, 1.0), &sch, 2.0, Regime::LocalA).valid);
        assert!(!predict_fvalue_rate(&k(1.0, 1.0, 0.5, 2.0, 1.0), &sch, 2.0, Regime::LocalA).valid);
        // the threshold only binds under gamma_n ~ gamma_star / n
        assert!(predict_fvalue_rate(&k(1.0, 1.0, 0.5, 2.0, 1.0), &poly(1.0, 0.8), 2.0, Regime::LocalA).valid);
    }

    #[test]
    fn optimal_global_schedule_matches_closed_form() {
        let beta: f64 = 0.75;
        let rho = 2.0 * beta / (2.0 * beta - 1.0);
        let s = 2.0 * beta / (4.0 * beta - 1.0);
        let sch = poly(1.0, s);
        let p = predict_fvalue_rate(&k(1.0, 1.0, beta, 1.0, 1.0), &sch, rho, Regime::Global);
        assert!(p.valid, "{:?}", p.side_conditions);
        let (_, e) = p.over_n(&sch).unwrap();
        assert!((e - 1.0 / (4.0 * beta - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn optimal_exponents_approach_the_pl_case() {
        let beta = 0.5001;
        // local: rho = (1+2b)/(2b-1), s = rho/(1+rho) gives n^(-1/(4b))
        let rho = (1.0 + 2.0 * beta) / (2.0 * beta - 1.0);
        let sch = poly(1.0, rho / (1.0 + rho));
        let p = predict_fvalue_rate(&k(1.0, 1.0, beta, 1.0, 1.0), &sch, rho, Regime::Unified);
        let (_, e) = p.over_n(&sch).unwrap();
        assert!((e - 0.5).abs() < 1e-3, "{e}");
        // global: converges to the beta = 1/2 exponent alpha s = 1
        let rho = 2.0 * beta / (2.0 * beta - 1.0);
        let sch = poly(1.0, 2.0 * beta / (4.0 * beta - 1.0));
        let p = predict_fvalue_rate(&k(1.0, 1.0, beta, 1.0, 1.0), &sch, rho, Regime::Global);
        let (_, e) = p.over_n(&sch).unwrap();
        assert!((e - 1.0).abs() < 1e-3, "{e}");
    }

    #[test]
    fn min_gradsq_rates() {
        let p = predict_min_gradsq_rate(&poly(1.0, 0.5));
        assert_eq!((p.base, p.exponent), (Base::N, 0.5));
        let p = predict_min_gradsq_rate(&poly(1.0, 1.0));
        assert_eq!((p.base, p.exponent), (Base::LogN, 1.0));
        assert_eq!(predict_min_gradsq_rate(&poly(3.0, 0.5)).exponent, 0.5);
    }

    #[test]
    fn min_fvalue_rates() {
        let p = predict_min_fvalue_rate(&k(1.0, 1.0, 0.75, 1.0, 1.0), &poly(1.0, 0.8), Regime::LocalA);
        assert!((p.exponent - 2.0 / 3.0).abs() < 1e-15);
        let p = predict_min_fvalue_rate(&k(1.0, 1.0, 0.25, 1.0, 1.0), &poly(1.0, 0.8), Regime::Unified);
        assert_eq!(p.exponent, 1.0);
        let p = predict_min_fvalue_rate(&k(0.5, 1.0, 1.0 / 3.0, 1.0, 1.0), &poly(1.0, 0.8), Regime::Global);
        assert!(p.valid && (p.exponent - 1.5).abs() < 1e-12);
    }

    #[test]
    fn iterate_rates() {
        let p = predict_iterate_rate(&k(1.0, 1.0, 0.5, 0.5f64.sqrt(), 1.0), &poly(1.0, 0.9), 4.0, None, Regime::Global);
        assert!(p.valid, "{:?}", p.side_conditions);
        assert!((p.sigma_min.unwrap() - 0.625).abs() < 1e-12);
        assert!((p.exponent - 0.15).abs() < 1e-12);

        let p = predict_iterate_rate(&k(1.0, 1.0, 0.75, 1.0, 1.0), &poly(2.0, 1.0), 4.0, None, Regime::Global);
        assert!(p.valid, "{:?}", p.side_conditions);
        assert_eq!(p.base, Base::LogN);
        assert!((p.sigma_min.unwrap() - 0.75).abs() < 1e-12);
        assert!((p.exponent - 0.5).abs() < 1e-12);

        let near_one = predict_iterate_rate(&k(1.0, 1.0, 0.5, 0.5, 1.0), &poly(1.0, 0.9), 4.0, Some(1.0 - 1e-9), Regime::Global);
        assert!(near_one.exponent < 1e-8);
        let bad_sigma = predict_iterate_rate(&k(1.0, 1.0, 0.5, 0.5, 1.0), &poly(1.0, 0.9), 4.0, Some(0.3), Regime::Global);
        assert!(!bad_sigma.valid);
        assert!(!predict_iterate_rate(&k(1.0, 1.0, 0.5, 0.5, 1.0), &poly(1.0, 0.9), 4.0, None, Regime::Unified).valid);
        // rho must exceed 3
        assert!(!predict_iterate_rate(&k(1.0, 1.0, 0.5, 0.5, 1.0), &poly(1.0, 0.9), 2.5, None, Regime::Global).valid);
    }

    #[test]
    fn budget_examples() {
        let params = |quantity, beta| BudgetParams {
            constants: k(1.0, 1.0, beta, 1.0, 1.0),
            rho: 2.0,
            regime: Regime::Global,
            quantity,
            sigma: None,
        };
        let h = poly(1.0, 1.0);
        assert_eq!(budget(0.1, 0.1, &params(Quantity::MinFGap, 0.5), &h).unwrap().n, 8104);
        assert_eq!(budget(0.1, 0.1, &params(Quantity::FGap, 0.5), &h).unwrap().n, 10);
        assert_eq!(budget(0.01, 0.1, &params(Quantity::FGap, 0.5), &h).unwrap().n, 100);
        let mut local = params(Quantity::MinFGap, 0.7);
        local.regime = Regime::LocalA;
        assert_eq!(budget(1.0, 0.1, &local, &h).unwrap().n, 1);
        assert_eq!(budget(2.0, 0.1, &local, &h).unwrap().n, 1);
        assert!(matches!(
            budget(0.1, 0.1, &params(Quantity::MinGradSq, 0.5), &h),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn iterate_budgets() {
        let p = BudgetParams {
            constants: k(1.0, 1.0, 0.75, 1.0, 1.0),
            rho: 4.0,
            regime: Regime::Global,
            quantity: Quantity::IterateGap,
            sigma: None,
        };
        // (ln n)^-0.5 <= eps  <=>  n >= exp(eps^-2)
        let b = budget(0.5, 0.1, &p, &poly(2.0, 1.0)).unwrap();
        assert_eq!(b.n, (4f64).exp().ceil() as u64);
        let b = budget(1e-3, 0.1, &p, &poly(2.0, 1.0)).unwrap();
        assert_eq!(b.n, u64::MAX);
        let mut q = p.clone();
        q.constants.beta = 0.5;
        let b = budget(0.1, 0.1, &q, &poly(1.0, 0.9)).unwrap();
        // exponent 0.15: n = ceil(10^(1/0.15))
        let expect = (10f64.ln() / 0.15).exp().ceil() as u64;
        assert!(b.n.abs_diff(expect) <= 1, "{} vs {expect}", b.n);
    }

    #[test]
    fn budget_monotonicity() {
        let h = poly(1.0, 0.8);
        for regime in [Regime::LocalA, Regime::Unified, Regime::Global] {
            for quantity in [Quantity::MinFGap, Quantity::FGap] {
                let mut prev_eps = u64::MAX;
                for i in 1..40 {
                    let eps = 0.02 * i as f64;
                    let p = BudgetParams { constants: k(1.0, 1.0, 0.6, 1.0, 1.0), rho: 4.0, regime, quantity, sigma: None };
                    let n = budget(eps, 0.1, &p, &h).unwrap().n;
                    assert!(n <= prev_eps);
                    prev_eps = n;
                }
                let mut prev_beta = 0;
                for j in 0..20 {
                    let beta = 0.55 + 0.02 * j as f64;
                    let p = BudgetParams { constants: k(1.0, 1.0, beta, 1.0, 1.0), rho: 4.0, regime, quantity: Quantity::MinFGap, sigma: None };
                    let n = budget(0.05, 0.1, &p, &h).unwrap().n;
                    assert!(n >= prev_beta);
                    prev_beta = n;
                }
            }
        }
    }

    #[test]
    fn fit_examples() {
        let sch = poly(1.0, 1.0);
        let exact: Vec<(u64, f64)> = (1..=1000).map(|n| (n, 1.0 / n as f64)).collect();
        let f = fit_decay(&exact, (1, 1000), Base::N, &sch).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && f.rms_residual < 1e-12);
        let flat: Vec<(u64, f64)> = (1..=1000).map(|n| (n, 3.0)).collect();
        assert!(fit_decay(&flat, (1, 1000), Base::N, &sch).unwrap().slope.abs() < 1e-12);
        let wobbly: Vec<(u64, f64)> =
            (0..=300).map(|i| 10f64.powf(i as f64 / 100.0).round() as u64).map(|n| (n, (1.0 + 0.1 * (n as f64).ln().sin()) / n as f64)).collect();
        let f = fit_decay(&wobbly, (1, 1000), Base::N, &sch).unwrap();
        assert!((f.slope + 1.0).abs() < 0.05, "{}", f.slope);
    }

    #[test]
    fn fit_other_bases() {
        let sch = poly(1.0, 0.5);
        let series: Vec<(u64, f64)> = (1..=10_000).map(|n| (n, sch.at(n).powf(0.7))).collect();
        let f = fit_decay(&series, (10, 10_000), Base::GammaN, &sch).unwrap();
        assert!((f.slope + 0.7).abs() < 1e-10);
        let series: Vec<(u64, f64)> = (1..=10_000).map(|n| (n, sch.cumulative(n).powf(-2.0))).collect();
        let f = fit_decay(&series, (10, 10_000), Base::SumGamma, &sch).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-10);
        let series: Vec<(u64, f64)> = (2..=10_000).map(|n| (n, (n as f64).ln().powf(-0.5))).collect();
        let f = fit_decay(&series, (2, 10_000), Base::LogN, &sch).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-10);
    }

    #[test]
    fn fit_rejects_thin_windows() {
        let sch = poly(1.0, 1.0);
        let few: Vec<(u64, f64)> = (1..=7).map(|n| (n * 100, 1.0)).collect();
        assert!(matches!(fit_decay(&few, (1, 1000), Base::N, &sch), Err(Error::InsufficientData(_))));
        let narrow: Vec<(u64, f64)> = (100..=500).map(|n| (n, 1.0)).collect();
        assert!(fit_decay(&narrow, (1, 1000), Base::N, &sch).is_err());
        let mut zeros: Vec<(u64, f64)> = (1..=100).map(|n| (n, 1.0 / n as f64)).collect();
        zeros[50].1 = 0.0;
        assert_eq!(fit_decay(&zeros, (1, 100), Base::N, &sch).unwrap().clipped, 1);
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank_quantile(&v, 0.1).unwrap(), 90.0);
        assert_eq!(nearest_rank_quantile(&[4.0; 7], 0.3).unwrap(), 4.0);
        assert_eq!(nearest_rank_quantile(&[1.0, 2.0], 0.999).unwrap(), 1.0);
        assert!(nearest_rank_quantile(&[], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn fit_recovers_exact_power_laws(e in 0.05f64..3.0, c in -5.0f64..5.0) {
            let sch = Schedule::poly(1.0, 0.0, 1.0).unwrap();
            let s: Vec<(u64, f64)> = (1..=2000).map(|n| (n, c.exp() * (n as f64).powf(-e))).collect();
            let f = fit_decay(&s, (1, 2000), Base::N, &sch).unwrap();
            prop_assert!((f.slope + e).abs() < 1e-10);
        }
    }
}
