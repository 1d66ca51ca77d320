//! Learning-rate schedules, their assumption checks and complexity inverses.
//!
//! Families:
//!
//! * `Poly`:     `gamma_n = gamma0 / (n + c)^s`
//! * `PolyLog`:  `gamma_n = gamma0 / ((n + c) ln^s(1 + c' + n))`
//! * `LogPower`: `gamma_n = gamma0 / ((n + c) ln^s(1 + c' + n))^(1 / (1 + a))`
//!
//! `LogPower` carries its own exponent `a` (field `alpha`, default 1) that
//! sets the power `1 / (1 + a)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poly,
    PolyLog,
    LogPower,
}

fn default_alpha() -> f64 {
    1.0
}

/// Plain-data description of a schedule, as it appears in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub family: Family,
    pub gamma0: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub cprime: f64,
    pub s: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum H6Regime {
    /// `ln(gamma_{n-1} / gamma_n) = o(gamma_n)`
    Ia,
    /// `ln(gamma_{n-1} / gamma_n) ~ gamma_n / gamma_star`
    Ib,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub h3_ok: bool,
    pub h6_regime: H6Regime,
    pub gamma_star: Option<f64>,
    pub h6ii_ok: bool,
    pub max_rho: f64,
    pub rho_admissible: bool,
    pub rho_above_inverse_alpha: bool,
    pub messages: Vec<String>,
}

impl ValidityReport {
    /// `s` range for which a `Poly` schedule satisfies the decay condition with this `rho`.
    pub fn admissible_s_range_for(rho: f64) -> (f64, f64) {
        (rho / (1.0 + rho), 1.0)
    }

    pub fn is_valid(&self) -> bool {
        self.h3_ok && self.rho_admissible && self.rho_above_inverse_alpha
    }
}

/// Terms summed exactly before switching to Euler-Maclaurin.
pub const EXACT_SUM_LIMIT: u64 = 100_000_000;
/// Exact head used by the fast evaluator behind the inverses.
const FAST_HEAD: u64 = 1024;

#[derive(Debug)]
pub struct Schedule {
    spec: ScheduleSpec,
    head_sum: OnceLock<f64>,
}

impl Clone for Schedule {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            head_sum: self.head_sum.clone(),
        }
    }
}

impl PartialEq for Schedule {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

impl Schedule {
    pub fn new(spec: ScheduleSpec) -> Result<Self> {
        let ScheduleSpec { family, gamma0, c, cprime, s, alpha } = spec;
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::InvalidParam(format!("gamma0 must be > 0, got {gamma0}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParam(format!("shift c must be >= 0, got {c}")));
        }
        if !(cprime >= 0.0 && cprime.is_finite()) {
            return Err(Error::InvalidParam(format!("shift cprime must be >= 0, got {cprime}")));
        }
        if !s.is_finite() {
            return Err(Error::InvalidParam(format!("exponent s must be finite, got {s}")));
        }
        if family == Family::Poly && s < 0.0 {
            return Err(Error::InvalidParam(format!("Poly exponent s must be >= 0, got {s}")));
        }
        if family == Family::LogPower && !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParam(format!("LogPower alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(Self { spec, head_sum: OnceLock::new() })
    }

    pub fn poly(gamma0: f64, c: f64, s: f64) -> Result<Self> {
        Self::new(ScheduleSpec { family: Family::Poly, gamma0, c, cprime: 0.0, s, alpha: 1.0 })
    }

    pub fn poly_log(gamma0: f64, c: f64, cprime: f64, s: f64) -> Result<Self> {
        Self::new(ScheduleSpec { family: Family::PolyLog, gamma0, c, cprime, s, alpha: 1.0 })
    }

    pub fn log_power(gamma0: f64, c: f64, cprime: f64, s: f64, alpha: f64) -> Result<Self> {
        Self::new(ScheduleSpec { family: Family::LogPower, gamma0, c, cprime, s, alpha })
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn gamma0(&self) -> f64 {
        self.spec.gamma0
    }

    pub fn s(&self) -> f64 {
        self.spec.s
    }

    /// `gamma_n` as a function of a real argument `x >= 1`.
    fn eval(&self, x: f64) -> f64 {
        let ScheduleSpec { family, gamma0, c, cprime, s, alpha } = self.spec;
        match family {
            Family::Poly => gamma0 * (x + c).powf(-s),
            Family::PolyLog => gamma0 / ((x + c) * (1.0 + cprime + x).ln().powf(s)),
            Family::LogPower => {
                let p = 1.0 / (1.0 + alpha);
                gamma0 * ((x + c) * (1.0 + cprime + x).ln().powf(s)).powf(-p)
            }
        }
    }

    /// `d/dx ln gamma(x)`.
    fn log_derivative(&self, x: f64) -> f64 {
        let ScheduleSpec { family, c, cprime, s, alpha, .. } = self.spec;
        let poly_log = || -1.0 / (x + c) - s / ((1.0 + cprime + x) * (1.0 + cprime + x).ln());
        match family {
            Family::Poly => -s / (x + c),
            Family::PolyLog => poly_log(),
            Family::LogPower => poly_log() / (1.0 + alpha),
        }
    }

    /// `gamma_n` for `n >= 1` without the domain check.
    pub fn at(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        self.eval(n as f64)
    }

    pub fn gamma(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("learning rates are indexed from n = 1".into()));
        }
        Ok(self.at(n))
    }

    /// `gamma_star` of the `Ib` regime: `gamma0` whenever `gamma_n = gamma0 / (n + c)`.
    ///
    /// With `gamma_n = gamma0 / (n + c)`, `ln(gamma_{n-1} / gamma_n) = ln(1 + 1/(n + c - 1))
    /// ~ 1 / (n + c) = gamma_n / gamma0`.
    pub fn gamma_star(&self) -> Option<f64> {
        match self.spec.family {
            Family::Poly if self.spec.s == 1.0 => Some(self.spec.gamma0),
            Family::PolyLog if self.spec.s == 0.0 => Some(self.spec.gamma0),
            _ => None,
        }
    }

    /// Supremum of the admissible `rho` in `gamma_n = O((sum gamma)^-rho)`.
    pub fn rho_sup(&self) -> f64 {
        let s = self.spec.s;
        match self.spec.family {
            Family::Poly if s >= 1.0 => f64::INFINITY,
            Family::Poly => s / (1.0 - s),
            Family::PolyLog => {
                if s <= 1.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Family::LogPower => {
                let p = 1.0 / (1.0 + self.spec.alpha);
                p / (1.0 - p)
            }
        }
    }

    /// Which growth condition `ln(gamma_{n-1} / gamma_n)` satisfies.
    pub fn h6_regime(&self) -> H6Regime {
        let s = self.spec.s;
        match self.spec.family {
            Family::Poly if s == 1.0 => H6Regime::Ib,
            Family::Poly if s < 1.0 => H6Regime::Ia,
            Family::Poly => H6Regime::Neither,
            Family::PolyLog if s == 0.0 => H6Regime::Ib,
            Family::PolyLog if s < 0.0 => H6Regime::Ia,
            Family::PolyLog => H6Regime::Neither,
            Family::LogPower => H6Regime::Ia,
        }
    }

    fn diverges(&self) -> bool {
        match self.spec.family {
            Family::Poly | Family::PolyLog => self.spec.s <= 1.0,
            Family::LogPower => true,
        }
    }

    fn power_summable(&self, alpha: f64) -> bool {
        let s = self.spec.s;
        match self.spec.family {
            Family::Poly => s * (1.0 + alpha) > 1.0,
            // (n ln^s n)^-(1+alpha) is summable for every s once alpha > 0
            Family::PolyLog => true,
            Family::LogPower => {
                let a = self.spec.alpha;
                alpha < a || (alpha == a && s > 1.0)
            }
        }
    }

    pub fn validate(&self, alpha: f64, rho: f64) -> ValidityReport {
        let mut messages = Vec::new();
        let diverges = self.diverges();
        let summable = self.power_summable(alpha);
        if !diverges {
            messages.push("H3: the learning rates are summable, sum gamma_n < inf".to_string());
        }
        if !summable {
            messages.push(format!("H3: sum gamma_n^(1 + {alpha}) diverges"));
        }
        let h6_regime = self.h6_regime();
        if h6_regime == H6Regime::Neither {
            messages.push("H6(i): ln(gamma_{n-1}/gamma_n) is neither o(gamma_n) nor ~ gamma_n/gamma_star".into());
        }
        // Abel-Dini: sum gamma_n / sum_{k<=n} gamma_k diverges iff sum gamma_n does.
        let h6ii_ok = diverges;
        if !h6ii_ok {
            messages.push("H6(ii): sum gamma_n / sum_k gamma_k converges".into());
        }
        let max_rho = self.rho_sup();
        let rho_admissible = rho <= max_rho;
        if !rho_admissible {
            messages.push(format!("H6(iii): rho = {rho} exceeds the supremum {max_rho} for this schedule"));
        }
        let rho_above_inverse_alpha = rho > 1.0 / alpha;
        if !rho_above_inverse_alpha {
            messages.push(format!("H6(iii): rho = {rho} must exceed 1/alpha = {}", 1.0 / alpha));
        }
        ValidityReport {
            h3_ok: diverges && summable,
            h6_regime,
            gamma_star: self.gamma_star(),
            h6ii_ok,
            max_rho,
            rho_admissible,
            rho_above_inverse_alpha,
            messages,
        }
    }

    /// `sum_{k=1}^{m} gamma_k`, exact (compensated) for `m <= EXACT_SUM_LIMIT`.
    ///
    /// Beyond the limit the tail past the first `EXACT_SUM_LIMIT` terms uses
    /// Euler-Maclaurin with the `B_2` correction; the neglected remainder is
    /// bounded by `|f'''(EXACT_SUM_LIMIT)| / 720`, below `1e-25 * gamma0` for
    /// every supported family.
    pub fn cumulative(&self, m: u64) -> f64 {
        if m <= EXACT_SUM_LIMIT {
            self.exact_sum(1, m)
        } else {
            self.exact_sum(1, EXACT_SUM_LIMIT) + self.euler_maclaurin_tail(EXACT_SUM_LIMIT, m)
        }
    }

    /// `Sigma_n = sum_{k=1}^{n+1} gamma_k`.
    pub fn partial_sum(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("partial sums are indexed from n = 1".into()));
        }
        Ok(self.cumulative(n.saturating_add(1)))
    }

    fn exact_sum(&self, from: u64, to: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        for k in from..=to {
            acc.add(self.at(k));
        }
        acc.value()
    }

    /// `sum_{k=a+1}^{b} gamma_k` by Euler-Maclaurin.
    fn euler_maclaurin_tail(&self, a: u64, b: u64) -> f64 {
        let (fa, fb) = (self.at(a), self.at(b));
        let (xa, xb) = (a as f64, b as f64);
        let da = fa * self.log_derivative(xa);
        let db = fb * self.log_derivative(xb);
        self.integral(xa, xb) + 0.5 * (fb - fa) + (db - da) / 12.0
    }

    /// `int_a^b gamma(x) dx`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        if self.spec.family == Family::Poly {
            let ScheduleSpec { gamma0, c, s, .. } = self.spec;
            let e = 1.0 - s;
            let lr = ((b + c) / (a + c)).ln();
            // (B^e - A^e) / e written to stay accurate as e -> 0
            let core = if e == 0.0 { lr } else { (e * lr).exp_m1() / e };
            return gamma0 * (a + c).powf(e) * core;
        }
        // Gauss-Legendre on x = exp(u), quarter-octave panels.
        let (ua, ub) = (a.ln(), b.ln());
        let panels = (((ub - ua) / (std::f64::consts::LN_2 / 4.0)).ceil() as usize).max(1);
        let h = (ub - ua) / panels as f64;
        let mut acc = CompensatedSum::new();
        for p in 0..panels {
            let mid = ua + (p as f64 + 0.5) * h;
            for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                for u in [mid - 0.5 * h * node, mid + 0.5 * h * node] {
                    let x = u.exp();
                    acc.add(0.5 * h * w * self.eval(x) * x);
                }
            }
        }
        acc.value()
    }

    /// Accurate to roughly 1e-13 relative; used to steer the inverse searches.
    fn fast_cumulative(&self, m: u64) -> f64 {
        if m <= FAST_HEAD {
            return self.exact_sum(1, m);
        }
        let head = *self.head_sum.get_or_init(|| self.exact_sum(1, FAST_HEAD));
        head + self.euler_maclaurin_tail(FAST_HEAD, m)
    }

    /// Error allowance for `fast_cumulative` near level `t`: 100x the
    /// Euler-Maclaurin remainder `|f'''(FAST_HEAD)| / 720`, estimated by a
    /// third difference, plus 1e-12 relative for the integral.
    fn fast_slack(&self, t: f64) -> f64 {
        let a = FAST_HEAD;
        let d3 = self.at(a + 3) - 3.0 * self.at(a + 2) + 3.0 * self.at(a + 1) - self.at(a);
        100.0 * d3.abs() / 720.0 + 1e-12 * t.abs()
    }

    /// Decides `Sigma_n >= t`, re-summing exactly when the fast value is too
    /// close to the threshold to be trusted.
    fn sigma_reaches(&self, n: u64, t: f64) -> bool {
        let m = n.saturating_add(1);
        let fast = self.fast_cumulative(m);
        if (fast - t).abs() > self.fast_slack(t) || m <= FAST_HEAD || m > EXACT_SUM_LIMIT {
            return fast >= t;
        }
        self.cumulative(m) >= t
    }

    /// Smallest `n >= 1` with `pred(n)`, for a predicate that is monotone in
    /// `n`. Saturates at `u64::MAX` when no `n < 2^63` qualifies.
    fn least_satisfying(pred: impl Fn(u64) -> bool) -> u64 {
        if pred(1) {
            return 1;
        }
        let mut lo = 1u64;
        let mut hi = 2u64;
        while !pred(hi) {
            lo = hi;
            if hi >= 1 << 62 {
                return u64::MAX;
            }
            hi *= 2;
        }
        // pred(lo) false, pred(hi) true
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if pred(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn check_level(t: f64) -> Result<()> {
        if t > 0.0 && !t.is_nan() {
            Ok(())
        } else {
            Err(Error::Domain(format!("inverse level must be > 0, got {t}")))
        }
    }

    /// `inf { n >= 1 : gamma_n <= t }`.
    pub fn gamma_inverse(&self, t: f64) -> Result<u64> {
        Self::check_level(t)?;
        if self.at(1) <= t {
            return Ok(1);
        }
        let ScheduleSpec { family, gamma0, c, s, .. } = self.spec;
        if family == Family::Poly && gamma0 == 1.0 && c == 0.0 && s > 0.0 {
            let guess = t.powf(-1.0 / s).ceil();
            if guess < 9.0e18 {
                // Snap the floating closed form to the exact integer predicate.
                let mut n = (guess as u64).max(1);
                while n > 1 && self.at(n - 1) <= t {
                    n -= 1;
                }
                while self.at(n) > t {
                    n += 1;
                }
                return Ok(n);
            }
        }
        Ok(Self::least_satisfying(|n| self.at(n) <= t))
    }

    /// `inf { n >= 1 : Sigma_n >= t }`, using the integral closed forms
    /// `ceil(((1 - s) t)^(1 / (1 - s)))` and `ceil(e^(t - 1))` for
    /// `Poly(gamma0 = 1, c = 0, s)`.
    ///
    /// The closed forms invert the integral surrogates `n^(1-s) / (1-s)` and
    /// `1 + ln n` of `Sigma_n`, not the discrete sum itself; see
    /// [`Schedule::sigma_inverse_exact`] for the value satisfying the
    /// definition literally. Levels `t <= Sigma_1` return 1 for every schedule.
    pub fn sigma_inverse(&self, t: f64) -> Result<u64> {
        Self::check_level(t)?;
        if t <= self.cumulative(2) {
            return Ok(1);
        }
        let ScheduleSpec { family, gamma0, c, s, .. } = self.spec;
        if family == Family::Poly && gamma0 == 1.0 && c == 0.0 && s > 0.0 && s <= 1.0 {
            let surrogate = |n: u64| {
                let x = n as f64;
                if s == 1.0 {
                    1.0 + x.ln()
                } else {
                    x.powf(1.0 - s) / (1.0 - s)
                }
            };
            let guess = if s == 1.0 {
                (t - 1.0).exp().ceil()
            } else {
                ((1.0 - s) * t).powf(1.0 / (1.0 - s)).ceil()
            };
            if guess < 9.0e18 {
                let mut n = (guess as u64).max(1);
                while n > 1 && surrogate(n - 1) >= t {
                    n -= 1;
                }
                while surrogate(n) < t {
                    n += 1;
                }
                return Ok(n);
            }
            return Ok(Self::least_satisfying(|n| surrogate(n) >= t));
        }
        self.sigma_inverse_exact(t)
    }

    /// `inf { n >= 1 : Sigma_n >= t }` by bisection on the discrete partial sums.
    pub fn sigma_inverse_exact(&self, t: f64) -> Result<u64> {
        Self::check_level(t)?;
        if !self.diverges() {
            let total = self.fast_cumulative(1 << 62);
            if t > total {
                return Err(Error::Domain(format!(
                    "level {t} exceeds the total sum {total} of a summable schedule"
                )));
            }
        }
        Ok(Self::least_satisfying(|n| self.sigma_reaches(n, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(a.abs())
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(Schedule::poly(1.0, 0.0, 1.0).unwrap().gamma(4).unwrap(), 0.25);
        assert_eq!(Schedule::poly(2.0, 1.0, 0.5).unwrap().gamma(3).unwrap(), 1.0);
        let pl = Schedule::poly_log(1.0, 0.0, 0.0, 1.0).unwrap();
        assert!(close(pl.gamma(1).unwrap(), 1.0 / 2f64.ln(), 1e-15));
        assert!(matches!(pl.gamma(0), Err(Error::Domain(_))));
    }

    #[test]
    fn partial_sum_examples() {
        let h = Schedule::poly(1.0, 0.0, 1.0).unwrap();
        assert!(close(h.partial_sum(2).unwrap(), 11.0 / 6.0, 1e-15));
        let r = Schedule::poly(1.0, 0.0, 0.5).unwrap();
        let brute: f64 = (1..=10_001u64).map(|k| 1.0 / (k as f64).sqrt()).sum();
        assert!(close(r.partial_sum(10_000).unwrap(), brute, 1e-9));
    }

    #[test]
    fn euler_maclaurin_matches_exact_sums() {
        let cases = [
            Schedule::poly(1.0, 0.0, 1.0).unwrap(),
            Schedule::poly(0.3, 2.5, 0.6).unwrap(),
            Schedule::poly(1.0, 0.0, 0.999_999_9).unwrap(),
            Schedule::poly_log(1.0, 1.0, 0.5, 1.0).unwrap(),
            Schedule::poly_log(2.0, 0.0, 0.0, -0.5).unwrap(),
            Schedule::log_power(1.0, 0.0, 1.0, 1.5, 0.5).unwrap(),
        ];
        for sch in &cases {
            for m in [2_000u64, 50_000, 1_000_000] {
                let exact = sch.exact_sum(1, m);
                assert!(close(sch.fast_cumulative(m), exact, 1e-12), "{sch:?} m={m}");
            }
        }
    }

    #[test]
    fn cumulative_beyond_exact_limit_continues_smoothly() {
        let sch = Schedule::poly(1.0, 0.0, 0.5).unwrap();
        let a = sch.cumulative(EXACT_SUM_LIMIT);
        let b = sch.cumulative(EXACT_SUM_LIMIT + 1);
        assert!(close(b - a, sch.at(EXACT_SUM_LIMIT + 1), 1e-4));
    }

    #[test]
    fn gamma_inverse_examples() {
        assert_eq!(Schedule::poly(1.0, 0.0, 0.5).unwrap().gamma_inverse(0.01).unwrap(), 10_000);
        assert_eq!(Schedule::poly(1.0, 0.0, 1.0).unwrap().gamma_inverse(1.0).unwrap(), 1);
        let sch = Schedule::poly(2.0, 3.0, 0.7).unwrap();
        let scan = (1u64..).find(|&n| sch.at(n) <= 0.05).unwrap();
        assert_eq!(sch.gamma_inverse(0.05).unwrap(), scan);
        assert!(sch.gamma_inverse(0.0).is_err());
    }

    #[test]
    fn gamma_inverse_of_constant_schedule_saturates() {
        let sch = Schedule::poly(0.5, 0.0, 0.0).unwrap();
        assert_eq!(sch.gamma_inverse(0.5).unwrap(), 1);
        assert_eq!(sch.gamma_inverse(0.25).unwrap(), u64::MAX);
    }

    #[test]
    fn sigma_inverse_examples() {
        assert_eq!(Schedule::poly(1.0, 0.0, 0.5).unwrap().sigma_inverse(100.0).unwrap(), 2500);
        assert_eq!(Schedule::poly(1.0, 0.0, 1.0).unwrap().sigma_inverse(10.0).unwrap(), 8104);
        for sch in [
            Schedule::poly(1.0, 0.0, 1.0).unwrap(),
            Schedule::poly(0.2, 4.0, 0.8).unwrap(),
            Schedule::poly_log(1.0, 0.0, 0.0, 0.5).unwrap(),
        ] {
            let sigma1 = sch.partial_sum(1).unwrap();
            assert_eq!(sch.sigma_inverse(sigma1).unwrap(), 1);
            assert_eq!(sch.sigma_inverse(0.5 * sigma1).unwrap(), 1);
        }
    }

    #[test]
    fn exact_sigma_inverse_satisfies_definition() {
        let h = Schedule::poly(1.0, 0.0, 1.0).unwrap();
        let n = h.sigma_inverse_exact(10.0).unwrap();
        assert!(h.partial_sum(n).unwrap() >= 10.0);
        assert!(h.partial_sum(n - 1).unwrap() < 10.0);
        // The integral surrogate 1 + ln n overestimates the harmonic sum by about 0.42.
        assert!(n > 8104);
    }

    #[test]
    fn sigma_inverse_of_summable_schedule() {
        let sch = Schedule::poly(1.0, 0.0, 2.0).unwrap();
        assert!(sch.sigma_inverse_exact(10.0).is_err());
        assert!(sch.sigma_inverse_exact(1.2).unwrap() >= 1);
    }

    #[test]
    fn validate_examples() {
        let r = Schedule::poly(1.0, 0.0, 0.6).unwrap().validate(1.0, 1.2);
        assert!(r.h3_ok && r.rho_admissible && r.rho_above_inverse_alpha && r.is_valid());
        assert!(close(r.max_rho, 1.5, 1e-15));
        assert_eq!(r.h6_regime, H6Regime::Ia);

        let r = Schedule::poly(1.0, 0.0, 0.4).unwrap().validate(1.0, 1.2);
        assert!(!r.h3_ok);

        let r = Schedule::poly(0.7, 0.0, 1.0).unwrap().validate(1.0, 2.0);
        assert_eq!(r.h6_regime, H6Regime::Ib);
        assert_eq!(r.gamma_star, Some(0.7));
        assert!(r.h6ii_ok);

        // boundary s = 1 / (1 + alpha) is excluded
        assert!(!Schedule::poly(1.0, 0.0, 0.5).unwrap().validate(1.0, 2.0).h3_ok);
        assert!(!Schedule::poly(1.0, 0.0, 0.8).unwrap().validate(0.25, 5.0).h3_ok);

        let r = Schedule::poly(1.0, 0.0, 0.75).unwrap().validate(1.0, 1.0);
        assert!(!r.rho_above_inverse_alpha && !r.is_valid());
        assert_eq!(ValidityReport::admissible_s_range_for(3.0), (0.75, 1.0));
    }

    #[test]
    fn validate_other_families() {
        let pl = Schedule::poly_log(1.0, 0.0, 0.0, 0.5).unwrap().validate(1.0, 2.0);
        assert!(pl.h3_ok);
        assert_eq!(pl.h6_regime, H6Regime::Neither);
        let pl0 = Schedule::poly_log(0.9, 0.0, 0.0, 0.0).unwrap().validate(1.0, 2.0);
        assert_eq!(pl0.gamma_star, Some(0.9));
        assert!(!Schedule::poly_log(1.0, 0.0, 0.0, 1.5).unwrap().validate(1.0, 2.0).h3_ok);

        let lp = Schedule::log_power(1.0, 0.0, 0.0, 1.5, 0.5).unwrap();
        assert!(lp.validate(0.5, 2.5).h3_ok);
        assert!(!Schedule::log_power(1.0, 0.0, 0.0, 0.5, 0.5).unwrap().validate(0.5, 2.5).h3_ok);
        assert!(close(lp.rho_sup(), 2.0, 1e-15));
    }

    #[test]
    fn gamma_star_of_shifted_harmonic_schedule() {
        // ln(gamma_{n-1} / gamma_n) / gamma_n -> 1 / gamma0 for gamma_n = gamma0 / (n + c)
        let sch = Schedule::poly(0.7, 5.0, 1.0).unwrap();
        let n = 1_000_000;
        let ratio = (sch.at(n - 1) / sch.at(n)).ln() / sch.at(n);
        assert!(close(ratio, 1.0 / 0.7, 1e-5));
        assert_eq!(sch.gamma_star(), Some(0.7));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn partial_sums_increase(n in 1u64..20_000) {
            let sch = Schedule::poly(1.0, 0.0, 0.75).unwrap();
            prop_assert!(sch.partial_sum(n + 1).unwrap() > sch.partial_sum(n).unwrap());
        }

        #[test]
        fn gamma_inverse_round_trip(n in 1u64..10_000_000, s in 0.1f64..=1.0, c in 0.0f64..10.0) {
            let sch = Schedule::poly(1.5, c, s).unwrap();
            let g = sch.at(n);
            let k = sch.gamma_inverse(g).unwrap();
            prop_assert!(k <= n);
            prop_assert!(sch.at(k) <= g);
            prop_assert!(k == 1 || sch.at(k - 1) > g);
        }

        #[test]
        fn exact_sigma_inverse_postcondition(u in 0.1f64..12.0, s in 0.3f64..=1.0, g0 in 0.5f64..2.0) {
            let sch = Schedule::poly(g0, 0.0, s).unwrap();
            let t = u * g0;
            let n = sch.sigma_inverse_exact(t).unwrap();
            prop_assert!(sch.partial_sum(n).unwrap() >= t);
            prop_assert!(n == 1 || sch.partial_sum(n - 1).unwrap() < t);
        }
    }
}
