//! Numeric forms of the auxiliary inequalities behind the convergence proofs.
//!
//! Every `*_gap` function returns "bound minus quantity", so a valid
//! inequality shows up as a nonnegative value.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscapes::{norm, Landscape, Objective, CATALOG_NAMES};
use crate::rng::stream;
use crate::schedules::{H6Regime, Schedule};

/// `L/(1+a) ||t' - t||^(1+a) - |F(t') - F(t) - grad F(t).(t' - t)|`.
pub fn descent_gap(f: &dyn Objective, l: f64, alpha: f64, theta: &[f64], theta_prime: &[f64]) -> f64 {
    let g = f.gradient(theta);
    let mut dist2 = 0.0;
    let mut lin = 0.0;
    for i in 0..theta.len() {
        let d = theta_prime[i] - theta[i];
        dist2 += d * d;
        lin += g[i] * d;
    }
    let bound = l / (1.0 + alpha) * dist2.sqrt().powf(1.0 + alpha);
    bound - (f.value(theta_prime) - f.value(theta) - lin).abs()
}

/// `(1+a) L^(1/a) / a (F(t) - inf F) - ||grad F(t)||^((1+a)/a)`.
pub fn grad_bound_gap(f: &dyn Objective, l: f64, alpha: f64, inf_value: f64, theta: &[f64]) -> f64 {
    let k = (1.0 + alpha) * l.powf(1.0 / alpha) / alpha;
    k * (f.value(theta) - inf_value) - norm(&f.gradient(theta)).powf((1.0 + alpha) / alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CrossingPair {
    pub chi: usize,
    pub psi: usize,
}

/// Pairs `(chi, psi)` where `u` leaves `(-inf, l-)` and next exceeds `l+`.
///
/// `chi` is the last index below `l-` before `psi`, and `psi` the first
/// index above `l+` after it; strictly between them `u` stays in `[l-, l+]`.
pub fn extract_crossings(u: &[f64], ell_minus: f64, ell_plus: f64) -> Result<Vec<CrossingPair>> {
    if !(ell_minus < ell_plus) {
        return Err(Error::Domain(format!("need ell_minus < ell_plus, got {ell_minus} >= {ell_plus}")));
    }
    let mut pairs = Vec::new();
    let mut last_below = None;
    for (k, &x) in u.iter().enumerate() {
        if x < ell_minus {
            last_below = Some(k);
        } else if x > ell_plus {
            if let Some(chi) = last_below.take() {
                pairs.push(CrossingPair { chi, psi: k });
            }
        }
    }
    Ok(pairs)
}

/// Limit `c_star` of [`gamma_series`]: `1/mu` when `ln(g_{n-1}/g_n) = o(g_n)`,
/// `1/(mu - alpha/gamma_star)` when `ln(g_{n-1}/g_n) ~ g_n/gamma_star`.
pub fn gamma_series_limit(sch: &Schedule, mu: f64, alpha: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be > 0, got {mu}")));
    }
    match sch.h6_regime() {
        H6Regime::Ia => Ok(1.0 / mu),
        H6Regime::Ib => {
            let gs = sch.gamma_star().expect("Ib regime carries gamma_star");
            if mu * gs <= alpha {
                return Err(Error::Hypothesis(format!(
                    "need mu * gamma_star > alpha, got {mu} * {gs} <= {alpha}"
                )));
            }
            Ok(1.0 / (mu - alpha / gs))
        }
        H6Regime::Neither => Err(Error::Hypothesis(
            "ln(gamma_{n-1}/gamma_n) is neither o(gamma_n) nor ~ gamma_n/gamma_star".into(),
        )),
    }
}

/// `a_n = gamma_n^-a sum_{k<=n} gamma_k^(1+a) exp(-mu sum_{k<j<=n} gamma_j)`,
/// computed by the forward recursion
/// `a_n = (gamma_{n-1}/gamma_n)^a exp(-mu gamma_n) a_{n-1} + gamma_n`.
pub fn gamma_series(sch: &Schedule, mu: f64, alpha: f64, n: u64) -> Result<f64> {
    gamma_series_limit(sch, mu, alpha)?;
    if n == 0 {
        return Err(Error::Domain("gamma_series is indexed from n = 1".into()));
    }
    let mut prev = sch.at(1);
    let mut a = prev;
    for k in 2..=n {
        let g = sch.at(k);
        a = (prev / g).powf(alpha) * (-mu * g).exp() * a + g;
        prev = g;
    }
    Ok(a)
}

/// `(y^(1-s) - x^(1-s)) / (1-s) - (y - x) / y^s` for `0 <= x <= y`, `y > 0`.
pub fn concave_gap(x: f64, y: f64, sigma: f64) -> Result<f64> {
    if !(0.0 <= x && x <= y && y > 0.0) {
        return Err(Error::Domain(format!("need 0 <= x <= y and y > 0, got x = {x}, y = {y}")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Domain(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let e = 1.0 - sigma;
    Ok((y.powf(e) - x.powf(e)) / e - (y - x) / y.powf(sigma))
}

/// `ln y - ln x - (y - x) / y` for `0 < x <= y`.
pub fn log_concave_gap(x: f64, y: f64) -> Result<f64> {
    if !(0.0 < x && x <= y) {
        return Err(Error::Domain(format!("need 0 < x <= y, got x = {x}, y = {y}")));
    }
    Ok((y / x).ln() - (y - x) / y)
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn line(name: &str, passed: bool, detail: String) -> SelftestLine {
    SelftestLine { name: name.to_string(), passed, detail }
}

fn default_catalog() -> Vec<Landscape> {
    CATALOG_NAMES
        .iter()
        .map(|name| Landscape::catalog(name, &Default::default()).expect("catalog defaults are valid"))
        .collect()
}

/// Randomized sweeps of every kernel inequality; `samples` inputs per sweep.
pub fn selftest(seed: u64, samples: usize) -> Vec<SelftestLine> {
    const TOL: f64 = -1e-12;
    let mut rng = stream(seed);
    let mut out = Vec::new();
    let lands = default_catalog();

    let mut worst = f64::INFINITY;
    for land in &lands {
        let h = land.holder;
        for _ in 0..samples / lands.len() + 1 {
            let a = [rng.random_range(-3.0..3.0)];
            let b = [rng.random_range(-3.0..3.0)];
            // Rounding in F(t') - F(t) scales with |F|; measure the gap relative to it.
            let scale = 1.0 + land.value(&a).abs() + land.value(&b).abs();
            worst = worst.min(descent_gap(land, h.l, h.alpha, &a, &b) / scale);
        }
    }
    out.push(line("descent_gap", worst >= TOL, format!("min relative gap {worst:.3e}")));

    let mut worst = f64::INFINITY;
    for land in &lands {
        let h = land.holder;
        for _ in 0..samples / lands.len() + 1 {
            let t = [rng.random_range(-10.0..10.0)];
            let scale = 1.0 + land.value(&t).abs();
            worst = worst.min(grad_bound_gap(land, h.l, h.alpha, land.inf_value, &t) / scale);
        }
    }
    out.push(line("grad_bound_gap", worst >= TOL, format!("min relative gap {worst:.3e}")));

    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let y: f64 = rng.random_range(1e-6..10.0);
        let x = y * rng.random::<f64>();
        let sigma = rng.random_range(0.01..0.99);
        worst = worst.min(concave_gap(x, y, sigma).expect("sampled inside the domain"));
    }
    out.push(line("concave_gap", worst >= TOL, format!("min gap {worst:.3e}")));

    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let y: f64 = rng.random_range(1e-6..10.0);
        let x = (y * rng.random::<f64>()).max(f64::MIN_POSITIVE);
        worst = worst.min(log_concave_gap(x, y).expect("sampled inside the domain"));
    }
    out.push(line("log_concave_gap", worst >= TOL, format!("min gap {worst:.3e}")));

    let harmonic = Schedule::poly(1.0, 0.0, 1.0).expect("valid schedule");
    match gamma_series(&harmonic, 2.0, 1.0, 1_000_000) {
        Ok(a) => out.push(line("gamma_series", (0.99..=1.01).contains(&a), format!("a_1e6 = {a:.6}, limit 1"))),
        Err(e) => out.push(line("gamma_series", false, e.to_string())),
    }

    let mut bad = 0;
    let sequences = 1000;
    for _ in 0..sequences {
        let len = rng.random_range(0..200);
        let u: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let lm = rng.random_range(0.05..0.5);
        let lp = rng.random_range(lm + 0.01..0.99);
        let pairs = extract_crossings(&u, lm, lp).expect("levels are ordered");
        if !crossings_are_valid(&u, lm, lp, &pairs) {
            bad += 1;
        }
    }
    out.push(line("extract_crossings", bad == 0, format!("{bad} of {sequences} random sequences violated the pair invariants")));
    out
}

/// Pair invariants plus maximality: no further pair fits after the last one.
pub fn crossings_are_valid(u: &[f64], lm: f64, lp: f64, pairs: &[CrossingPair]) -> bool {
    let mut prev_psi = None;
    for p in pairs {
        if p.chi >= p.psi || !(u[p.chi] < lm) || !(u[p.psi] > lp) {
            return false;
        }
        if u[p.chi + 1..p.psi].iter().any(|&x| x < lm || x > lp) {
            return false;
        }
        if prev_psi.is_some_and(|q| p.chi <= q) {
            return false;
        }
        prev_psi = Some(p.psi);
    }
    let start = prev_psi.map_or(0, |q| q + 1);
    match u[start.min(u.len())..].iter().position(|&x| x < lm) {
        Some(i) => !u[start + i..].iter().any(|&x| x > lp),
        None => true,
    }
}
