//! The SGD recursion `theta_n = theta_{n-1} - gamma_n g_n(theta_{n-1})`,
//! trajectory recording and replicated ensembles.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscapes::{norm, Objective};
use crate::oracles::Oracle;
use crate::rng::{replicate_seed, stream};
use crate::schedules::Schedule;
use crate::sum::CompensatedSum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta0 {
    Point(Vec<f64>),
    Gaussian { center: Vec<f64>, sd: f64 },
}

impl Theta0 {
    fn dim(&self) -> usize {
        match self {
            Theta0::Point(p) => p.len(),
            Theta0::Gaussian { center, .. } => center.len(),
        }
    }
}

pub const DEFAULT_POINTS_PER_DECADE: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordGrid {
    All,
    LogSpaced(u32),
}

impl Default for RecordGrid {
    fn default() -> Self {
        RecordGrid::LogSpaced(DEFAULT_POINTS_PER_DECADE)
    }
}

impl RecordGrid {
    /// Recorded step indices: 0, the grid points, `n_steps / 2` and `n_steps`.
    pub fn steps(&self, n_steps: u64) -> Vec<u64> {
        match *self {
            RecordGrid::All => (0..=n_steps).collect(),
            RecordGrid::LogSpaced(ppd) => {
                let ppd = ppd.max(1) as f64;
                let mut v = vec![0, n_steps / 2, n_steps];
                let top = (n_steps as f64).log10() * ppd;
                let mut j = 0.0;
                while j <= top + 1e-9 {
                    let n = 10f64.powf(j / ppd).round() as u64;
                    if n <= n_steps {
                        v.push(n);
                    }
                    j += 1.0;
                }
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub oracle: Arc<Oracle>,
    pub schedule: Arc<Schedule>,
    pub theta0: Theta0,
    pub n_steps: u64,
    pub seed: u64,
    pub record_grid: RecordGrid,
    /// Run even when the schedule fails the step-size summability conditions.
    pub override_assumptions: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let land = self.oracle.landscape();
        if self.n_steps == 0 {
            return Err(Error::validation("n_steps", "must be >= 1"));
        }
        if self.theta0.dim() != land.dim() {
            return Err(Error::validation(
                "theta0",
                format!("dimension {} does not match the landscape dimension {}", self.theta0.dim(), land.dim()),
            ));
        }
        let finite = match &self.theta0 {
            Theta0::Point(p) => p.iter().all(|x| x.is_finite()),
            Theta0::Gaussian { center, sd } => center.iter().all(|x| x.is_finite()) && sd.is_finite() && *sd >= 0.0,
        };
        if !finite {
            return Err(Error::validation("theta0", "must be finite (and sd >= 0)"));
        }
        if !self.override_assumptions {
            let report = self.schedule.validate(land.holder.alpha, f64::INFINITY);
            if !report.h3_ok {
                let why: Vec<&str> = report.messages.iter().filter(|m| m.starts_with("H3")).map(String::as_str).collect();
                return Err(Error::Assumption(why.join("; ")));
            }
        }
        Ok(())
    }
}

/// One recorded step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub n: u64,
    pub theta: Vec<f64>,
    /// `gamma_n`; 0 at `n = 0`.
    pub gamma: f64,
    pub f_gap: f64,
    pub grad_norm: f64,
    pub min_f_gap: f64,
    pub min_gradsq: f64,
    /// `M_n = sum_{k<=n} gamma_k (g_k(theta_{k-1}) - b(theta_{k-1}))`.
    pub martingale: Vec<f64>,
    /// `sum_{k<=n} gamma_k ||grad F(theta_{k-1})||^2`.
    pub sum_gamma_gradsq: f64,
    /// `sum_{k<=n} ||theta_k - theta_{k-1}||^(1+alpha)`.
    pub sum_step_1alpha: f64,
    /// `sum_{k<=n} ||g_k(theta_{k-1})||^2`.
    pub sum_oracle_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub replicate: usize,
    pub seed: u64,
    pub records: Vec<Record>,
    /// Step at which the iterate became non-finite; records stop before it.
    pub diverged_at: Option<u64>,
}

impl Trajectory {
    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectories always record n = 0")
    }

    /// The record with the largest `n <= target`.
    pub fn at_or_before(&self, target: u64) -> Option<&Record> {
        self.records.iter().take_while(|r| r.n <= target).last()
    }

    /// Largest distance between recorded iterates with `n >= from_n`.
    pub fn tail_diameter(&self, from_n: u64) -> Result<f64> {
        let tail: Vec<&[f64]> = self.records.iter().filter(|r| r.n >= from_n).map(|r| r.theta.as_slice()).collect();
        if tail.is_empty() {
            return Err(Error::Domain(format!("no recorded step at or after n = {from_n}")));
        }
        let mut diam: f64 = 0.0;
        for (i, a) in tail.iter().enumerate() {
            for b in &tail[i + 1..] {
                let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                diam = diam.max(d);
            }
        }
        Ok(diam)
    }
}

/// Runs one trajectory; divergence is reported in the trajectory rather than as an error.
pub fn simulate(cfg: &RunConfig, replicate: usize) -> Trajectory {
    let seed = replicate_seed(cfg.seed, replicate);
    let mut rng = stream(seed);
    let oracle = &cfg.oracle;
    let land = oracle.landscape();
    let sch = &cfg.schedule;
    let m = land.dim();
    let alpha = land.holder.alpha;
    let grid = cfg.record_grid.steps(cfg.n_steps);
    let mut next_record = 0usize;

    let mut theta = match &cfg.theta0 {
        Theta0::Point(p) => p.clone(),
        Theta0::Gaussian { center, sd } => center
            .iter()
            .map(|c| {
                let z: f64 = rng.sample(StandardNormal);
                c + sd * z
            })
            .collect(),
    };
    let mut grad = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut martingale = vec![0.0; m];
    let mut sum_gamma_gradsq = CompensatedSum::new();
    let mut sum_step = CompensatedSum::new();
    let mut sum_oracle_sq = CompensatedSum::new();

    let mut value = land.value(&theta);
    land.gradient_into(&theta, &mut grad);
    let mut grad_norm = norm(&grad);
    let mut min_f_gap = value - land.inf_value;
    let mut min_gradsq = grad_norm * grad_norm;
    let mut records = Vec::with_capacity(grid.len());
    let mut gamma = 0.0;
    let mut diverged_at = None;

    for n in 0..=cfg.n_steps {
        if n > 0 {
            gamma = sch.at(n);
            oracle.draw(&theta, value, &grad, &mut rng, &mut g);
            oracle.bias_from_gradient(&grad, &mut b);
            sum_gamma_gradsq.add(gamma * grad_norm * grad_norm);
            let mut step_sq = 0.0;
            let mut g_sq = 0.0;
            for i in 0..m {
                martingale[i] += gamma * (g[i] - b[i]);
                let step = gamma * g[i];
                theta[i] -= step;
                step_sq += step * step;
                g_sq += g[i] * g[i];
            }
            sum_step.add(step_sq.sqrt().powf(1.0 + alpha));
            sum_oracle_sq.add(g_sq);
            value = land.value(&theta);
            land.gradient_into(&theta, &mut grad);
            grad_norm = norm(&grad);
            if !(value.is_finite() && grad_norm.is_finite() && theta.iter().all(|x| x.is_finite())) {
                diverged_at = Some(n);
                break;
            }
            min_f_gap = min_f_gap.min(value - land.inf_value);
            min_gradsq = min_gradsq.min(grad_norm * grad_norm);
        }
        if next_record < grid.len() && grid[next_record] == n {
            next_record += 1;
            records.push(Record {
                n,
                theta: theta.clone(),
                gamma,
                f_gap: value - land.inf_value,
                grad_norm,
                min_f_gap,
                min_gradsq,
                martingale: martingale.clone(),
                sum_gamma_gradsq: sum_gamma_gradsq.value(),
                sum_step_1alpha: sum_step.value(),
                sum_oracle_sq: sum_oracle_sq.value(),
            });
        }
    }
    Trajectory { replicate, seed, records, diverged_at }
}

/// Runs a single validated trajectory (replicate 0, seeded with `cfg.seed`).
pub fn run(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let t = simulate(cfg, 0);
    match t.diverged_at {
        Some(step) => Err(Error::Divergence { step, replicate: None }),
        None => Ok(t),
    }
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub config: RunConfig,
    pub replicates: Vec<Trajectory>,
}

impl Ensemble {
    pub fn first_divergence(&self) -> Option<(usize, u64)> {
        self.replicates.iter().find_map(|t| t.diverged_at.map(|s| (t.replicate, s)))
    }

    /// Steps recorded by every replicate.
    pub fn common_steps(&self) -> Vec<u64> {
        let shortest = self.replicates.iter().min_by_key(|t| t.records.len()).expect("R >= 1");
        shortest.records.iter().map(|r| r.n).collect()
    }

    /// Per-replicate values of `f` at the recorded step nearest to `n`;
    /// returns the step actually used.
    pub fn values_at(&self, n: u64, f: impl Fn(&Record) -> f64) -> (u64, Vec<f64>) {
        let steps = self.common_steps();
        let used = *steps
            .iter()
            .min_by_key(|&&s| s.abs_diff(n))
            .expect("n = 0 is always recorded");
        let vals = self
            .replicates
            .iter()
            .map(|t| f(t.records.iter().find(|r| r.n == used).expect("step is common")))
            .collect();
        (used, vals)
    }
}

/// Runs `r` replicates, in parallel on `jobs` threads (all cores if `None`),
/// keeping trajectories that diverged.
pub fn replicate_all(cfg: &RunConfig, r: usize, jobs: Option<usize>) -> Result<Ensemble> {
    cfg.validate()?;
    if r == 0 {
        return Err(Error::validation("replicates", "must be >= 1"));
    }
    let work = || (0..r).into_par_iter().map(|i| simulate(cfg, i)).collect::<Vec<_>>();
    let replicates = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidParam(format!("cannot build a worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(Ensemble { config: cfg.clone(), replicates })
}

/// Like [`replicate_all`], but fails on the first diverged replicate.
pub fn replicate(cfg: &RunConfig, r: usize) -> Result<Ensemble> {
    let ens = replicate_all(cfg, r, None)?;
    if let Some((rep, step)) = ens.first_divergence() {
        return Err(Error::Divergence { step, replicate: Some(rep) });
    }
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscapes::Landscape;
    use crate::oracles::{OracleKind, OracleSpec};

    fn config(noise: f64, sch: Schedule, theta0: f64, n_steps: u64, seed: u64) -> RunConfig {
        let land = Arc::new(Landscape::catalog("quadratic", &Default::default()).unwrap());
        let oracle = Oracle::new(land, &OracleSpec { kind: OracleKind::Unbiased, bias_scale: 1.0, noise_level: noise }).unwrap();
        RunConfig {
            oracle: Arc::new(oracle),
            schedule: Arc::new(sch),
            theta0: Theta0::Point(vec![theta0]),
            n_steps,
            seed,
            record_grid: RecordGrid::All,
            override_assumptions: true,
        }
    }

    #[test]
    fn deterministic_contraction() {
        let cfg = config(0.0, Schedule::poly(0.5, 0.0, 0.0).unwrap(), 1.0, 3, 0);
        let t = run(&cfg).unwrap();
        assert_eq!(t.last().theta, vec![0.125]);
        assert!(t.records.iter().all(|r| r.martingale == vec![0.0]));
        assert_eq!(t.tail_diameter(1).unwrap(), 0.5 - 0.125);
        assert_eq!(t.tail_diameter(3).unwrap(), 0.0);
        assert!(t.tail_diameter(4).is_err());
    }

    #[test]
    fn assumption_check_unless_overridden() {
        let mut cfg = config(0.0, Schedule::poly(1.0, 0.0, 0.4).unwrap(), 1.0, 10, 0);
        cfg.override_assumptions = false;
        assert!(matches!(run(&cfg), Err(Error::Assumption(_))));
        cfg.override_assumptions = true;
        assert!(run(&cfg).is_ok());
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = config(0.0, Schedule::poly(3.0, 0.0, 0.0).unwrap(), 1.0, 10_000, 0);
        match run(&cfg) {
            Err(Error::Divergence { step, replicate: None }) => assert!(step > 100),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let cfg = config(0.5, Schedule::poly(1.0, 0.0, 1.0).unwrap(), 5.0, 2000, 42);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
        let mut other = cfg.clone();
        other.seed = 43;
        assert_ne!(run(&cfg).unwrap().last().theta, run(&other).unwrap().last().theta);
    }

    #[test]
    fn single_replicate_equals_run() {
        let cfg = config(0.5, Schedule::poly(1.0, 0.0, 1.0).unwrap(), 5.0, 500, 9);
        let ens = replicate(&cfg, 1).unwrap();
        assert_eq!(ens.replicates[0], run(&cfg).unwrap());
    }

    #[test]
    fn replicates_draw_distinct_noise() {
        let cfg = config(0.5, Schedule::poly(1.0, 0.0, 1.0).unwrap(), 5.0, 1, 9);
        let ens = replicate(&cfg, 8).unwrap();
        let firsts: Vec<f64> = ens.replicates.iter().map(|t| t.records[1].theta[0]).collect();
        for i in 0..8 {
            for j in i + 1..8 {
                assert_ne!(firsts[i], firsts[j]);
            }
        }
        let parallel = replicate_all(&cfg, 8, Some(3)).unwrap();
        assert_eq!(parallel.replicates, ens.replicates);
    }

    #[test]
    fn zero_noise_replicates_coincide() {
        let cfg = config(0.0, Schedule::poly(1.0, 0.0, 1.0).unwrap(), 5.0, 300, 1);
        let ens = replicate(&cfg, 5).unwrap();
        for t in &ens.replicates[1..] {
            assert_eq!(t.records, ens.replicates[0].records);
        }
    }

    #[test]
    fn records_match_closed_forms_and_accumulators_grow() {
        let mut cfg = config(0.3, Schedule::poly(1.0, 0.0, 1.0).unwrap(), 5.0, 100_000, 3);
        cfg.record_grid = RecordGrid::default();
        let t = run(&cfg).unwrap();
        let land = cfg.oracle.landscape();
        let mut prev: Option<&Record> = None;
        for r in &t.records {
            assert_eq!(r.f_gap, land.value(&r.theta) - land.inf_value);
            assert_eq!(r.grad_norm, norm(&land.gradient(&r.theta)));
            if let Some(p) = prev {
                assert!(r.n > p.n);
                assert!(r.min_f_gap <= p.min_f_gap && r.min_gradsq <= p.min_gradsq);
                assert!(r.sum_gamma_gradsq >= p.sum_gamma_gradsq && r.sum_step_1alpha >= p.sum_step_1alpha);
            }
            prev = Some(r);
        }
        assert!(t.records.iter().any(|r| r.n == 50_000));
        assert!(t.records.len() < 200);
    }

    #[test]
    fn log_grid_contents() {
        let steps = RecordGrid::LogSpaced(4).steps(1000);
        assert_eq!(steps[..3], [0, 1, 2]);
        assert!(steps.contains(&500) && steps.contains(&1000) && steps.contains(&100));
        assert!(steps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn quadratic_reaches_small_gap() {
        let mut good = 0;
        for seed in 0..100 {
            let mut cfg = config(0.1, Schedule::poly(1.0, 0.0, 1.0).unwrap(), 5.0, 100_000, seed);
            cfg.record_grid = RecordGrid::LogSpaced(4);
            if run(&cfg).unwrap().last().f_gap < 1e-2 {
                good += 1;
            }
        }
        assert!(good >= 95, "{good}");
    }
}
