//! Running a config end to end and judging its rate checks.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, RateCheck, Statistic};
use crate::engine::replicate_all;
use crate::error::{Error, Result};
use crate::rates::{self, Base, PredictedRate, Quantity, RateFit, Verdict};
use crate::rng::replicate_seed;
use crate::series::{self, Row};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub check: RateCheck,
    pub predicted: PredictedRate,
    /// Base and exponent the fit was compared against.
    pub fit_base: Option<Base>,
    pub fit_exponent: Option<f64>,
    pub fit: Option<RateFit>,
    pub verdict: Verdict,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub status: Verdict,
    pub exit_code: i32,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceInfo>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DivergenceInfo {
    pub replicate: usize,
    pub step: u64,
}

/// Per-replicate rows keyed by replicate, in step order.
fn by_replicate(rows: &[Row]) -> BTreeMap<usize, Vec<&Row>> {
    let mut m: BTreeMap<usize, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        m.entry(r.rep).or_default().push(r);
    }
    for v in m.values_mut() {
        v.sort_by_key(|r| r.n);
    }
    m
}

fn column(cfg: &ExperimentConfig, q: Quantity) -> std::result::Result<fn(&Row) -> f64, String> {
    let land = cfg.run.oracle.landscape();
    match q {
        Quantity::FGap | Quantity::MinFGap if land.critical_levels().len() > 1 => {
            Err("several critical levels: the limit value F_star is ambiguous".into())
        }
        Quantity::FGap => Ok(|r| r.f_gap),
        Quantity::MinFGap => Ok(|r| r.min_f_gap),
        Quantity::MinGradSq => Ok(|r| r.min_gradsq),
        Quantity::IterateGap => {
            let origin = land.stationary_points.len() == 1 && land.stationary_points[0].iter().all(|x| *x == 0.0);
            if origin {
                Ok(|r| r.theta_norm)
            } else {
                Err("iterate gaps are only tracked when the unique stationary point is the origin".into())
            }
        }
    }
}

/// Ensemble statistic of `f` at every step present in all replicates.
fn statistic_series(rows: &[Row], f: fn(&Row) -> f64, stat: Statistic, delta: f64) -> Result<Vec<(u64, f64)>> {
    let reps = by_replicate(rows);
    let shortest = reps.values().min_by_key(|v| v.len()).ok_or_else(|| Error::InsufficientData("no rows".into()))?;
    let mut out = Vec::with_capacity(shortest.len());
    for r0 in shortest {
        let vals: Vec<f64> = reps
            .values()
            .filter_map(|v| v.iter().find(|r| r.n == r0.n).map(|r| f(r)))
            .collect();
        if vals.len() != reps.len() {
            continue;
        }
        let v = match stat {
            Statistic::Quantile => rates::nearest_rank_quantile(&vals, delta)?,
            Statistic::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
        };
        out.push((r0.n, v));
    }
    Ok(out)
}

pub fn evaluate_check(cfg: &ExperimentConfig, rows: &[Row], check: &RateCheck) -> Result<CheckOutcome> {
    let sch = &cfg.run.schedule;
    let k = cfg.constants(check);
    let predicted = rates::predict(check.quantity, &k, sch, cfg.rho(check), check.sigma, check.regime);
    let mut out = CheckOutcome {
        check: check.clone(),
        predicted: predicted.clone(),
        fit_base: None,
        fit_exponent: None,
        fit: None,
        verdict: Verdict::Inconclusive,
        reason: None,
    };
    let f = match column(cfg, check.quantity) {
        Ok(f) => f,
        Err(why) => {
            out.reason = Some(why);
            return Ok(out);
        }
    };
    if !predicted.valid {
        let failed: Vec<&str> =
            predicted.side_conditions.iter().filter(|c| !c.satisfied).map(|c| c.description.as_str()).collect();
        out.reason = Some(format!("prediction outside its hypotheses: {}", failed.join("; ")));
        return Ok(out);
    }
    let (base, exponent) = predicted.over_n(sch).unwrap_or((predicted.base, predicted.exponent));
    out.fit_base = Some(base);
    out.fit_exponent = Some(exponent);
    let series = statistic_series(rows, f, check.statistic, check.delta)?;
    let n_max = series.last().map(|p| p.0).unwrap_or(0);
    match rates::fit_decay(&series, rates::tail_window(n_max, check.decades), base, sch) {
        Ok(fit) => {
            out.verdict = rates::judge(&fit, exponent, check.tolerance);
            out.fit = Some(fit);
        }
        Err(Error::InsufficientData(why)) => out.reason = Some(why),
        Err(e) => return Err(e),
    }
    Ok(out)
}

pub fn evaluate(cfg: &ExperimentConfig, rows: &[Row]) -> Result<Report> {
    let checks = cfg.checks.iter().map(|c| evaluate_check(cfg, rows, c)).collect::<Result<Vec<_>>>()?;
    let status = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    let exit_code = match status {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    Ok(Report { status, exit_code, checks, divergence: None })
}

#[derive(Serialize)]
struct Manifest<'a> {
    /// Feeding this back to `sgdlab run` reproduces series.csv.
    config: &'a super::config::ConfigFile,
    replicate_seeds: Vec<u64>,
    versions: BTreeMap<&'static str, &'static str>,
    jobs: Option<usize>,
    wall_time_s: f64,
    partial: bool,
    files: [&'static str; 3],
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Runs the ensemble, writes series.csv, report.json and manifest.json into
/// `out_dir`, and returns the report.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, jobs: Option<usize>) -> Result<Report> {
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let ens = replicate_all(&cfg.run, cfg.replicates, jobs)?;
    let rows = series::rows(&ens);
    {
        let mut w = BufWriter::new(fs::File::create(out_dir.join("series.csv"))?);
        writeln!(w, "{}", series::HEADER)?;
        for r in &rows {
            series::write_row(&mut w, r)?;
        }
        w.flush()?;
    }
    let report = match ens.first_divergence() {
        Some((replicate, step)) => Report {
            status: Verdict::Inconclusive,
            exit_code: EXIT_DIVERGENCE,
            checks: Vec::new(),
            divergence: Some(DivergenceInfo { replicate, step }),
        },
        None => evaluate(cfg, &rows)?,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    let manifest = Manifest {
        config: &cfg.file,
        replicate_seeds: (0..cfg.replicates).map(|i| replicate_seed(cfg.run.seed, i)).collect(),
        versions: BTreeMap::from([("sgdlab", env!("CARGO_PKG_VERSION")), ("series_format", "1")]),
        jobs,
        wall_time_s: start.elapsed().as_secs_f64(),
        partial: report.divergence.is_some(),
        files: ["series.csv", "report.json", "manifest.json"],
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(report)
}
