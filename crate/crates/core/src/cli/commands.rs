use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use super::config::{self, ExperimentConfig};
use super::experiment::{self, EXIT_DIVERGENCE, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};
use super::{AuditArgs, BudgetArgs, Command, RatesArgs, RunArgs, SelftestArgs};
use crate::audit::{self, AuditOptions};
use crate::error::{Error, Result};
use crate::kernels;
use crate::landscapes::Landscape;
use crate::oracles::{Oracle, OracleSpec};
use crate::rates::{self, BudgetParams, ProblemConstants};
use crate::rng::stream;
use crate::schedules::{Schedule, ScheduleSpec};
use crate::series;

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_USAGE,
    }
}

pub fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run(a) => run(a),
        Command::Rates(a) => rates_cmd(a),
        Command::Budget(a) => budget(a),
        Command::Audit(a) => audit_cmd(a),
        Command::KernelsSelftest(a) => selftest(a),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v).map_err(std::io::Error::from)?);
    Ok(())
}

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let cfg = config::parse_config(&text)?;
    match seed {
        Some(s) => {
            let mut file = cfg.file;
            file.base_seed = s;
            config::build(file)
        }
        None => Ok(cfg),
    }
}

fn run(a: RunArgs) -> Result<i32> {
    let cfg = load_config(&a.config, a.seed)?;
    let out = a
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::validation("output_dir", "give --out or set output_dir in the config"))?;
    let report = experiment::run_experiment(&cfg, &out, a.jobs)?;
    for c in &report.checks {
        let slope = c.fit.as_ref().map(|f| format!("{:.4}", f.slope)).unwrap_or_else(|| "-".into());
        let predicted = c.fit_exponent.map(|e| format!("{:.4}", -e)).unwrap_or_else(|| "-".into());
        eprintln!(
            "{:?}/{:?}: slope {slope}, predicted {predicted}, {:?}{}",
            c.check.quantity,
            c.check.regime,
            c.verdict,
            c.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default()
        );
    }
    if let Some(d) = report.divergence {
        eprintln!("replicate {} diverged at step {}; outputs are partial", d.replicate, d.step);
    }
    Ok(report.exit_code)
}

fn rates_cmd(a: RatesArgs) -> Result<i32> {
    let cfg = load_config(&a.config, None)?;
    let rows = series::read_csv(BufReader::new(fs::File::open(&a.series)?))?;
    let report = experiment::evaluate(&cfg, &rows)?;
    match a.out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            experiment::write_json(&dir.join("report.json"), &report)?;
        }
        None => print_json(&report)?,
    }
    Ok(report.exit_code)
}

fn budget(a: BudgetArgs) -> Result<i32> {
    let sch = Schedule::new(ScheduleSpec {
        family: a.family.into(),
        gamma0: a.gamma0,
        c: a.c,
        cprime: a.cprime,
        s: a.s,
        alpha: a.alpha,
    })?;
    let params = BudgetParams {
        constants: ProblemConstants { alpha: a.alpha, l: a.l, beta: a.beta, zeta: a.zeta, kappa: a.kappa },
        rho: a.rho.unwrap_or_else(|| sch.rho_sup()),
        regime: a.regime.into(),
        quantity: a.quantity.into(),
        sigma: a.sigma,
    };
    print_json(&rates::budget(a.eps, a.delta, &params, &sch)?)?;
    Ok(EXIT_PASS)
}

fn audit_cmd(a: AuditArgs) -> Result<i32> {
    let oracle = match &a.config {
        Some(path) => load_config(path, None)?.run.oracle,
        None => {
            let name = a.landscape.as_deref().expect("clap requires --landscape without --config");
            let land = Landscape::catalog(name, &a.param.iter().cloned().collect())?;
            let spec = OracleSpec { kind: a.oracle.into(), bias_scale: a.bias_scale, noise_level: a.noise };
            Arc::new(Oracle::new(Arc::new(land), &spec)?)
        }
    };
    let opts = AuditOptions {
        half_width: a.half_width,
        radius: a.radius,
        n_pairs: a.n_pairs,
        n_points: a.n_points,
        n_draws: a.n_draws,
        ..Default::default()
    };
    print_json(&audit::audit(&oracle, &opts, &mut stream(a.seed))?)?;
    Ok(EXIT_PASS)
}

fn selftest(a: SelftestArgs) -> Result<i32> {
    let lines = kernels::selftest(a.seed, a.samples);
    for l in &lines {
        println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
    }
    Ok(if lines.iter().all(|l| l.passed) { EXIT_PASS } else { EXIT_FAIL })
}
