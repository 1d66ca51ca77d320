//! Strict JSON experiment configs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{RecordGrid, RunConfig, Theta0};
use crate::error::{Error, Result};
use crate::landscapes::{Landscape, CATALOG_NAMES};
use crate::oracles::{Oracle, OracleSpec};
use crate::rates::{ProblemConstants, Quantity, Regime};
use crate::schedules::{Schedule, ScheduleSpec};

pub const COMPUTE_CEILING_VAR: &str = "SGDLAB_COMPUTE_CEILING";
pub const DEFAULT_COMPUTE_CEILING: u64 = 1_000_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeRef {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `(1 - delta)` ensemble quantile.
    #[default]
    Quantile,
    Mean,
}

/// Per-check overrides of the constants read off the landscape and oracle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_decades() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCheck {
    pub quantity: Quantity,
    pub regime: Regime,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Largest `rho` with `gamma_n = O((sum gamma)^-rho)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Slack added to the negated predicted exponent.
    pub tolerance: f64,
    #[serde(default)]
    pub constants: ConstantsOverride,
    /// Fit over the last `decades` decades of `n`.
    #[serde(default = "default_decades")]
    pub decades: f64,
}

/// The on-disk document. `manifest.json` echoes it with the effective seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub landscape: LandscapeRef,
    pub oracle: OracleSpec,
    pub schedule: ScheduleSpec,
    pub theta0: Theta0,
    pub n_steps: u64,
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub record_grid: RecordGrid,
    #[serde(default)]
    pub override_assumptions: bool,
    #[serde(default)]
    pub rate_checks: Vec<RateCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub file: ConfigFile,
    pub run: RunConfig,
    pub replicates: usize,
    pub checks: Vec<RateCheck>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Constants for a check: landscape and oracle values, then overrides.
    pub fn constants(&self, check: &RateCheck) -> ProblemConstants {
        let land = self.run.oracle.landscape();
        let cert = land.certs.first();
        let o = check.constants;
        ProblemConstants {
            alpha: o.alpha.unwrap_or(land.holder.alpha),
            l: o.l.unwrap_or(land.holder.l),
            beta: o.beta.or(cert.map(|c| c.beta)).unwrap_or(f64::NAN),
            zeta: o.zeta.or(cert.map(|c| c.zeta)).unwrap_or(f64::NAN),
            kappa: o.kappa.unwrap_or(self.run.oracle.constants.kappa),
        }
    }

    pub fn rho(&self, check: &RateCheck) -> f64 {
        check.rho.unwrap_or_else(|| self.run.schedule.rho_sup())
    }
}

pub fn compute_ceiling() -> Result<u64> {
    match std::env::var(COMPUTE_CEILING_VAR) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|x| *x >= 1.0 && x.is_finite())
            .map(|x| x as u64)
            .ok_or_else(|| Error::validation(COMPUTE_CEILING_VAR, format!("expected a positive step count, got `{v}`"))),
        Err(_) => Ok(DEFAULT_COMPUTE_CEILING),
    }
}

/// Parses and fully validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let file: ConfigFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(if path == "." { "config".to_string() } else { path }, e.into_inner().to_string())
    })?;
    build(file)
}

pub fn build(file: ConfigFile) -> Result<ExperimentConfig> {
    let name = &file.landscape.name;
    if !CATALOG_NAMES.contains(&name.as_str()) {
        return Err(Error::validation(
            "landscape.name",
            format!("unknown landscape `{name}`; expected one of {}", CATALOG_NAMES.join(", ")),
        ));
    }
    let land = Landscape::catalog(name, &file.landscape.params).map_err(|e| Error::validation("landscape.params", e.to_string()))?;
    let oracle = Oracle::new(Arc::new(land), &file.oracle).map_err(|e| Error::validation("oracle", e.to_string()))?;
    let schedule = Schedule::new(file.schedule.clone()).map_err(|e| Error::validation("schedule", e.to_string()))?;
    if file.replicates == 0 {
        return Err(Error::validation("replicates", "must be >= 1"));
    }
    let ceiling = compute_ceiling()?;
    let total = file.n_steps.saturating_mul(file.replicates as u64);
    if total > ceiling {
        return Err(Error::validation(
            "n_steps",
            format!("n_steps * replicates = {total} exceeds the compute ceiling {ceiling} (set {COMPUTE_CEILING_VAR} to raise it)"),
        ));
    }
    if let RecordGrid::LogSpaced(0) = file.record_grid {
        return Err(Error::validation("record_grid", "log_spaced needs at least one point per decade"));
    }
    for (i, c) in file.rate_checks.iter().enumerate() {
        let field = |f: &str| format!("rate_checks[{i}].{f}");
        if !(c.delta > 0.0 && c.delta < 1.0) {
            return Err(Error::validation(field("delta"), format!("must lie in (0, 1), got {}", c.delta)));
        }
        if !c.tolerance.is_finite() {
            return Err(Error::validation(field("tolerance"), "must be finite"));
        }
        if !(c.decades > 0.0 && c.decades.is_finite()) {
            return Err(Error::validation(field("decades"), "must be > 0"));
        }
        if let Some(rho) = c.rho {
            if !(rho > 0.0) {
                return Err(Error::validation(field("rho"), format!("must be > 0, got {rho}")));
            }
        }
    }
    let run = RunConfig {
        oracle: Arc::new(oracle),
        schedule: Arc::new(schedule),
        theta0: file.theta0.clone(),
        n_steps: file.n_steps,
        seed: file.base_seed,
        record_grid: file.record_grid,
        override_assumptions: file.override_assumptions,
    };
    run.validate()?;
    Ok(ExperimentConfig {
        replicates: file.replicates,
        checks: file.rate_checks.clone(),
        output_dir: file.output_dir.clone(),
        run,
        file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "landscape": {"name": "quadratic"},
        "oracle": {"kind": "unbiased", "noise_level": 0.5},
        "schedule": {"family": "poly", "gamma0": 1.0, "s": 1.0},
        "theta0": [5.0],
        "n_steps": 10000,
        "replicates": 4,
        "base_seed": 7
    }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.replicates, 4);
        assert_eq!(cfg.run.record_grid, RecordGrid::LogSpaced(32));
        assert!(cfg.checks.is_empty());
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = "{\n  \"landscape\": {\"name\": \"quadratic\"},\n  \"oracle\": ,\n}";
        match parse_config(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_landscape_names_the_field() {
        let text = MINIMAL.replace("quadratic", "banana");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "landscape.name"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"s\": 1.0", "\"s\": 1.0, \"decay\": 2");
        match parse_config(&text) {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "schedule.decay");
                assert!(message.contains("decay"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slow_schedule_is_an_assumption_error() {
        let text = MINIMAL.replace("\"s\": 1.0", "\"s\": 0.4");
        match parse_config(&text) {
            Err(Error::Assumption(msg)) => assert!(msg.starts_with("H3"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let text = text.replace("\"base_seed\": 7", "\"base_seed\": 7, \"override_assumptions\": true");
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn bad_check_fields_are_named() {
        let text = MINIMAL.replace(
            "\"base_seed\": 7",
            "\"base_seed\": 7, \"rate_checks\": [{\"quantity\": \"f_gap\", \"regime\": \"global\", \"delta\": 1.5, \"tolerance\": 0.2}]",
        );
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "rate_checks[0].delta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        let echoed = serde_json::to_string(&cfg.file).unwrap();
        assert_eq!(parse_config(&echoed).unwrap().file, cfg.file);
    }
}
