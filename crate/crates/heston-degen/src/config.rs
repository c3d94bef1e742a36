//! Run configuration: `key = value` lines in `[model]`, `[weights]`,
//! `[grid]`, and `[run]` sections. Unknown keys are errors; parse errors
//! carry line numbers.

use crate::error::{Error, Result};
use crate::evolution::{Payoff, Scheme};
use crate::grid::Grid2D;
use crate::params::{default_weights, validate, ModelParams, ValidityReport, WeightParams};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sigma: f64,
    pub kappa: f64,
    pub theta: f64,
    pub rho: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub lambda_risk: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub gamma: f64,
    /// Defaults to `min(2 kappa theta / sigma^2, beta_bound - slack)`.
    pub beta: Option<f64>,
    /// Defaults to `mu_max = kappa / sigma - gamma |rho|`.
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub nxi: usize,
    /// Defaults to `ln K - 6`.
    pub x_min: Option<f64>,
    /// Defaults to `ln K + 6`.
    pub x_max: Option<f64>,
    /// Defaults to `5 theta / sigma` (post-absorption theta).
    pub xi_max: Option<f64>,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_grading() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub payoff: String,
    pub strike: f64,
    pub t_final: f64,
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default)]
    pub output_every: usize,
    /// Initial variance for the oracles and the default evaluation point.
    pub v0: f64,
    /// Evaluation points `(x0, xi0)`; defaults to the single at-the-money
    /// point `(0, v0 / sigma)`.
    pub eval_points: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_paths")]
    pub mc_paths: usize,
    #[serde(default = "default_mc_steps")]
    pub mc_steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub antithetic: bool,
}

fn default_scheme() -> String {
    "implicit-euler".into()
}
fn default_paths() -> usize {
    100_000
}
fn default_mc_steps() -> usize {
    256
}
fn default_seed() -> u64 {
    42
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelSection,
    pub weights: WeightsSection,
    pub grid: GridSection,
    pub run: RunSection,
}

/// Fully resolved configuration: risk premium absorbed, weight and grid
/// defaults applied, gates evaluated.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Parameters as loaded (before absorption), kept for reporting.
    pub raw_params: ModelParams,
    /// Post-absorption parameters every module consumes.
    pub params: ModelParams,
    pub weights: WeightParams,
    pub grid: Arc<Grid2D>,
    pub report: ValidityReport,
    pub payoff: Payoff,
    pub scheme: Scheme,
    pub strike: f64,
    pub t_final: f64,
    pub steps: usize,
    pub output_every: usize,
    pub v0: f64,
    pub eval_points: Vec<[f64; 2]>,
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Deterministic snapshot of the resolved inputs.
    pub snapshot: String,
}

pub fn parse_config(text: &str) -> Result<RawConfig> {
    toml::from_str::<RawConfig>(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &std::path::Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn resolve(raw: &RawConfig) -> Result<Resolved> {
    let raw_params = ModelParams {
        sigma: raw.model.sigma,
        kappa: raw.model.kappa,
        theta: raw.model.theta,
        rho: raw.model.rho,
        r: raw.model.r,
        q: raw.model.q,
        lambda_risk: raw.model.lambda_risk,
    };
    raw_params.check()?;
    let params = raw_params.absorb_risk_premium();

    let weights = match (raw.weights.beta, raw.weights.mu) {
        (Some(beta), Some(mu)) => WeightParams { beta, gamma: raw.weights.gamma, mu },
        _ => {
            let d = default_weights(&params, raw.weights.gamma)?;
            WeightParams {
                beta: raw.weights.beta.unwrap_or(d.beta),
                gamma: raw.weights.gamma,
                mu: raw.weights.mu.unwrap_or(d.mu),
            }
        }
    };
    let report = validate(&params, &weights)?;

    if !(raw.run.strike > 0.0) {
        return Err(Error::Config(format!("strike {} must be > 0", raw.run.strike)));
    }
    let ln_k = raw.run.strike.ln();
    let x_min = raw.grid.x_min.unwrap_or(ln_k - 6.0);
    let x_max = raw.grid.x_max.unwrap_or(ln_k + 6.0);
    let xi_max = raw.grid.xi_max.unwrap_or(5.0 * params.theta / params.sigma);
    let grid = Arc::new(Grid2D::new(x_min, x_max, raw.grid.nx, xi_max, raw.grid.nxi, raw.grid.grading)?);

    let payoff = match raw.run.payoff.as_str() {
        "call" => Payoff::Call,
        "put" => Payoff::Put,
        other => {
            return Err(Error::Config(format!(
                "unknown payoff '{other}' (expected call or put)"
            )))
        }
    };
    let scheme = match raw.run.scheme.as_str() {
        "implicit-euler" => Scheme::ImplicitEuler,
        "crank-nicolson" => Scheme::CrankNicolson,
        other => {
            return Err(Error::Config(format!(
                "unknown scheme '{other}' (expected implicit-euler or crank-nicolson)"
            )))
        }
    };
    if !(raw.run.v0 >= 0.0) {
        return Err(Error::Config(format!("v0 = {} must be >= 0", raw.run.v0)));
    }
    let eval_points = raw
        .run
        .eval_points
        .clone()
        .unwrap_or_else(|| vec![[0.0, raw.run.v0 / params.sigma]]);

    let snapshot = toml::to_string(raw).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Resolved {
        raw_params,
        params,
        weights,
        grid,
        report,
        payoff,
        scheme,
        strike: raw.run.strike,
        t_final: raw.run.t_final,
        steps: raw.run.steps,
        output_every: raw.run.output_every,
        v0: raw.run.v0,
        eval_points,
        mc_paths: raw.run.mc_paths,
        mc_steps: raw.run.mc_steps,
        seed: raw.run.seed,
        antithetic: raw.run.antithetic,
        snapshot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
[model]
sigma = 0.2
kappa = 2.0
theta = 0.04
rho = -0.5

[weights]
gamma = 2.5

[grid]
nx = 40
nxi = 32

[run]
payoff = "call"
strike = 1.0
t_final = 1.0
steps = 16
v0 = 0.04
"#;

    #[test]
    fn parses_and_resolves_sample() {
        let raw = parse_config(SAMPLE).unwrap();
        let r = resolve(&raw).unwrap();
        assert!(r.report.admissible());
        assert!((r.weights.mu - 8.75).abs() < 1e-12);
        assert_eq!(r.eval_points.len(), 1);
        assert_eq!(r.eval_points[0][0], 0.0);
        assert!((r.eval_points[0][1] - 0.2).abs() < 1e-12);
        assert!((r.grid.xi_nodes.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_is_an_error_with_location() {
        let bad = SAMPLE.replace("gamma = 2.5", "gamma = 2.5\nbogus_key = 1.0");
        let err = parse_config(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key"), "{msg}");
        assert!(msg.contains("line"), "no line info: {msg}");
    }

    #[test]
    fn malformed_value_reports_line() {
        let bad = SAMPLE.replace("sigma = 0.2", "sigma = oops");
        let err = parse_config(&bad).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn lambda_absorption_applies() {
        let with_lambda = SAMPLE.replace("rho = -0.5", "rho = -0.5\nlambda_risk = 1.0");
        let raw = parse_config(&with_lambda).unwrap();
        let r = resolve(&raw).unwrap();
        assert_eq!(r.params.kappa, 3.0);
        assert_eq!(r.params.lambda_risk, 0.0);
        assert!((r.params.kappa * r.params.theta - 0.08).abs() < 1e-15);
    }

    #[test]
    fn snapshot_is_deterministic() {
        let raw = parse_config(SAMPLE).unwrap();
        let a = resolve(&raw).unwrap().snapshot;
        let b = resolve(&raw).unwrap().snapshot;
        assert_eq!(a, b);
    }
}
