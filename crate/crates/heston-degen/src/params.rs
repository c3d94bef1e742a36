//! Model and weight constants plus the admissibility gates every run must
//! pass before the solver is allowed to assemble anything.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Strict upper bound on the weight exponent `beta` required by the
/// regularity theory: `beta < (1 + sqrt(17)) / 2`.
pub fn beta_upper_bound() -> f64 {
    (1.0 + 17f64.sqrt()) / 2.0
}

/// Slack below the strict `beta` bound used when deriving default weights,
/// so the default always satisfies the strict inequality.
pub const BETA_SLACK: f64 = 1e-3;

/// Heston model constants. `q_r = q - r` is the drift abbreviation used by
/// the spatial operator; `theta_sigma = theta / sigma` is the rescaled
/// long-run variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Volatility of volatility (> 0).
    pub sigma: f64,
    /// Mean-reversion rate (> 0).
    pub kappa: f64,
    /// Long-run variance (> 0).
    pub theta: f64,
    /// Correlation between price and variance noise, in (-1, 1).
    pub rho: f64,
    /// Short rate.
    pub r: f64,
    /// Dividend yield.
    pub q: f64,
    /// Price of volatility risk (>= 0).
    pub lambda_risk: f64,
}

impl ModelParams {
    /// Drift abbreviation `q - r`.
    pub fn q_r(&self) -> f64 {
        self.q - self.r
    }

    /// Rescaled long-run variance `theta / sigma`.
    pub fn theta_sigma(&self) -> f64 {
        self.theta / self.sigma
    }

    /// Checks field-level invariants, returning the violation list on error.
    pub fn check(&self) -> Result<()> {
        let mut violations = Vec::new();
        let fields = [
            ("sigma", self.sigma),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("rho", self.rho),
            ("r", self.r),
            ("q", self.q),
            ("lambda_risk", self.lambda_risk),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                violations.push(format!("{name} is not finite"));
            }
        }
        if self.sigma <= 0.0 {
            violations.push(format!("sigma = {} must be > 0", self.sigma));
        }
        if self.kappa <= 0.0 {
            violations.push(format!("kappa = {} must be > 0", self.kappa));
        }
        if self.theta <= 0.0 {
            violations.push(format!("theta = {} must be > 0", self.theta));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            violations.push(format!("rho = {} must lie in (-1, 1)", self.rho));
        }
        if self.lambda_risk < 0.0 {
            violations.push(format!("lambda_risk = {} must be >= 0", self.lambda_risk));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(violations.join("; ")))
        }
    }

    /// Absorbs the volatility risk premium into the mean-reversion pair:
    /// `kappa* = kappa + lambda`, `theta* = kappa theta / (kappa + lambda)`,
    /// preserving the product `kappa* theta* = kappa theta`. After this the
    /// operator sees `lambda = 0`; the short rate stays stored because the
    /// spatial operator only reads `q_r` and price commands still need
    /// `e^{-rT}` discounting.
    pub fn absorb_risk_premium(&self) -> ModelParams {
        let kappa_star = self.kappa + self.lambda_risk;
        let theta_star = self.kappa * self.theta / kappa_star;
        ModelParams {
            kappa: kappa_star,
            theta: theta_star,
            lambda_risk: 0.0,
            ..*self
        }
    }
}

/// Weight exponents of `w(x, xi) = xi^(beta-1) e^(-gamma |x| - mu xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    /// xi-exponent (> 1 so the weight vanishes at the boundary).
    pub beta: f64,
    /// x-decay rate (> 0).
    pub gamma: f64,
    /// xi-decay rate (> 0).
    pub mu: f64,
}

impl WeightParams {
    /// Largest admissible `mu` at this `gamma`: `kappa/sigma - gamma |rho|`.
    pub fn mu_max(params: &ModelParams, gamma: f64) -> f64 {
        params.kappa / params.sigma - gamma * params.rho.abs()
    }

    pub fn check(&self) -> Result<()> {
        let mut violations = Vec::new();
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("mu", self.mu)] {
            if !v.is_finite() {
                violations.push(format!("{name} is not finite"));
            }
        }
        if self.gamma <= 0.0 {
            violations.push(format!("gamma = {} must be > 0", self.gamma));
        }
        if self.mu <= 0.0 {
            violations.push(format!("mu = {} must be > 0", self.mu));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(violations.join("; ")))
        }
    }
}

/// Default weight rule: `mu = mu_max`, `beta` as large as the regularity
/// window allows, capped just below the strict theorem bound.
pub fn default_weights(params: &ModelParams, gamma: f64) -> Result<WeightParams> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma = {gamma} must be > 0")));
    }
    let mu = WeightParams::mu_max(params, gamma);
    if mu <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "mu_max = kappa/sigma - gamma|rho| = {mu} <= 0: coercivity impossible at gamma = {gamma}"
        )));
    }
    let beta_df = 2.0 * params.kappa * params.theta / (params.sigma * params.sigma);
    let beta = beta_df.min(beta_upper_bound() - BETA_SLACK);
    Ok(WeightParams { beta, gamma, mu })
}

/// A gate together with its signed margin; the flag is `margin >= 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Gate {
    pub ok: bool,
    pub margin: f64,
}

impl Gate {
    fn from_margin(margin: f64) -> Gate {
        Gate { ok: margin >= 0.0, margin }
    }
}

/// Outcome of every admissibility inequality, with signed margins so tests
/// can probe tightness.
#[derive(Debug, Clone, Serialize)]
pub struct ValidityReport {
    /// Feller condition `kappa theta - sigma^2 / 2 > 0`.
    pub feller: Gate,
    /// Coercivity condition `kappa - sigma (gamma |rho| + sqrt(gamma(1+gamma))) >= 0`.
    pub coercivity: Gate,
    /// `1 < beta <= 2 kappa theta / sigma^2` and `beta < (1 + sqrt(17))/2`.
    pub beta_window_ok: bool,
    /// Distance of beta above its lower bound 1 (must be > 0).
    pub beta_margin_low: f64,
    /// Distance of `2 kappa theta / sigma^2` above beta (must be >= 0).
    pub beta_margin_df: f64,
    /// Distance of the strict theorem bound above beta (must be > 0).
    pub beta_margin_thm: f64,
    /// The strict upper bound `(1 + sqrt(17))/2` the gate compares against.
    pub beta_upper: f64,
    /// Call payoff membership in H needs `gamma > 2`.
    pub gamma_call_ok: bool,
    pub gamma_call_margin: f64,
    /// Admissible interval `[0, varpi_max]` for the comparison exponent
    /// varpi, instantiated with `r0 = r` and `mu0 = mu`.
    pub varpi_max: f64,
}

impl ValidityReport {
    /// A configuration is admissible iff the Feller, coercivity, and beta
    /// window gates all hold.
    pub fn admissible(&self) -> bool {
        self.feller.ok && self.coercivity.ok && self.beta_window_ok
    }

    pub fn summary(&self) -> String {
        format!(
            "feller: {} (margin {:.6e})\n\
             coercivity: {} (margin {:.6e})\n\
             beta window: {} (low {:.6e}, df {:.6e}, thm {:.6e}, bound {:.16})\n\
             gamma > 2 (call payoff): {} (margin {:.6e})\n\
             varpi window: [0, {:.6e}]\n\
             admissible: {}",
            self.feller.ok,
            self.feller.margin,
            self.coercivity.ok,
            self.coercivity.margin,
            self.beta_window_ok,
            self.beta_margin_low,
            self.beta_margin_df,
            self.beta_margin_thm,
            self.beta_upper,
            self.gamma_call_ok,
            self.gamma_call_margin,
            self.varpi_max,
            self.admissible()
        )
    }
}

/// Evaluates every admissibility gate for the pair (params, weights).
pub fn validate(params: &ModelParams, weights: &WeightParams) -> Result<ValidityReport> {
    params.check()?;
    weights.check()?;

    let feller = Gate::from_margin(params.kappa * params.theta - 0.5 * params.sigma * params.sigma);
    let g = weights.gamma;
    let coercivity = Gate::from_margin(
        params.kappa - params.sigma * (g * params.rho.abs() + (g * (1.0 + g)).sqrt()),
    );

    let beta_df_bound = 2.0 * params.kappa * params.theta / (params.sigma * params.sigma);
    let beta_upper = beta_upper_bound();
    let beta_margin_low = weights.beta - 1.0;
    let beta_margin_df = beta_df_bound - weights.beta;
    let beta_margin_thm = beta_upper - weights.beta;
    let beta_window_ok = beta_margin_low > 0.0 && beta_margin_df >= 0.0 && weights.beta < beta_upper;

    let gamma_call_margin = g - 2.0;

    // Ineq. caps on varpi with r0 = r and mu0 = mu: 0 <= varpi < mu and
    // varpi <= min{(r0+q_r)/(kappa theta_sigma), 2(kappa - sigma rho)/sigma}.
    let cap_drift = (params.r + params.q_r()) / (params.kappa * params.theta_sigma());
    let cap_corr = 2.0 * (params.kappa - params.sigma * params.rho) / params.sigma;
    let varpi_max = weights.mu.min(cap_drift).min(cap_corr).max(0.0);

    Ok(ValidityReport {
        feller,
        coercivity,
        beta_window_ok,
        beta_margin_low,
        beta_margin_df,
        beta_margin_thm,
        beta_upper,
        gamma_call_ok: gamma_call_margin > 0.0,
        gamma_call_margin,
        varpi_max,
    })
}
