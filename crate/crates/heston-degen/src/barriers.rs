//! Maximum-principle machinery: the majorizer, the time-dependent barrier
//! with its J-coefficient decomposition and sign certificates, the
//! comparison function supersolution check, and the pointwise bound
//! verifier for solver traces.

use crate::error::{Error, Result};
use crate::evolution::EvolutionTrace;
use crate::exec;
use crate::grid::Grid2D;
use crate::params::ModelParams;
use crate::report::{Outcome, VerdictReport};

/// All barrier-related constants.
#[derive(Debug, Clone, Copy)]
pub struct BarrierParams {
    // majorizer exponents
    pub beta0: f64,
    pub mu0: f64,
    pub gamma0: f64,
    // barrier constants
    pub beta1: f64,
    pub gamma1: f64,
    pub mu1: f64,
    pub nu: f64,
    pub omega: f64,
    pub tau: f64,
    // comparison-function constants
    pub varpi: f64,
    pub k0: f64,
    pub k1: f64,
    pub r0: f64,
}

impl BarrierParams {
    /// Checks the admissibility inequalities tying the majorizer and
    /// barrier exponents to the model constants.
    pub fn check(&self, params: &ModelParams) -> Result<()> {
        let bdf = 2.0 * params.kappa * params.theta / (params.sigma * params.sigma);
        let mut violations = Vec::new();
        if !(self.beta0 >= 1.0 && self.beta0 < bdf) {
            violations.push(format!("need 1 <= beta0 < 2 kappa theta / sigma^2 = {bdf}"));
        }
        if !(self.mu0 > self.beta0 - 1.0) {
            violations.push(format!("need mu0 > beta0 - 1 = {}", self.beta0 - 1.0));
        }
        let tau0 = (bdf - self.beta0) / (bdf - 1.0);
        if !(self.tau > 0.0 && self.tau < tau0) {
            violations.push(format!("need 0 < tau < tau0 = {tau0}"));
        }
        if !(self.varpi >= 0.0 && self.varpi < self.mu0) {
            violations.push(format!("need 0 <= varpi < mu0 = {}", self.mu0));
        }
        let cap = ((self.r0 + params.q_r()) / (params.kappa * params.theta_sigma()))
            .min(2.0 * (params.kappa - params.sigma * params.rho) / params.sigma);
        if self.varpi > cap {
            violations.push(format!("need varpi <= {cap}"));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(violations.join("; ")))
        }
    }
}

/// Majorizer `h0(x, xi) = xi^{-(beta0-1)} exp[gamma0 (1+x^2)^{1/2} + mu0 xi]`.
pub fn majorizer_h0(x: f64, xi: f64, bp: &BarrierParams) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("majorizer needs xi > 0, got {xi}")));
    }
    Ok((bp.gamma0 * (1.0 + x * x).sqrt() + bp.mu0 * xi - (bp.beta0 - 1.0) * xi.ln()).exp())
}

/// Barrier `h(x, xi, t) = exp[(gamma1 (1+x^2)^{1/2} + mu1 xi
/// - (beta1 - 1) ln xi) / (1 - omega t) + nu t]`, defined for `t < 1/omega`.
pub fn barrier_h(x: f64, xi: f64, t: f64, bp: &BarrierParams) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("barrier needs xi > 0, got {xi}")));
    }
    if !(t >= 0.0 && t < 1.0 / bp.omega) {
        return Err(Error::Domain(format!(
            "barrier needs 0 <= t < 1/omega = {}, got {t}",
            1.0 / bp.omega
        )));
    }
    let phi = bp.gamma1 * (1.0 + x * x).sqrt() + bp.mu1 * xi - (bp.beta1 - 1.0) * xi.ln();
    Ok((phi / (1.0 - bp.omega * t) + bp.nu * t).exp())
}

/// The three coefficients of `-h^{-1}(h_t + A h) = J1 xi + J0 + J_{-1}/xi`,
/// evaluated exactly as printed.
pub fn j_coefficients(
    x: f64,
    xi: f64,
    t: f64,
    bp: &BarrierParams,
    params: &ModelParams,
) -> (f64, f64, f64) {
    let s = 1.0 - bp.omega * t;
    let p = params;
    let xr = x / (1.0 + x * x).sqrt();
    let b1m = bp.beta1 - 1.0;
    let j1 = 0.5 * p.sigma / s
        * (bp.gamma1 * bp.gamma1 / s * (1.0 - 1.0 / (1.0 + x * x))
            + bp.gamma1 / (1.0 + x * x).powf(1.5)
            + 2.0 * p.rho * bp.gamma1 * bp.mu1 / s * xr
            + bp.mu1 * bp.mu1 / s
            - bp.gamma1 * xr)
        - p.kappa * bp.mu1 / s
        - bp.omega / (s * s) * (bp.mu1 - b1m * xi.ln() / xi);
    let j0 = -p.sigma * p.rho * bp.gamma1 * b1m / (s * s) * xr
        - p.sigma * bp.mu1 * b1m / (s * s)
        - p.q_r() * bp.gamma1 / s * xr
        + p.kappa * (p.theta_sigma() * bp.mu1 + b1m) / s
        - bp.omega * bp.gamma1 / (s * s) * (1.0 + x * x).sqrt()
        - bp.nu;
    let jm1 = b1m / s * (0.5 * p.sigma * b1m / s + 0.5 * p.sigma - p.kappa * p.theta_sigma());
    (j1, j0, jm1)
}

/// Evaluates `-h^{-1}(h_t + A h)` by fourth-order central finite
/// differences of the barrier itself; the independent oracle against which
/// the closed-form J-decomposition is checked.
pub fn j_reconstruction_fd(x: f64, xi: f64, t: f64, bp: &BarrierParams, params: &ModelParams) -> f64 {
    let h = |x: f64, xi: f64, t: f64| barrier_h(x, xi, t, bp).unwrap();
    let eps = 2e-4;
    let dx = eps * (1.0 + x.abs());
    let dxi = eps * xi;
    let dt = eps * t.min(0.2 * (1.0 / bp.omega - t));
    let d1 = |f: &dyn Fn(f64) -> f64, d: f64| {
        (-f(2.0 * d) + 8.0 * f(d) - 8.0 * f(-d) + f(-2.0 * d)) / (12.0 * d)
    };
    let d2 = |f: &dyn Fn(f64) -> f64, d: f64| {
        (-f(2.0 * d) + 16.0 * f(d) - 30.0 * f(0.0) + 16.0 * f(-d) - f(-2.0 * d))
            / (12.0 * d * d)
    };
    let h0 = h(x, xi, t);
    let ht = d1(&|e| h(x, xi, t + e), dt);
    let hx = d1(&|e| h(x + e, xi, t), dx);
    let hxi = d1(&|e| h(x, xi + e, t), dxi);
    let hxx = d2(&|e| h(x + e, xi, t), dx);
    let hxixi = d2(&|e| h(x, xi + e, t), dxi);
    // mixed: fourth-order d1 in x applied to fourth-order d1 in xi
    let hxxi = d1(&|ex| d1(&|exi| h(x + ex, xi + exi, t), dxi), dx);
    let p = params;
    let ah = -0.5 * p.sigma * xi * (hxx + 2.0 * p.rho * hxxi + hxixi)
        + (p.q_r() + 0.5 * p.sigma * xi) * hx
        - p.kappa * (p.theta_sigma() - xi) * hxi;
    -(ht + ah) / h0
}

/// Partial barrier input completed by [`choose_barrier_constants`].
#[derive(Debug, Clone, Copy)]
pub struct BarrierSeed {
    pub beta0: f64,
    pub mu0: f64,
    pub gamma0: f64,
    /// Defaults to `gamma0 + 1` when absent (the proof needs
    /// `gamma1 > gamma0`).
    pub gamma1: Option<f64>,
    pub nu: f64,
    /// Horizon entering the `omega >= tau / T` requirement.
    pub t_horizon: f64,
}

/// Deterministically completes `(beta1, mu1, omega, tau)` from the closed
/// sufficient bounds: `tau = tau0 / 2`, `beta1` the midpoint of its
/// admissible interval, `mu1 = max(beta1 - 1, mu0) + 1`, and `omega` the
/// smallest value closing both sign bounds, then doubled for margin.
pub fn choose_barrier_constants(params: &ModelParams, seed: &BarrierSeed) -> Result<BarrierParams> {
    params.check()?;
    let p = params;
    let bdf = 2.0 * p.kappa * p.theta / (p.sigma * p.sigma);
    if bdf <= 1.0 {
        return Err(Error::InvalidParams(format!(
            "Feller violated: 2 kappa theta / sigma^2 = {bdf} <= 1, barrier interval empty"
        )));
    }
    if !(seed.beta0 >= 1.0 && seed.beta0 < bdf) {
        return Err(Error::InvalidParams(format!(
            "need 1 <= beta0 < {bdf}, got {}",
            seed.beta0
        )));
    }
    if !(seed.mu0 > seed.beta0 - 1.0) {
        return Err(Error::InvalidParams(format!(
            "need mu0 > beta0 - 1, got mu0 = {}",
            seed.mu0
        )));
    }
    let tau0 = (bdf - seed.beta0) / (bdf - 1.0);
    let tau = 0.5 * tau0;
    let beta1_hi = 1.0 + (1.0 - tau) * (bdf - 1.0);
    let beta1 = 0.5 * (seed.beta0 + beta1_hi);
    let mu1 = (beta1 - 1.0).max(seed.mu0) + 1.0;
    let gamma1 = seed.gamma1.unwrap_or(seed.gamma0 + 1.0);
    if gamma1 <= seed.gamma0 {
        return Err(Error::InvalidParams(format!(
            "need gamma1 > gamma0 = {}, got {gamma1}",
            seed.gamma0
        )));
    }
    let omt = 1.0 - tau;
    let omega_j1 = ((p.sigma / omt * ((gamma1 + mu1).powi(2) / (2.0 * omt) + gamma1)
        - p.kappa * mu1)
        / (mu1 - (beta1 - 1.0)))
        .max(0.0);
    let omega_j0 = ((p.sigma * p.rho.abs() * gamma1 * (beta1 - 1.0) / (omt * omt)
        - p.sigma * mu1 * (beta1 - 1.0)
        + (p.q_r().abs() * gamma1 + p.kappa * (p.theta_sigma() * mu1 + beta1 - 1.0)) / omt)
        / gamma1)
        .max(0.0);
    let omega = 2.0 * omega_j1.max(omega_j0).max(tau / seed.t_horizon);
    Ok(BarrierParams {
        beta0: seed.beta0,
        mu0: seed.mu0,
        gamma0: seed.gamma0,
        beta1,
        gamma1,
        mu1,
        nu: seed.nu,
        omega,
        tau,
        varpi: 0.0,
        k0: 0.0,
        k1: 1.0,
        r0: 0.0,
    })
}

/// Sweeps the sign certificates `J_{-1} <= 0`, `J_1 <= 0`, `J_0 + nu <= 0`
/// over grid x xi x time samples in `(0, tau/omega]`. Margins are the
/// worst (largest) coefficient values found; the report names the sweep
/// domain explicitly.
pub fn j_sign_sweep(
    params: &ModelParams,
    bp: &BarrierParams,
    x_samples: &[f64],
    xi_samples: &[f64],
    time_samples: usize,
) -> VerdictReport {
    let t_max = bp.tau / bp.omega;
    let times: Vec<f64> =
        (1..=time_samples).map(|k| t_max * k as f64 / time_samples as f64).collect();
    let n = x_samples.len() * xi_samples.len() * times.len();
    let worst = exec::map_indexed(n, |idx| {
        let nt = times.len();
        let nxi = xi_samples.len();
        let it = idx % nt;
        let ixi = (idx / nt) % nxi;
        let ix = idx / (nt * nxi);
        let (j1, j0, jm1) = j_coefficients(x_samples[ix], xi_samples[ixi], times[it], bp, params);
        (j1, j0 + bp.nu, jm1)
    });
    let mut w1 = f64::NEG_INFINITY;
    let mut w0 = f64::NEG_INFINITY;
    let mut wm1 = f64::NEG_INFINITY;
    for (a, b, c) in worst {
        w1 = w1.max(a);
        w0 = w0.max(b);
        wm1 = wm1.max(c);
    }
    let domain = format!(
        "sweep: {} x-samples x {} xi-samples x {} times in (0; {t_max:.6e}]",
        x_samples.len(),
        xi_samples.len(),
        time_samples
    );
    let mut rep = VerdictReport::default();
    let gate = |v: f64| if v <= 0.0 { Outcome::Pass } else { Outcome::Fail };
    rep.push("J1 <= 0", gate(w1), -w1, None, domain.clone());
    rep.push("J0 + nu <= 0", gate(w0), -w0, None, domain.clone());
    rep.push("J-1 <= 0", gate(wm1), -wm1, None, domain);
    rep
}

/// Verifies the closed-form supersolution expression
/// `r0 K0 + K1 e^{x + varpi xi} (xi varpi (-sigma varpi / 2 + kappa -
/// sigma rho) + r0 + q_r - kappa theta_sigma varpi) >= 0` at every node.
pub fn supersolution_check_u(
    params: &ModelParams,
    varpi: f64,
    k0: f64,
    k1: f64,
    r0: f64,
    grid: &Grid2D,
) -> VerdictReport {
    let p = params;
    let mut min_margin = f64::INFINITY;
    let mut where_min = (0usize, 0usize);
    for i in 0..grid.x_nodes.len() {
        for j in 0..grid.xi_nodes.len() {
            let (x, xi) = grid.node(i, j);
            let e = r0 * k0
                + k1 * (x + varpi * xi).exp()
                    * (xi * varpi * (-0.5 * p.sigma * varpi + p.kappa - p.sigma * p.rho)
                        + r0
                        + p.q_r()
                        - p.kappa * p.theta_sigma() * varpi);
            if e < min_margin {
                min_margin = e;
                where_min = (i, j);
            }
        }
    }
    let mut rep = VerdictReport::default();
    let (x, xi) = grid.node(where_min.0, where_min.1);
    rep.push(
        "supersolution e^{-r0 t}(U_t + A U) >= 0",
        if min_margin >= 0.0 { Outcome::Pass } else { Outcome::Fail },
        min_margin,
        Some(format!("(x={x}, xi={xi})")),
        format!("varpi={varpi} K0={k0} K1={k1} r0={r0}"),
    );
    rep
}

/// Grid-scale slack for pointwise continuum inequalities.
pub fn tol_grid(grid: &Grid2D, dt: f64) -> f64 {
    10.0 * (grid.hx() + grid.h_xi_min() + dt)
}

/// Asserts `|u| <= e^{r0 t} (K1 e^{x + varpi xi} + K0) + tol` at every
/// stored node and time, and (for nonnegative payoffs) `u >= -tol`.
pub fn verify_max_principle(
    trace: &EvolutionTrace,
    params: &ModelParams,
    varpi: f64,
    k0: f64,
    k1: f64,
    r0: f64,
    nonnegative_payoff: bool,
    tol: f64,
) -> VerdictReport {
    params.check().ok();
    let mut rep = VerdictReport::default();
    let mut worst_upper = f64::INFINITY;
    let mut worst_upper_loc = String::new();
    let mut worst_lower = f64::INFINITY;
    let mut worst_lower_loc = String::new();
    for f in &trace.snapshots {
        let grid = &f.grid;
        let growth = (r0 * f.time).exp();
        for i in 0..grid.x_nodes.len() {
            for j in 0..grid.xi_nodes.len() {
                let (x, xi) = grid.node(i, j);
                let bound = growth * (k1 * (x + varpi * xi).exp() + k0);
                let v = f.at(i, j);
                let margin_u = bound + tol - v.abs();
                if margin_u < worst_upper {
                    worst_upper = margin_u;
                    worst_upper_loc = format!("(x={x}, xi={xi}, t={})", f.time);
                }
                let margin_l = v + tol;
                if margin_l < worst_lower {
                    worst_lower = margin_l;
                    worst_lower_loc = format!("(x={x}, xi={xi}, t={})", f.time);
                }
            }
        }
    }
    rep.push(
        "|u| <= e^{r0 t} (K1 e^{x+varpi xi} + K0) + tol",
        if worst_upper >= 0.0 { Outcome::Pass } else { Outcome::Fail },
        worst_upper,
        Some(worst_upper_loc),
        format!("tol={tol:.6e}"),
    );
    if nonnegative_payoff {
        rep.push(
            "u >= -tol",
            if worst_lower >= 0.0 { Outcome::Pass } else { Outcome::Fail },
            worst_lower,
            Some(worst_lower_loc),
            format!("tol={tol:.6e}"),
        );
    }
    rep
}
