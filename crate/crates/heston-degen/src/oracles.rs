//! Independent ground-truth generators: full-truncation Euler Monte Carlo
//! for the Heston system, the 1D heat-kernel convolution, and a
//! semi-closed-form characteristic-function pricer. None of them share
//! code with the PDE path.

use crate::error::{Error, Result};
use crate::exec;
use crate::params::ModelParams;
use num_complex::Complex64;

/// Monte Carlo configuration. The RNG is counter-based: every normal is a
/// pure hash of `(seed, path, step, component)`, so changing the path count
/// never reshuffles existing paths.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[inline]
fn key_hash(seed: u64, path: u64, step: u64, component: u64, draw: u64) -> u64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ path);
    h = splitmix(h ^ step);
    h = splitmix(h ^ (component | (draw << 32)))
        ;
    h
}

#[inline]
fn uniform_open(bits: u64) -> f64 {
    (((bits >> 11) as f64) + 0.5) / (1u64 << 53) as f64
}

/// Standard normal from the counter key via Box-Muller.
#[inline]
pub fn counter_normal(seed: u64, path: u64, step: u64, component: u64) -> f64 {
    let u1 = uniform_open(key_hash(seed, path, step, component, 0));
    let u2 = uniform_open(key_hash(seed, path, step, component, 1));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Terminal samples of `(X_T, V_T)`.
#[derive(Debug, Clone)]
pub struct McSamples {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl McSamples {
    pub fn mean_se_v(&self) -> (f64, f64) {
        mean_se(&self.v)
    }

    pub fn mean_se_x(&self) -> (f64, f64) {
        mean_se(&self.x)
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = exec::pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = exec::pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Full-truncation Euler on the log-price/variance pair
/// `dX = -(q_r + V/2) dt + sqrt(V) dW`, `dV = kappa (theta - V) dt
/// + sigma sqrt(V) dZ` with correlation rho; the variance is clamped at
/// zero inside drift and diffusion.
pub fn simulate_heston(
    params: &ModelParams,
    x0: f64,
    v0: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<McSamples> {
    if cfg.paths == 0 {
        return Err(Error::Config("path count must be >= 1".into()));
    }
    if v0 < 0.0 || !(t > 0.0) {
        return Err(Error::Domain(format!("need v0 >= 0 and t > 0, got v0 = {v0}, t = {t}")));
    }
    let p = *params;
    let dt = t / cfg.steps as f64;
    let sqdt = dt.sqrt();
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let anti = cfg.antithetic;
    let seed = cfg.seed;
    let q_r = p.q_r();
    let results: Vec<(f64, f64)> = exec::map_indexed(cfg.paths, |pidx| {
        let (key_path, flip) = if anti {
            ((pidx / 2) as u64, if pidx % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (pidx as u64, 1.0)
        };
        let mut x = x0;
        let mut v = v0;
        for s in 0..cfg.steps {
            let zv = flip * counter_normal(seed, key_path, s as u64, 0);
            let zp = flip * counter_normal(seed, key_path, s as u64, 1);
            let zx = p.rho * zv + rho_c * zp;
            let vp = v.max(0.0);
            let sv = vp.sqrt();
            x += -(q_r + 0.5 * vp) * dt + sv * sqdt * zx;
            v += p.kappa * (p.theta - vp) * dt + p.sigma * sv * sqdt * zv;
        }
        (x, v.max(0.0))
    });
    for (pidx, &(x, v)) in results.iter().enumerate() {
        if !x.is_finite() || !v.is_finite() {
            return Err(Error::McNan { seed, path: pidx as u64 });
        }
    }
    Ok(McSamples {
        x: results.iter().map(|r| r.0).collect(),
        v: results.iter().map(|r| r.1).collect(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct McPrice {
    pub price: f64,
    pub std_err: f64,
    /// 95% confidence half-width.
    pub half_width: f64,
}

/// Discounted expectation `e^{-rT} E[payoff(X_T)]` with the payoff given on
/// the log-moneyness terminal value. With antithetics the standard error
/// is computed over pair averages.
pub fn price_mc_with(
    params: &ModelParams,
    payoff: impl Fn(f64) -> f64 + Sync,
    x0: f64,
    v0: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<McPrice> {
    let samples = simulate_heston(params, x0, v0, t, cfg)?;
    let disc = (-params.r * t).exp();
    let vals: Vec<f64> = samples.x.iter().map(|&x| disc * payoff(x)).collect();
    let reduced: Vec<f64> = if cfg.antithetic {
        vals.chunks(2)
            .map(|c| if c.len() == 2 { 0.5 * (c[0] + c[1]) } else { c[0] })
            .collect()
    } else {
        vals
    };
    let (mean, se) = mean_se(&reduced);
    Ok(McPrice { price: mean, std_err: se, half_width: 1.96 * se })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// Vanilla Monte Carlo price; `x0 = ln(S0 / K)`.
pub fn price_mc(
    params: &ModelParams,
    kind: OptionKind,
    strike: f64,
    x0: f64,
    v0: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<McPrice> {
    match kind {
        OptionKind::Call => {
            price_mc_with(params, |x| strike * (x.exp() - 1.0).max(0.0), x0, v0, t, cfg)
        }
        OptionKind::Put => {
            price_mc_with(params, |x| strike * (1.0 - x.exp()).max(0.0), x0, v0, t, cfg)
        }
    }
}

/// Gauss kernel of the heat equation, variance `2t`.
#[inline]
pub fn heat_kernel(s: f64, t: f64) -> f64 {
    (-s * s / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

/// Trapezoid mass of the kernel over `[-l, l]`, refined well below the
/// kernel width.
pub fn kernel_mass(t: f64, l: f64) -> f64 {
    let width = (2.0 * t).sqrt();
    let h = (width / 16.0).min(l / 64.0);
    let n = (2.0 * l / h).ceil() as usize;
    let h = 2.0 * l / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|k| {
            let s = -l + k as f64 * h;
            let c = if k == 0 || k == n { 0.5 } else { 1.0 };
            c * heat_kernel(s, t)
        })
        .collect();
    exec::pairwise_sum(&vals) * h
}

/// Discrete heat-kernel convolution of a function table on a uniform line
/// grid, with the kernel mass renormalized to 1 on the truncated window.
/// Errors when the window cannot hold the kernel mass to 1e-8.
pub fn heat_convolve(x_nodes: &[f64], u0: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat_convolve needs t > 0, got {t}")));
    }
    if x_nodes.len() != u0.len() || x_nodes.len() < 8 {
        return Err(Error::Config("x grid and table sizes mismatch or too small".into()));
    }
    let l = 0.5 * (x_nodes[x_nodes.len() - 1] - x_nodes[0]);
    if kernel_mass(t, l) < 1.0 - 1e-8 {
        return Err(Error::Domain(format!(
            "window half-width {l} too small for kernel mass at t = {t}"
        )));
    }
    let h = x_nodes[1] - x_nodes[0];
    let n = x_nodes.len();
    Ok(exec::map_indexed(n, |i| {
        let xi = x_nodes[i];
        let mut num = Vec::with_capacity(n);
        let mut den = Vec::with_capacity(n);
        for (j, &xj) in x_nodes.iter().enumerate() {
            let c = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let g = c * heat_kernel(xi - xj, t) * h;
            num.push(g * u0[j]);
            den.push(g);
        }
        exec::pairwise_sum(&num) / exec::pairwise_sum(&den)
    }))
}

// --- characteristic-function pricer ---------------------------------------

fn ln1p_complex(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        z * (Complex64::new(1.0, 0.0) - z / 2.0 + z * z / 3.0 - z * z * z / 4.0)
    } else {
        (Complex64::new(1.0, 0.0) + z).ln()
    }
}

/// Log characteristic exponent pieces for leg `j` (u_j = +-1/2) in the
/// branch-stable formulation: the `sigma^2` divisions are removed
/// algebraically, so the formulas stay accurate down to the
/// zero-vol-of-vol (Black-Scholes) limit.
fn heston_leg(
    p: &ModelParams,
    uj: f64,
    bj: f64,
    phi: f64,
    tau: f64,
    v0: f64,
    x_log: f64,
) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let a = p.kappa * p.theta;
    let x = Complex64::new(bj, -p.rho * p.sigma * phi);
    let q = Complex64::new(phi * phi, -2.0 * uj * phi); // phi^2 - 2 u_j i phi
    let d = (x * x + p.sigma * p.sigma * q).sqrt();
    let xpd = x + d;
    // (x - d) / sigma^2 without cancellation
    let xmds2 = -q / xpd;
    let cs2 = xmds2 / xpd; // c / sigma^2
    let c = p.sigma * p.sigma * cs2;
    let emdt = (-d * tau).exp();
    let one = Complex64::new(1.0, 0.0);
    let zs2 = cs2 * (one - emdt) / (one - c);
    let z = p.sigma * p.sigma * zs2;
    let lnterm = if z.norm() < 1e-4 {
        // (a / sigma^2) * -2 ln((1 - c e^{-d tau})/(1 - c)) via series
        -2.0 * a * zs2 * (one - z / 2.0 + z * z / 3.0 - z * z * z / 4.0)
    } else {
        -2.0 * a / (p.sigma * p.sigma) * ln1p_complex(z)
    };
    let big_c = i * ((p.r - p.q) * phi * tau) + a * tau * xmds2 + lnterm;
    let big_d = xmds2 * (one - emdt) / (one - c * emdt);
    big_c + big_d * v0 + i * (phi * x_log)
}

fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: usize,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let sl = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let sr = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let s2 = sl + sr;
    if (s2 - s).abs() <= 15.0 * tol || depth == 0 {
        if depth == 0 && (s2 - s).abs() > 15.0 * tol {
            return None;
        }
        return Some(s2 + (s2 - s) / 15.0);
    }
    let left = adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)?;
    let right = adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)?;
    Some(left + right)
}

fn integrate_leg(f: impl Fn(f64) -> f64) -> Result<f64> {
    let tol = 1e-9;
    let mut total = 0.0;
    let mut a = 1e-10;
    let mut width = 8.0;
    let mut small_blocks = 0;
    while a < 16384.0 {
        let b = a + width;
        let m = 0.5 * (a + b);
        let block = adaptive_simpson(&f, a, b, f(a), f(m), f(b), tol, 28)
            .ok_or_else(|| Error::NonConvergence("cf quadrature did not converge".into()))?;
        total += block;
        if block.abs() < 1e-12 {
            small_blocks += 1;
            if small_blocks >= 2 {
                return Ok(total);
            }
        } else {
            small_blocks = 0;
        }
        a = b;
        width *= 2.0;
    }
    Err(Error::NonConvergence("cf quadrature tail did not decay".into()))
}

/// Semi-closed-form European price by quadrature of the two probability
/// legs; declared absolute tolerance 1e-6. `x0 = ln(S0 / K)`. The risk
/// premium is absorbed internally; the Feller condition is required.
pub fn price_reference(
    params: &ModelParams,
    kind: OptionKind,
    strike: f64,
    x0: f64,
    v0: f64,
    t: f64,
) -> Result<f64> {
    let p = params.absorb_risk_premium();
    p.check()?;
    if p.kappa * p.theta <= 0.5 * p.sigma * p.sigma {
        return Err(Error::InvalidParams(
            "characteristic-function pricer requires the Feller condition".into(),
        ));
    }
    let s0 = strike * x0.exp();
    let x_log = s0.ln();
    let lnk = strike.ln();
    let legs = [(0.5, p.kappa - p.rho * p.sigma), (-0.5, p.kappa)];
    let mut prob = [0.0; 2];
    for (idx, &(uj, bj)) in legs.iter().enumerate() {
        let integrand = |phi: f64| -> f64 {
            let e = heston_leg(&p, uj, bj, phi, t, v0, x_log);
            let val = (e - Complex64::new(0.0, phi * lnk)).exp() / Complex64::new(0.0, phi);
            val.re
        };
        prob[idx] = 0.5 + integrate_leg(integrand)? / std::f64::consts::PI;
    }
    let df_r = (-p.r * t).exp();
    let df_q = (-p.q * t).exp();
    let call = s0 * df_q * prob[0] - strike * df_r * prob[1];
    Ok(match kind {
        OptionKind::Call => call,
        OptionKind::Put => strike * df_r * (1.0 - prob[1]) - s0 * df_q * (1.0 - prob[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams {
            sigma: 0.2,
            kappa: 2.0,
            theta: 0.04,
            rho: -0.5,
            r: 0.0,
            q: 0.0,
            lambda_risk: 0.0,
        }
    }

    #[test]
    fn determinism_same_seed_bit_identical() {
        let p = params();
        let cfg = McConfig { paths: 500, steps: 32, seed: 99, antithetic: false };
        let a = simulate_heston(&p, 0.0, 0.04, 1.0, &cfg).unwrap();
        let b = simulate_heston(&p, 0.0, 0.04, 1.0, &cfg).unwrap();
        for (x, y) in a.x.iter().zip(b.x.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn path_count_growth_keeps_existing_paths() {
        let p = params();
        let cfg1 = McConfig { paths: 100, steps: 16, seed: 7, antithetic: false };
        let cfg2 = McConfig { paths: 200, steps: 16, seed: 7, antithetic: false };
        let a = simulate_heston(&p, 0.1, 0.04, 0.5, &cfg1).unwrap();
        let b = simulate_heston(&p, 0.1, 0.04, 0.5, &cfg2).unwrap();
        for i in 0..100 {
            assert_eq!(a.x[i].to_bits(), b.x[i].to_bits());
        }
    }

    #[test]
    fn vanishing_vol_of_vol_gives_deterministic_variance() {
        let p = ModelParams { sigma: 1e-8, ..params() };
        let cfg = McConfig { paths: 2000, steps: 64, seed: 3, antithetic: false };
        let s = simulate_heston(&p, 0.0, 0.09, 1.0, &cfg).unwrap();
        let want = p.theta + (0.09 - p.theta) * (-p.kappa).exp();
        let (mean, _) = s.mean_se_v();
        assert!((mean - want).abs() < 1e-3);
        let var: f64 = s.v.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 1999.0;
        assert!(var < 1e-6, "variance of V_T = {var}");
    }

    #[test]
    fn drift_only_exact() {
        let p = ModelParams { theta: 1e-300, rho: 0.0, q: 0.03, r: 0.01, ..params() };
        let cfg = McConfig { paths: 10, steps: 8, seed: 5, antithetic: false };
        let s = simulate_heston(&p, 0.2, 0.0, 2.0, &cfg).unwrap();
        for (x, v) in s.x.iter().zip(s.v.iter()) {
            assert!((x - (0.2 - p.q_r() * 2.0)).abs() < 1e-14);
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn cir_mean_within_three_se() {
        let p = params();
        let v0 = 0.08;
        let t = 1.0;
        let cfg = McConfig { paths: 100_000, steps: 256, seed: 11, antithetic: false };
        let s = simulate_heston(&p, 0.0, v0, t, &cfg).unwrap();
        let (mean, se) = s.mean_se_v();
        let want = p.theta + (v0 - p.theta) * (-p.kappa * t).exp();
        assert!(
            (mean - want).abs() <= 3.0 * se,
            "CIR mean {mean} vs {want} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn constant_payoff_prices_exactly() {
        let p = ModelParams { r: 0.05, ..params() };
        let cfg = McConfig { paths: 64, steps: 8, seed: 1, antithetic: false };
        let pr = price_mc_with(&p, |_| 2.0, 0.0, 0.04, 1.0, &cfg).unwrap();
        assert!((pr.price - 2.0 * (-0.05f64).exp()).abs() < 1e-14);
        assert!(pr.half_width < 1e-14);
    }

    #[test]
    fn forward_recovered_for_tiny_strike() {
        let p = ModelParams { q: 0.01, r: 0.02, ..params() };
        let s0: f64 = 1.0;
        let k: f64 = 1e-6;
        let x0 = (s0 / k).ln();
        let cfg = McConfig { paths: 50_000, steps: 64, seed: 13, antithetic: true };
        let pr = price_mc(&p, OptionKind::Call, k, x0, 0.04, 1.0, &cfg).unwrap();
        let want = s0 * (-p.q * 1.0f64).exp();
        assert!((pr.price - want).abs() <= 3.0 * pr.std_err + k, "{} vs {want}", pr.price);
    }

    #[test]
    fn deep_otm_call_is_tiny() {
        let p = params();
        let cfg = McConfig { paths: 100_000, steps: 64, seed: 17, antithetic: false };
        let pr = price_mc(&p, OptionKind::Call, 1.0, -10.0, 0.04, 1.0, &cfg).unwrap();
        assert!(pr.price <= 1e-3, "deep OTM price {}", pr.price);
    }

    #[test]
    fn antithetic_does_not_increase_se() {
        let p = params();
        for seed in [1u64, 2, 3] {
            let plain = McConfig { paths: 20_000, steps: 32, seed, antithetic: false };
            let anti = McConfig { paths: 20_000, steps: 32, seed, antithetic: true };
            let a = price_mc(&p, OptionKind::Call, 1.0, 0.0, 0.04, 1.0, &plain).unwrap();
            let b = price_mc(&p, OptionKind::Call, 1.0, 0.0, 0.04, 1.0, &anti).unwrap();
            assert!(b.std_err <= a.std_err * 1.05, "{} vs {}", b.std_err, a.std_err);
        }
    }

    #[test]
    fn heat_convolve_constant_and_mass() {
        let n = 2001;
        let x: Vec<f64> = (0..n).map(|i| -20.0 + 40.0 * i as f64 / (n - 1) as f64).collect();
        let u0 = vec![3.0; n];
        for t in [0.01, 1.0] {
            let out = heat_convolve(&x, &u0, t).unwrap();
            for v in out {
                assert!((v - 3.0).abs() < 1e-12);
            }
        }
        for t in [0.01, 1.0, 100.0] {
            let l = if t == 100.0 { 300.0 } else { 20.0 };
            assert!((kernel_mass(t, l) - 1.0).abs() < 1e-8);
        }
        // window too small
        assert!(heat_convolve(&x, &u0, 100.0).is_err());
    }

    #[test]
    fn heat_convolve_contraction_and_tanh_limits() {
        let n = 4001;
        let x: Vec<f64> = (0..n).map(|i| -20.0 + 40.0 * i as f64 / (n - 1) as f64).collect();
        let u0: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
        for t in [0.1, 0.5, 1.0] {
            let out = heat_convolve(&x, &u0, t).unwrap();
            let sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(sup <= 1.0 + 1e-12, "contraction violated: {sup}");
            assert!((out[0] + 1.0).abs() < 1e-3, "left limit {}", out[0]);
            assert!((out[n - 1] - 1.0).abs() < 1e-3, "right limit {}", out[n - 1]);
        }
    }

    /// Black-Scholes call via the heat-kernel oracle.
    fn bs_call_heat(s0: f64, k: f64, vol: f64, r: f64, q: f64, t: f64) -> f64 {
        let n = 12001;
        let l = 12.0;
        let x0 = (s0 / k).ln();
        let x: Vec<f64> = (0..n).map(|i| x0 - l + 2.0 * l * i as f64 / (n - 1) as f64).collect();
        let payoff: Vec<f64> = x.iter().map(|v| k * (v.exp() - 1.0).max(0.0)).collect();
        let t_heat = 0.5 * vol * vol * t;
        let out = heat_convolve(&x, &payoff, t_heat).unwrap();
        // evaluate at the drift-shifted point
        let xe = x0 + (r - q - 0.5 * vol * vol) * t;
        let h = x[1] - x[0];
        let idx = ((xe - x[0]) / h).floor() as usize;
        let w = (xe - x[idx]) / h;
        (-r * t).exp() * ((1.0 - w) * out[idx] + w * out[idx + 1])
    }

    #[test]
    fn cf_matches_black_scholes_in_zero_vol_of_vol_limit() {
        let theta = 0.04;
        let p = ModelParams {
            sigma: 1e-4,
            kappa: 2.0,
            theta,
            rho: -0.5,
            r: 0.02,
            q: 0.01,
            lambda_risk: 0.0,
        };
        let got = price_reference(&p, OptionKind::Call, 1.0, 0.0, theta, 1.0).unwrap();
        let want = bs_call_heat(1.0, 1.0, theta.sqrt(), 0.02, 0.01, 1.0);
        assert!((got - want).abs() < 2e-4, "cf {got} vs bs-heat {want}");
    }

    #[test]
    fn put_call_parity() {
        let p = ModelParams { r: 0.03, q: 0.01, ..params() };
        let (k, x0, v0, t) = (1.2, -0.1, 0.05, 0.8);
        let call = price_reference(&p, OptionKind::Call, k, x0, v0, t).unwrap();
        let put = price_reference(&p, OptionKind::Put, k, x0, v0, t).unwrap();
        let s0 = k * x0.exp();
        let want = s0 * (-p.q * t).exp() - k * (-p.r * t).exp();
        assert!((call - put - want).abs() < 1e-6, "parity off by {}", call - put - want);
    }

    #[test]
    fn cf_agrees_with_mc() {
        let p = params();
        let cfg = McConfig { paths: 60_000, steps: 128, seed: 21, antithetic: true };
        let mc = price_mc(&p, OptionKind::Call, 1.0, 0.0, 0.04, 1.0, &cfg).unwrap();
        let cf = price_reference(&p, OptionKind::Call, 1.0, 0.0, 0.04, 1.0).unwrap();
        assert!(
            (mc.price - cf).abs() <= 3.0 * mc.std_err + 5e-4,
            "mc {} vs cf {cf} (se {})",
            mc.price,
            mc.std_err
        );
    }

    #[test]
    fn feller_violation_rejected_by_cf() {
        let p = ModelParams { sigma: 1.0, kappa: 0.5, theta: 0.2, ..params() };
        assert!(price_reference(&p, OptionKind::Call, 1.0, 0.0, 0.2, 1.0).is_err());
    }
}
