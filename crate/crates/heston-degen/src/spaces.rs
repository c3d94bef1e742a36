//! Weighted norms, the cycloidal metric, grid-sampled Hoelder seminorms,
//! and boundary-limit diagnostics on fields.

use crate::error::{Error, Result};
use crate::exec;
use crate::field::Field;
use crate::grid::{lagrange3_d1, lagrange3_d2, Grid2D};
use crate::linalg::ls_slope;
use crate::params::WeightParams;

/// The weight `w(x, xi) = xi^(beta-1) e^(-gamma |x| - mu xi)`, defined for
/// `xi > 0`.
pub fn weight_w(x: f64, xi: f64, w: &WeightParams) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("weight_w needs xi > 0, got {xi}")));
    }
    Ok(xi.powf(w.beta - 1.0) * (-w.gamma * x.abs() - w.mu * xi).exp())
}

/// Weight extended continuously by 0 to the boundary row (valid for
/// `beta > 1`); this is what the quadrature uses at `xi = 0`.
#[inline]
pub fn weight_at_node(x: f64, xi: f64, w: &WeightParams) -> f64 {
    if xi <= 0.0 {
        0.0
    } else {
        xi.powf(w.beta - 1.0) * (-w.gamma * x.abs() - w.mu * xi).exp()
    }
}

/// Koch's metric `s(P1, P2) = |P1 - P2| / sqrt(xi1 + xi2 + |P1 - P2|)`,
/// equivalent to the cycloidal distance on the closed half-plane.
pub fn cyclo_dist(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let d = ((p1.0 - p2.0).powi(2) + (p1.1 - p2.1).powi(2)).sqrt();
    if d == 0.0 {
        return 0.0;
    }
    d / (p1.1 + p2.1 + d).sqrt()
}

/// Discrete first and second derivatives of a field at a node, built from
/// three-point Lagrange weights (central in the interior, one-sided on
/// edges).
pub(crate) struct NodeDerivs {
    pub fx: f64,
    pub fxi: f64,
    pub fxx: f64,
    pub fxixi: f64,
    pub fxxi: f64,
}

pub(crate) fn stencil_x(grid: &Grid2D, i: usize) -> (usize, [f64; 3], [f64; 3]) {
    let nx = grid.nx();
    let base = if i == 0 {
        0
    } else if i == nx {
        nx - 2
    } else {
        i - 1
    };
    let (a, b, c) = (grid.x_nodes[base], grid.x_nodes[base + 1], grid.x_nodes[base + 2]);
    let x = grid.x_nodes[i];
    (base, lagrange3_d1(a, b, c, x), lagrange3_d2(a, b, c))
}

pub(crate) fn stencil_xi(grid: &Grid2D, j: usize) -> (usize, [f64; 3], [f64; 3]) {
    let nxi = grid.nxi();
    let base = if j == 0 {
        0
    } else if j == nxi {
        nxi - 2
    } else {
        j - 1
    };
    let (a, b, c) = (grid.xi_nodes[base], grid.xi_nodes[base + 1], grid.xi_nodes[base + 2]);
    let xi = grid.xi_nodes[j];
    (base, lagrange3_d1(a, b, c, xi), lagrange3_d2(a, b, c))
}

pub(crate) fn node_derivs(f: &Field, i: usize, j: usize) -> NodeDerivs {
    let grid = &f.grid;
    let (bx, dx1, dx2) = stencil_x(grid, i);
    let (bj, dj1, dj2) = stencil_xi(grid, j);
    let mut fx = 0.0;
    let mut fxx = 0.0;
    for k in 0..3 {
        fx += dx1[k] * f.at(bx + k, j);
        fxx += dx2[k] * f.at(bx + k, j);
    }
    let mut fxi = 0.0;
    let mut fxixi = 0.0;
    for k in 0..3 {
        fxi += dj1[k] * f.at(i, bj + k);
        fxixi += dj2[k] * f.at(i, bj + k);
    }
    // Mixed derivative: x-stencil applied to xi-derivatives.
    let mut fxxi = 0.0;
    for k in 0..3 {
        let mut fxi_k = 0.0;
        for l in 0..3 {
            fxi_k += dj1[l] * f.at(bx + k, bj + l);
        }
        fxxi += dx1[k] * fxi_k;
    }
    NodeDerivs { fx, fxi, fxx, fxixi, fxxi }
}

/// Weighted L2 norm over the truncated domain by tensor trapezoid
/// quadrature with the weight evaluated at nodes.
pub fn norm_l2w(f: &Field, w: &WeightParams) -> f64 {
    let grid = &f.grid;
    let nxn = grid.x_nodes.len();
    let nxin = grid.xi_nodes.len();
    let total = exec::sum_indexed(nxn, |i| {
        let mut acc = Vec::with_capacity(nxin);
        for j in 0..nxin {
            let (x, xi) = grid.node(i, j);
            let v = f.at(i, j);
            acc.push(grid.quad_weight(i, j) * weight_at_node(x, xi, w) * v * v);
        }
        exec::pairwise_sum(&acc)
    });
    total.max(0.0).sqrt()
}

/// The V-seminorm squared: gradient terms against `xi * w`.
pub fn seminorm_h1w_sq(f: &Field, w: &WeightParams) -> f64 {
    let grid = &f.grid;
    let nxn = grid.x_nodes.len();
    let nxin = grid.xi_nodes.len();
    exec::sum_indexed(nxn, |i| {
        let mut acc = Vec::with_capacity(nxin);
        for j in 0..nxin {
            let (x, xi) = grid.node(i, j);
            let d = node_derivs(f, i, j);
            acc.push(
                grid.quad_weight(i, j)
                    * xi
                    * weight_at_node(x, xi, w)
                    * (d.fx * d.fx + d.fxi * d.fxi),
            );
        }
        exec::pairwise_sum(&acc)
    })
}

/// Weighted H1 norm `sqrt(l2w^2 + [f]_V^2)`.
pub fn norm_h1w(f: &Field, w: &WeightParams) -> f64 {
    let l2 = norm_l2w(f, w);
    (l2 * l2 + seminorm_h1w_sq(f, w)).max(0.0).sqrt()
}

/// Half-disc `{(x, xi) : (x - x0)^2 + xi^2 < R^2, xi > 0}`.
#[derive(Debug, Clone, Copy)]
pub struct HalfDisc {
    pub x0: f64,
    pub radius: f64,
}

impl HalfDisc {
    #[inline]
    pub fn contains(&self, x: f64, xi: f64) -> bool {
        (x - self.x0).powi(2) + xi * xi < self.radius * self.radius && xi >= 0.0
    }
}

/// Local H2 norm on a half-disc: second derivatives against `xi^(beta+1)`,
/// first and zeroth against `xi^(beta-1)` (no exponential factors).
pub fn norm_h2w_local(f: &Field, w: &WeightParams, disc: HalfDisc) -> Result<f64> {
    let grid = &f.grid;
    let mut acc = Vec::new();
    for i in 0..grid.x_nodes.len() {
        for j in 0..grid.xi_nodes.len() {
            let (x, xi) = grid.node(i, j);
            if !disc.contains(x, xi) {
                continue;
            }
            if xi <= 0.0 {
                continue; // xi-power weights extend by 0 for beta > 1
            }
            let d = node_derivs(f, i, j);
            let v = f.at(i, j);
            let second = d.fxx * d.fxx + d.fxxi * d.fxxi + d.fxixi * d.fxixi;
            let first = d.fx * d.fx + d.fxi * d.fxi;
            acc.push(
                grid.quad_weight(i, j)
                    * (second * xi.powf(w.beta + 1.0) + (first + v * v) * xi.powf(w.beta - 1.0)),
            );
        }
    }
    if acc.is_empty() {
        return Err(Error::Domain("half-disc does not intersect the grid".into()));
    }
    Ok(exec::pairwise_sum(&acc).max(0.0).sqrt())
}

/// Weighted Lp norm over a half-disc against `xi^(beta-1)`.
pub fn norm_lpw(f: &Field, w: &WeightParams, p: f64, disc: HalfDisc) -> Result<f64> {
    let grid = &f.grid;
    let mut acc = Vec::new();
    for i in 0..grid.x_nodes.len() {
        for j in 0..grid.xi_nodes.len() {
            let (x, xi) = grid.node(i, j);
            if !disc.contains(x, xi) || xi <= 0.0 {
                continue;
            }
            acc.push(grid.quad_weight(i, j) * f.at(i, j).abs().powf(p) * xi.powf(w.beta - 1.0));
        }
    }
    if acc.is_empty() {
        return Err(Error::Domain("half-disc does not intersect the grid".into()));
    }
    Ok(exec::pairwise_sum(&acc).powf(1.0 / p))
}

/// Sampled Hoelder seminorm over node pairs in a half-disc. The result is a
/// certified lower bound on the true seminorm: all pairs when their count
/// fits the budget, otherwise a deterministic nested subsample (so doubling
/// the budget never decreases the value).
pub fn holder_seminorm(f: &Field, alpha: f64, disc: HalfDisc, sample_budget: usize) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    let grid = &f.grid;
    let mut nodes = Vec::new();
    for i in 0..grid.x_nodes.len() {
        for j in 0..grid.xi_nodes.len() {
            let (x, xi) = grid.node(i, j);
            if disc.contains(x, xi) {
                nodes.push((i, j));
            }
        }
    }
    let m = nodes.len();
    if m < 2 {
        return 0.0;
    }
    let pairs = m * (m - 1) / 2;
    let ratio = |a: (usize, usize), b: (usize, usize)| -> f64 {
        let pa = grid.node(a.0, a.1);
        let pb = grid.node(b.0, b.1);
        let s = cyclo_dist(pa, pb);
        if s == 0.0 {
            return 0.0;
        }
        (f.at(a.0, a.1) - f.at(b.0, b.1)).abs() / s.powf(alpha)
    };
    if pairs <= sample_budget {
        return exec::max_indexed(m, |a| {
            let mut best = 0.0f64;
            for b in (a + 1)..m {
                best = best.max(ratio(nodes[a], nodes[b]));
            }
            best
        })
        .max(0.0);
    }
    // Nested deterministic subsample: walk pair indices with a fixed stride
    // coprime to the pair count; truncating the walk at the budget yields
    // nested sample sets for growing budgets.
    let mut stride = 2_654_435_761usize % pairs;
    if stride == 0 {
        stride = 1;
    }
    while gcd(stride, pairs) != 1 {
        stride += 1;
    }
    let decode = |t: usize| -> ((usize, usize), (usize, usize)) {
        // Pair t in lexicographic order over a < b.
        let mut a = 0usize;
        let mut remaining = t;
        let mut row = m - 1;
        while remaining >= row {
            remaining -= row;
            a += 1;
            row -= 1;
        }
        (nodes[a], nodes[a + 1 + remaining])
    };
    exec::max_indexed(sample_budget, |k| {
        let t = (k * stride + 17) % pairs;
        let (a, b) = decode(t);
        ratio(a, b)
    })
    .max(0.0)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Decay record of `xi * (|f_xx| + |f_xxi| + |f_xixi|)` along the ten
/// smallest positive xi-levels at a fixed x-station.
#[derive(Debug, Clone)]
pub struct BoundaryDecay {
    pub x_star: f64,
    pub xi: Vec<f64>,
    pub values: Vec<f64>,
    /// Log-log fitted exponent; `None` when some value vanishes.
    pub fitted_exponent: Option<f64>,
}

pub fn boundary_limit_xi_d2(f: &Field, x_star: f64) -> Result<BoundaryDecay> {
    let grid = &f.grid;
    let nx = grid.nx();
    if x_star <= grid.x_nodes[0] || x_star >= grid.x_nodes[nx] {
        return Err(Error::Domain(format!("x_star = {x_star} not strictly inside the x-range")));
    }
    let positive_levels = grid.nxi(); // j = 1..=nxi are positive
    if positive_levels < 4 {
        return Err(Error::Domain("need at least 4 positive xi levels".into()));
    }
    let i = ((x_star - grid.x_nodes[0]) / grid.hx()).round() as usize;
    let i = i.clamp(1, nx - 1);
    let count = positive_levels.min(10);
    let mut xi = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for j in 1..=count {
        let d = node_derivs(f, i, j);
        let level = grid.xi_nodes[j];
        xi.push(level);
        values.push(level * (d.fxx.abs() + d.fxxi.abs() + d.fxixi.abs()));
    }
    let fitted_exponent = if values.iter().all(|&v| v > 1e-300) {
        let lx: Vec<f64> = xi.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        Some(ls_slope(&lx, &ly))
    } else {
        None
    };
    Ok(BoundaryDecay { x_star: grid.x_nodes[i], xi, values, fitted_exponent })
}

/// Bundle of weighted norms of one field.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub l2w: f64,
    pub h1w: f64,
    pub h2w_local: f64,
    pub lpw: f64,
    pub p: f64,
    pub holder_alpha: f64,
    pub alpha: f64,
    /// Sampled surrogate for the 2+alpha norm: alpha-seminorms of f and of
    /// `xi * second derivatives` are not tracked separately; this reports
    /// the alpha-seminorm of the field plus its sup norm on the disc.
    pub holder_2alpha: f64,
}

impl NormReport {
    pub const CSV_HEADER: &'static str =
        "l2w,h1w,h2w_local,lpw,p,holder_alpha,alpha,holder_2alpha";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.l2w, self.h1w, self.h2w_local, self.lpw, self.p,
            self.holder_alpha, self.alpha, self.holder_2alpha
        )
    }

    /// Computes the full bundle on the given half-disc.
    pub fn compute(f: &Field, w: &WeightParams, disc: HalfDisc, p: f64, alpha: f64) -> Result<NormReport> {
        let l2w = norm_l2w(f, w);
        let h1w = norm_h1w(f, w);
        let h2w_local = norm_h2w_local(f, w, disc)?;
        let lpw = norm_lpw(f, w, p, disc)?;
        let holder_alpha = holder_seminorm(f, alpha, disc, 200_000);
        let mut sup = 0.0f64;
        for i in 0..f.grid.x_nodes.len() {
            for j in 0..f.grid.xi_nodes.len() {
                let (x, xi) = f.grid.node(i, j);
                if disc.contains(x, xi) {
                    sup = sup.max(f.at(i, j).abs());
                }
            }
        }
        Ok(NormReport {
            l2w,
            h1w,
            h2w_local,
            lpw,
            p,
            holder_alpha,
            alpha,
            holder_2alpha: sup + holder_alpha,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use std::sync::Arc;

    fn wp(beta: f64, gamma: f64, mu: f64) -> WeightParams {
        WeightParams { beta, gamma, mu }
    }

    fn grid(nx: usize, nxi: usize) -> Arc<Grid2D> {
        Arc::new(Grid2D::new(-1.0, 1.0, nx, 1.0, nxi, 2.0).unwrap())
    }

    #[test]
    fn weight_values() {
        let w = wp(2.0, 3.0, 1.0);
        assert!((weight_w(0.0, 1.0, &w).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert!((weight_w(1.0, 1.0, &w).unwrap() - (-4.0f64).exp()).abs() < 1e-12);
        assert!(weight_w(0.0, 0.0, &w).is_err());
        assert_eq!(weight_at_node(0.3, 0.0, &w), 0.0);
        // xi^{beta-1} -> 0 as xi -> 0+ for beta > 1.
        assert!(weight_w(0.0, 1e-12, &w).unwrap() < 1e-10);
    }

    #[test]
    fn cyclo_known_values() {
        assert_eq!(cyclo_dist((0.3, 0.7), (0.3, 0.7)), 0.0);
        // Boundary point against (x, xi): s = sqrt(xi / 2).
        let s = cyclo_dist((0.2, 0.0), (0.2, 0.5));
        assert!((s - 0.5) < 1e-12 && (s - (0.5f64 / 2.0).sqrt()).abs() < 1e-12);
        let s2 = cyclo_dist((0.0, 0.0), (1.0, 0.0));
        assert!((s2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cyclo_symmetry_and_relaxed_triangle() {
        let mut state = 42u64;
        let mut rnd = || {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100_000 {
            let p1 = (4.0 * rnd() - 2.0, 2.0 * rnd());
            let p2 = (4.0 * rnd() - 2.0, 2.0 * rnd());
            let p3 = (4.0 * rnd() - 2.0, 2.0 * rnd());
            let d12 = cyclo_dist(p1, p2);
            let d21 = cyclo_dist(p2, p1);
            assert_eq!(d12.to_bits(), d21.to_bits());
            // Relaxed triangle inequality with factor 2.
            assert!(d12 <= 2.0 * (cyclo_dist(p1, p3) + cyclo_dist(p3, p2)) + 1e-15);
        }
    }

    #[test]
    fn l2w_zero_and_constant() {
        let g = grid(40, 32);
        let w = wp(2.0, 1.0, 0.5);
        let zero = Field::zeros(g.clone());
        assert_eq!(norm_l2w(&zero, &w), 0.0);

        // Closed form for beta = 2, gamma = 1, mu -> 0 on [-1,1] x (0,1]:
        // integral = 2 (1 - e^{-1}) * 1/2.
        let w0 = wp(2.0, 1.0, 1e-12);
        let one = Field::from_fn(g, |_, _| 1.0);
        let want = (1.0 - (-1.0f64).exp()).sqrt();
        let got = norm_l2w(&one, &w0);
        assert!((got - want).abs() < 5e-3, "{got} vs {want}");
    }

    #[test]
    fn l2w_homogeneous_and_triangle() {
        let g = grid(24, 20);
        let w = wp(2.0, 1.5, 0.7);
        let f = Field::from_fn(g.clone(), |x, xi| (x * 3.1).sin() + xi * xi);
        let h = Field::from_fn(g.clone(), |x, xi| (x - xi).cos());
        let mut cf = f.clone();
        for v in cf.values.iter_mut() {
            *v *= 3.0;
        }
        assert!((norm_l2w(&cf, &w) - 3.0 * norm_l2w(&f, &w)).abs() < 1e-10);
        let mut sum = f.clone();
        for (a, b) in sum.values.iter_mut().zip(h.values.iter()) {
            *a += b;
        }
        assert!(norm_l2w(&sum, &w) <= norm_l2w(&f, &w) + norm_l2w(&h, &w) + 1e-10);
        assert!(norm_h1w(&sum, &w) <= norm_h1w(&f, &w) + norm_h1w(&h, &w) + 1e-10);
    }

    #[test]
    fn h1w_constant_equals_l2w_and_h_le_v() {
        let g = grid(24, 20);
        let w = wp(2.0, 1.0, 0.5);
        let c = Field::from_fn(g.clone(), |_, _| 2.5);
        assert!((norm_h1w(&c, &w) - norm_l2w(&c, &w)).abs() < 1e-12);
        let f = Field::from_fn(g, |x, xi| x.sin() * (1.0 + xi));
        assert!(norm_l2w(&f, &w) <= norm_h1w(&f, &w));
    }

    #[test]
    fn h1w_linear_closed_form() {
        // f = x on [-1,1] x (0,1], beta=2, gamma=1, mu->0:
        // seminorm^2 = int xi^2 dxi * int e^{-|x|} dx = (1/3) * 2(1-e^{-1}).
        let g = grid(60, 48);
        let w = wp(2.0, 1.0, 1e-12);
        let f = Field::from_fn(g, |x, _| x);
        let got = seminorm_h1w_sq(&f, &w);
        let want = 2.0 * (1.0 - (-1.0f64).exp()) / 3.0;
        assert!((got - want).abs() < 5e-3, "{got} vs {want}");
    }

    #[test]
    fn h1w_noise_increases_seminorm() {
        let g = grid(10, 10);
        let w = wp(2.0, 1.0, 0.5);
        let f = Field::from_fn(g.clone(), |x, xi| x + xi);
        let noisy = Field::from_fn(g, |x, xi| {
            x + xi + 0.05 * ((40.0 * x).sin() * (40.0 * xi).cos())
        });
        assert!(seminorm_h1w_sq(&noisy, &w) > seminorm_h1w_sq(&f, &w));
    }

    #[test]
    fn h2w_local_cases() {
        let g = grid(40, 32);
        let w = wp(2.0, 1.0, 0.5);
        let disc = HalfDisc { x0: 0.0, radius: 0.8 };
        let zero = Field::zeros(g.clone());
        assert_eq!(norm_h2w_local(&zero, &w, disc).unwrap(), 0.0);

        // f = 1: only the zeroth term contributes.
        let one = Field::from_fn(g.clone(), |_, _| 1.0);
        let got = norm_h2w_local(&one, &w, disc).unwrap();
        let mut want_sq = 0.0;
        for i in 0..g.x_nodes.len() {
            for j in 1..g.xi_nodes.len() {
                let (x, xi) = g.node(i, j);
                if disc.contains(x, xi) {
                    want_sq += g.quad_weight(i, j) * xi.powf(w.beta - 1.0);
                }
            }
        }
        assert!((got - want_sq.sqrt()).abs() < 1e-12);
        assert!(norm_h2w_local(&one, &w, HalfDisc { x0: 50.0, radius: 0.1 }).is_err());
    }

    #[test]
    fn h2w_local_xy_closed_form() {
        // f = x * xi on a half-disc: fxx = fxixi = 0, fxxi = 1, fx = xi,
        // fxi = x. Oracle via 1D angular quadrature of sin-power moments.
        let g = Arc::new(Grid2D::new(-1.0, 1.0, 160, 1.0, 140, 2.0).unwrap());
        let w = wp(2.0, 1.0, 0.5);
        let r = 0.9;
        let disc = HalfDisc { x0: 0.0, radius: r };
        let f = Field::from_fn(g, |x, xi| x * xi);
        let got = norm_h2w_local(&f, &w, disc).unwrap();

        // int_{B+_r} xi^a dx dxi = r^{a+2}/(a+2) * int_0^pi sin^a
        let sin_moment = |a: f64| -> f64 {
            let n = 40_000;
            let h = std::f64::consts::PI / n as f64;
            let mut s = 0.0;
            for k in 0..=n {
                let phi = k as f64 * h;
                let v = phi.sin().powf(a);
                let c = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += c * v;
            }
            s * h
        };
        let int_pow = |a: f64| r.powf(a + 2.0) / (a + 2.0) * sin_moment(a);
        // terms: 1 * xi^{beta+1}; (xi^2 + x^2) xi^{beta-1}; (x xi)^2 xi^{beta-1}
        let b = w.beta;
        let t1 = int_pow(b + 1.0);
        let t2 = int_pow(b + 1.0) + {
            // int x^2 xi^{beta-1} = r^{beta+3}/(beta+3) int cos^2 sin^{beta-1}
            let n = 40_000;
            let h = std::f64::consts::PI / n as f64;
            let mut s = 0.0;
            for k in 0..=n {
                let phi = k as f64 * h;
                let v = phi.cos().powi(2) * phi.sin().powf(b - 1.0);
                let c = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += c * v;
            }
            r.powf(b + 3.0) / (b + 3.0) * s * h
        };
        let t3 = {
            let n = 40_000;
            let h = std::f64::consts::PI / n as f64;
            let mut s = 0.0;
            for k in 0..=n {
                let phi = k as f64 * h;
                let v = phi.cos().powi(2) * phi.sin().powf(b + 1.0);
                let c = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += c * v;
            }
            r.powf(b + 5.0) / (b + 5.0) * s * h
        };
        let want = (t1 + t2 + t3).sqrt();
        assert!(((got - want) / want).abs() < 2e-2, "{got} vs {want}");
    }

    #[test]
    fn holder_cases() {
        let g = grid(24, 20);
        let disc = HalfDisc { x0: 0.0, radius: 0.9 };
        let c = Field::from_fn(g.clone(), |_, _| 3.0);
        assert_eq!(holder_seminorm(&c, 0.5, disc, 10_000), 0.0);

        // f = x with the pair (0,1), (1,1): ratio = 3^{1/4}.
        let gg = Arc::new(Grid2D::new(0.0, 1.0, 4, 1.0, 4, 1.0).unwrap());
        let f = Field::from_fn(gg, |x, _| x);
        let disc2 = HalfDisc { x0: 0.5, radius: 10.0 };
        let got = holder_seminorm(&f, 0.5, disc2, 1_000_000);
        let want = 3.0f64.powf(0.25);
        assert!(got >= want - 1e-12, "{got} vs {want}");
    }

    #[test]
    fn holder_budget_monotone() {
        let g = grid(30, 30);
        let disc = HalfDisc { x0: 0.0, radius: 0.95 };
        let f = Field::from_fn(g, |x, xi| (5.0 * x).sin() + (3.0 * xi).cos());
        let mut prev = 0.0;
        for budget in [100, 200, 400, 800, 1600, 100_000] {
            let v = holder_seminorm(&f, 0.3, disc, budget);
            assert!(v >= prev - 1e-15, "budget {budget}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn boundary_decay_cases() {
        let g = Arc::new(Grid2D::new(-1.0, 1.0, 30, 1.0, 24, 2.0).unwrap());
        // f = x: second derivatives vanish.
        let fx = Field::from_fn(g.clone(), |x, _| x);
        let d = boundary_limit_xi_d2(&fx, 0.05).unwrap();
        assert!(d.values.iter().all(|&v| v.abs() < 1e-10));
        assert!(d.fitted_exponent.is_none());

        // f = xi^2: entries 2 xi_j, slope 1.
        let f2 = Field::from_fn(g.clone(), |_, xi| xi * xi);
        let d2 = boundary_limit_xi_d2(&f2, 0.0).unwrap();
        for (v, xi) in d2.values.iter().zip(d2.xi.iter()) {
            assert!((v - 2.0 * xi).abs() < 1e-8 * (1.0 + xi));
        }
        assert!((d2.fitted_exponent.unwrap() - 1.0).abs() < 1e-6);

        // f = xi ln xi: entries approach 1, exponent near 0.
        let f3 = Field::from_fn(g, |_, xi| if xi > 0.0 { xi * xi.ln() } else { 0.0 });
        let d3 = boundary_limit_xi_d2(&f3, 0.0).unwrap();
        let e = d3.fitted_exponent.unwrap();
        assert!(e.abs() < 0.35, "exponent {e} should be near 0");

        assert!(boundary_limit_xi_d2(&fx, 2.0).is_err());
    }

    #[test]
    fn weight_quadrature_first_order_convergence() {
        // Integral of w over [-1,1] x (0,1] has a closed x-factor and a
        // 1D xi-factor computed by fine Simpson as the oracle.
        let w = wp(1.5, 1.0, 0.8);
        let x_factor = 2.0 * (1.0 - (-1.0f64).exp());
        let xi_oracle = {
            let n = 2_000_000;
            let h = 1.0 / n as f64;
            let mut s = 0.0;
            for k in 1..=n {
                // midpoint rule handles the xi^{beta-1} endpoint
                let xi = (k as f64 - 0.5) * h;
                s += xi.powf(w.beta - 1.0) * (-w.mu * xi).exp();
            }
            s * h
        };
        let want = x_factor * xi_oracle;
        let quad = |n: usize| -> f64 {
            let g = Grid2D::new(-1.0, 1.0, n, 1.0, n, 2.0).unwrap();
            let mut s = 0.0;
            for i in 0..g.x_nodes.len() {
                for j in 0..g.xi_nodes.len() {
                    let (x, xi) = g.node(i, j);
                    s += g.quad_weight(i, j) * weight_at_node(x, xi, &w);
                }
            }
            s
        };
        let e1 = (quad(40) - want).abs();
        let e2 = (quad(80) - want).abs();
        assert!(e2 < e1 / 1.8, "errors {e1} -> {e2} should drop at order >= 1");
    }
}
