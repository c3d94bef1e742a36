//! Discretizations of the Heston operator: a compact-stencil pointwise
//! operator `A`, the boundary operator `B` and remainder `g = (B - A)u`
//! sharing its derivative values, and a bilinear-element assembly of the
//! sesquilinear form with mass (Gram) matrix, spectral-shift estimation,
//! and resolvent solves.

use crate::error::{Error, Result};
use crate::exec;
use crate::field::Field;
use crate::grid::{lagrange3_d1, lagrange3_d2, Grid2D};
use crate::linalg::{band_cholesky_is_spd, BandedLu, BandedMatrix};
use crate::params::{ModelParams, WeightParams};
use crate::spaces::weight_at_node;
use std::sync::Arc;

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Shared discrete derivative values at an interior node. The mixed and
/// pure-x second derivatives come from the divergence-form flux difference,
/// so `A`, `B`, and `g` satisfy `A = B - g` exactly in floating point.
struct InteriorDerivs {
    ux: f64,
    uxi: f64,
    uxx: f64,
    uxxi: f64,
    uxixi: f64,
}

fn interior_derivs(f: &Field, i: usize, j: usize) -> InteriorDerivs {
    let grid = &f.grid;
    let hx = grid.hx();
    let ux = (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * hx);
    let uxx = (f.at(i + 1, j) - 2.0 * f.at(i, j) + f.at(i - 1, j)) / (hx * hx);
    let d_xi = |ii: usize| -> f64 {
        let (a, b, c) = (grid.xi_nodes[j - 1], grid.xi_nodes[j], grid.xi_nodes[j + 1]);
        let w = lagrange3_d1(a, b, c, b);
        w[0] * f.at(ii, j - 1) + w[1] * f.at(ii, j) + w[2] * f.at(ii, j + 1)
    };
    let uxi = d_xi(i);
    // Divergence-form mixed term: x-central difference of the xi-derivative.
    let uxxi = (d_xi(i + 1) - d_xi(i - 1)) / (2.0 * hx);
    let (a, b, c) = (grid.xi_nodes[j - 1], grid.xi_nodes[j], grid.xi_nodes[j + 1]);
    let w2 = lagrange3_d2(a, b, c);
    let uxixi = w2[0] * f.at(i, j - 1) + w2[1] * f.at(i, j) + w2[2] * f.at(i, j + 1);
    InteriorDerivs { ux, uxi, uxx, uxxi, uxixi }
}

/// Pointwise finite-difference realization of the Heston operator on the
/// grid interior. The boundary row `j = 0` belongs to the transport
/// equation and is left untouched; far-field rows are left untouched too.
pub struct DiscreteOperator {
    pub grid: Arc<Grid2D>,
    pub params: ModelParams,
    pub weights: WeightParams,
    pub grid_hash: String,
}

impl DiscreteOperator {
    pub fn new(grid: Arc<Grid2D>, params: ModelParams, weights: WeightParams) -> DiscreteOperator {
        let grid_hash = grid.hash();
        DiscreteOperator { grid, params, weights, grid_hash }
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &f.grid) || self.grid_hash == f.grid.hash() {
            Ok(())
        } else {
            Err(Error::GridMismatch("field grid differs from operator grid".into()))
        }
    }

    /// `(A u)(x, xi)` at interior nodes; edge rows are returned as 0.
    pub fn apply_a(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        let grid = &self.grid;
        let p = &self.params;
        let nx = grid.nx();
        let nxi = grid.nxi();
        let mut out = Field::zeros(grid.clone());
        out.time = f.time;
        let rows: Vec<Vec<f64>> = exec::map_indexed(nx - 1, |r| {
            let i = r + 1;
            let mut row = vec![0.0; nxi - 1];
            for j in 1..nxi {
                let xi = grid.xi_nodes[j];
                let d = interior_derivs(f, i, j);
                row[j - 1] = -0.5 * p.sigma * xi * (d.uxx + 2.0 * p.rho * d.uxxi + d.uxixi)
                    + (p.q_r() + 0.5 * p.sigma * xi) * d.ux
                    - p.kappa * (p.theta_sigma() - xi) * d.uxi;
            }
            row
        });
        for (r, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                out.set(r + 1, j + 1, v);
            }
        }
        Ok(out)
    }

    /// Boundary operator `B u = q_r u_x - kappa theta_sigma u_xi` on the
    /// row `xi = 0`, with a one-sided second-order xi-stencil.
    pub fn apply_b(&self, f: &Field) -> Result<Vec<f64>> {
        self.check_grid(f)?;
        let grid = &self.grid;
        let p = &self.params;
        let nx = grid.nx();
        let hx = grid.hx();
        let (a, b, c) = (grid.xi_nodes[0], grid.xi_nodes[1], grid.xi_nodes[2]);
        let w = lagrange3_d1(a, b, c, a);
        let mut out = vec![0.0; nx + 1];
        for i in 0..=nx {
            let ux = if i == 0 {
                (-3.0 * f.at(0, 0) + 4.0 * f.at(1, 0) - f.at(2, 0)) / (2.0 * hx)
            } else if i == nx {
                (3.0 * f.at(nx, 0) - 4.0 * f.at(nx - 1, 0) + f.at(nx - 2, 0)) / (2.0 * hx)
            } else {
                (f.at(i + 1, 0) - f.at(i - 1, 0)) / (2.0 * hx)
            };
            let uxi = w[0] * f.at(i, 0) + w[1] * f.at(i, 1) + w[2] * f.at(i, 2);
            out[i] = p.q_r() * ux - p.kappa * p.theta_sigma() * uxi;
        }
        Ok(out)
    }

    /// `B` extended to interior nodes with the interior stencils, for the
    /// identity `A = B - g` on shared nodes.
    pub fn apply_b_interior(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        let grid = &self.grid;
        let p = &self.params;
        let mut out = Field::zeros(grid.clone());
        out.time = f.time;
        for i in 1..grid.nx() {
            for j in 1..grid.nxi() {
                let d = interior_derivs(f, i, j);
                out.set(i, j, p.q_r() * d.ux - p.kappa * p.theta_sigma() * d.uxi);
            }
        }
        Ok(out)
    }

    /// Remainder `g = (B - A)u = (sigma xi / 2)(u_xx + 2 rho u_xxi + u_xixi)
    /// - xi (sigma u_x / 2 + kappa u_xi)` at interior nodes.
    pub fn apply_g(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        let grid = &self.grid;
        let p = &self.params;
        let mut out = Field::zeros(grid.clone());
        out.time = f.time;
        for i in 1..grid.nx() {
            for j in 1..grid.nxi() {
                let xi = grid.xi_nodes[j];
                let d = interior_derivs(f, i, j);
                out.set(
                    i,
                    j,
                    0.5 * p.sigma * xi * (d.uxx + 2.0 * p.rho * d.uxxi + d.uxixi)
                        - xi * (0.5 * p.sigma * d.ux + p.kappa * d.uxi),
                );
            }
        }
        Ok(out)
    }

    /// Stencil coefficient table row for an interior node: the neighbors a
    /// row touches and their coefficients (at most 9 per row).
    pub fn stencil_row(&self, i: usize, j: usize) -> Vec<((usize, usize), f64)> {
        let grid = &self.grid;
        assert!(i >= 1 && i < grid.nx() && j >= 1 && j < grid.nxi());
        let mut coeffs = std::collections::BTreeMap::new();
        let mut probe = Field::zeros(self.grid.clone());
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let ii = (i as i64 + di) as usize;
                let jj = (j as i64 + dj) as usize;
                probe.set(ii, jj, 1.0);
                let a = self.apply_a(&probe).unwrap();
                let v = a.at(i, j);
                if v != 0.0 {
                    coeffs.insert((ii, jj), v);
                }
                probe.set(ii, jj, 0.0);
            }
        }
        coeffs.into_iter().collect()
    }
}

/// Interior index map: unknowns are nodes with `1 <= i <= nx-1`,
/// `1 <= j <= nxi-1`, ordered xi-fastest.
#[derive(Debug, Clone)]
pub struct InteriorMap {
    pub nx: usize,
    pub nxi: usize,
}

impl InteriorMap {
    #[inline]
    pub fn n(&self) -> usize {
        (self.nx - 1) * (self.nxi - 1)
    }

    #[inline]
    pub fn k(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.nxi - 1) + (j - 1)
    }

    #[inline]
    pub fn node(&self, k: usize) -> (usize, usize) {
        (k / (self.nxi - 1) + 1, k % (self.nxi - 1) + 1)
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i >= 1 && i <= self.nx - 1 && j >= 1 && j <= self.nxi - 1
    }
}

/// Bilinear-element assembly of the sesquilinear form on the interior
/// unknowns, with boundary-column couplings kept separate so known edge
/// values can be moved to right-hand sides. The Gram matrix is the lumped
/// (diagonal) mass of the w-weighted inner product: `d_a = int phi_a w`,
/// the nodal-quadrature choice that keeps the implicit step monotone
/// wherever the form has the M-matrix sign pattern.
pub struct FormAssembly {
    pub grid: Arc<Grid2D>,
    pub params: ModelParams,
    pub weights: WeightParams,
    pub map: InteriorMap,
    /// Form matrix on interior unknowns: `w^T Form u ~ (A u, w)_H`.
    pub form: BandedMatrix,
    /// Diagonal of the lumped Gram (mass) matrix.
    pub gram_diag: Vec<f64>,
    /// Per interior row, couplings to boundary nodes (full-grid index).
    pub form_bnd: Vec<Vec<(usize, f64)>>,
    pub grid_hash: String,
}

/// Assembles the form; `include_drift = false` keeps only the principal
/// gradient integral (a symmetric nonnegative form), which testing harnesses
/// use as a pure-diffusion sanity configuration.
pub fn assemble_form_with(
    grid: Arc<Grid2D>,
    params: &ModelParams,
    weights: &WeightParams,
    include_drift: bool,
) -> Result<FormAssembly> {
    params.check()?;
    weights.check()?;
    let nx = grid.nx();
    let nxi = grid.nxi();
    let map = InteriorMap { nx, nxi };
    let n = map.n();
    let band = nxi; // coupling within one cell: |di| <= 1, |dj| <= 1
    let mut form = BandedMatrix::zeros(n, band, band);
    let mut gram_diag = vec![0.0; n];
    let mut form_bnd: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

    let p = params;
    let w = weights;
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];

    for ci in 0..nx {
        for cj in 0..nxi {
            let x0 = grid.x_nodes[ci];
            let x1 = grid.x_nodes[ci + 1];
            let xi0 = grid.xi_nodes[cj];
            let xi1 = grid.xi_nodes[cj + 1];
            let hx = x1 - x0;
            let hxi = xi1 - xi0;
            let nodes = [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)];
            let mut local_f = [[0.0f64; 4]; 4];
            let mut local_g = [0.0f64; 4];
            for &s in &gauss {
                for &t in &gauss {
                    let xg = x0 + s * hx;
                    let xig = xi0 + t * hxi;
                    let ww = weight_at_node(xg, xig, w);
                    if ww == 0.0 {
                        continue;
                    }
                    let gwt = 0.25 * hx * hxi;
                    // basis values and derivatives
                    let nv = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
                    let ndx = [
                        -(1.0 - t) / hx,
                        (1.0 - t) / hx,
                        -t / hx,
                        t / hx,
                    ];
                    let ndxi = [
                        -(1.0 - s) / hxi,
                        -s / hxi,
                        (1.0 - s) / hxi,
                        s / hxi,
                    ];
                    let sgn = sign(xg);
                    let c_grad = 0.5 * p.sigma * xig * ww;
                    let c_cross = p.sigma * p.rho * xig * ww;
                    let c_ux_w = if include_drift {
                        0.5 * p.sigma * (1.0 - w.gamma * sgn) * xig * ww + p.q_r() * ww
                    } else {
                        0.0
                    };
                    let c_uxi_w = if include_drift {
                        (p.kappa - w.gamma * p.rho * p.sigma * sgn - 0.5 * w.mu * p.sigma)
                            * xig
                            * ww
                            + (0.5 * w.beta * p.sigma - p.kappa * p.theta_sigma()) * ww
                    } else {
                        0.0
                    };
                    for a in 0..4 {
                        for b in 0..4 {
                            local_f[a][b] += gwt
                                * (c_grad * (ndx[b] * ndx[a] + ndxi[b] * ndxi[a])
                                    + c_cross * ndxi[b] * ndx[a]
                                    + c_ux_w * ndx[b] * nv[a]
                                    + c_uxi_w * ndxi[b] * nv[a]);
                        }
                        // row-sum lumping: sum_b N_b = 1 on the cell
                        local_g[a] += gwt * ww * nv[a];
                    }
                }
            }
            for (a, &(ia, ja)) in nodes.iter().enumerate() {
                if !map.is_interior(ia, ja) {
                    continue; // test functions only at interior unknowns
                }
                let row = map.k(ia, ja);
                gram_diag[row] += local_g[a];
                for (b, &(ib, jb)) in nodes.iter().enumerate() {
                    if map.is_interior(ib, jb) {
                        let col = map.k(ib, jb);
                        form.add(row, col, local_f[a][b]);
                    } else {
                        let gidx = grid.idx(ib, jb);
                        if local_f[a][b] != 0.0 {
                            form_bnd[row].push((gidx, local_f[a][b]));
                        }
                    }
                }
            }
        }
    }
    for v in form_bnd.iter_mut() {
        v.sort_by_key(|e| e.0);
        // merge duplicate boundary columns from adjacent cells
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(v.len());
        for &(idx, val) in v.iter() {
            if let Some(last) = merged.last_mut() {
                if last.0 == idx {
                    last.1 += val;
                    continue;
                }
            }
            merged.push((idx, val));
        }
        *v = merged;
    }
    if gram_diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::NonConvergence("lumped mass has a non-positive entry".into()));
    }
    let grid_hash = grid.hash();
    Ok(FormAssembly {
        grid,
        params: *params,
        weights: *weights,
        map,
        form,
        gram_diag,
        form_bnd,
        grid_hash,
    })
}

/// Assembles the full sesquilinear form. Requires an admissible parameter
/// set (Feller, coercivity, and beta window gates all passing).
pub fn assemble_form(
    grid: Arc<Grid2D>,
    params: &ModelParams,
    weights: &WeightParams,
) -> Result<FormAssembly> {
    let report = crate::params::validate(params, weights)?;
    if !report.admissible() {
        return Err(Error::InvalidParams(format!(
            "configuration not admissible:\n{}",
            report.summary()
        )));
    }
    assemble_form_with(grid, params, weights, true)
}

impl FormAssembly {
    /// Extracts interior values of a full-grid field.
    pub fn restrict(&self, f: &Field) -> Vec<f64> {
        let n = self.map.n();
        let mut v = vec![0.0; n];
        for k in 0..n {
            let (i, j) = self.map.node(k);
            v[k] = f.at(i, j);
        }
        v
    }

    /// Scatters interior values into a zero field (edges stay zero).
    pub fn prolong(&self, v: &[f64]) -> Field {
        let mut f = Field::zeros(self.grid.clone());
        for (k, &val) in v.iter().enumerate() {
            let (i, j) = self.map.node(k);
            f.set(i, j, val);
        }
        f
    }

    /// `(F u)_interior` including boundary-column couplings read from `u`.
    pub fn form_action(&self, u: &Field) -> Vec<f64> {
        let ui = self.restrict(u);
        let mut y = vec![0.0; self.map.n()];
        self.form.matvec(&ui, &mut y);
        for (row, coups) in self.form_bnd.iter().enumerate() {
            for &(gidx, c) in coups {
                y[row] += c * u.values[gidx];
            }
        }
        y
    }

    /// `(G u)_interior` with the lumped diagonal mass.
    pub fn gram_action(&self, u: &Field) -> Vec<f64> {
        let mut y = self.restrict(u);
        for (v, d) in y.iter_mut().zip(self.gram_diag.iter()) {
            *v *= d;
        }
        y
    }

    /// The bilinear form `a(u, w)` for a test field supported on interior
    /// nodes.
    pub fn form_pairing(&self, u: &Field, w: &Field) -> f64 {
        let fu = self.form_action(u);
        let wi = self.restrict(w);
        exec::pairwise_sum(&fu.iter().zip(wi.iter()).map(|(a, b)| a * b).collect::<Vec<_>>())
    }

    /// Gram inner product `<u, w>_G` for interior-supported fields.
    pub fn gram_pairing(&self, u: &Field, w: &Field) -> f64 {
        let gu = self.gram_action(u);
        let wi = self.restrict(w);
        exec::pairwise_sum(&gu.iter().zip(wi.iter()).map(|(a, b)| a * b).collect::<Vec<_>>())
    }

    /// Weak application `A_h u = G^{-1} (F u)` on the interior; edge values
    /// of the result are zero.
    pub fn apply_weak(&self, u: &Field) -> Field {
        let mut y = self.form_action(u);
        for (v, d) in y.iter_mut().zip(self.gram_diag.iter()) {
            *v /= d;
        }
        let mut out = self.prolong(&y);
        out.time = u.time;
        out
    }

    /// Rows of `Gram + dt * Form` violating the M-matrix sign pattern
    /// (positive diagonal, non-positive off-diagonals, including couplings
    /// to boundary columns). An empty result certifies the implicit-Euler
    /// step as monotone for ordered data and boundary values.
    pub fn m_matrix_violations(&self, dt: f64) -> Vec<(usize, usize)> {
        let m = self.form.scale(dt).add_diag_scaled(1.0, &self.gram_diag);
        let scale = self.gram_diag[0].abs().max(1e-300);
        let tol = 1e-13 * scale;
        let mut bad = Vec::new();
        for row in 0..self.map.n() {
            let lo = row.saturating_sub(m.kl);
            let hi = (row + m.ku).min(self.map.n() - 1);
            let mut ok = m.get(row, row) > 0.0;
            for col in lo..=hi {
                if col != row && m.get(row, col) > tol {
                    ok = false;
                }
            }
            if self.form_bnd[row].iter().any(|&(_, v)| dt * v > tol) {
                ok = false;
            }
            if !ok {
                bad.push(self.map.node(row));
            }
        }
        bad
    }

    /// Estimates the coercivity shift `lambda_0 = max(0, -lambda_min)` of
    /// the symmetric part of the form against the Gram matrix. A bisection
    /// on positive definiteness of `S - s G` (banded Cholesky probe)
    /// brackets the smallest pencil eigenvalue, then inverse iteration from
    /// the bracketing shift polishes it. Deterministic: fixed start vector
    /// and tolerances.
    pub fn estimate_lambda0(&self) -> Lambda0 {
        let n = self.map.n();
        let s = self.form.symmetric_part();
        // Pencil magnitude bound: max_i sum|S_ij| / d_i.
        let mut bound = 0.0f64;
        for i in 0..n {
            let lo = i.saturating_sub(s.kl);
            let hi = (i + s.ku).min(n - 1);
            let mut r = 0.0;
            for j in lo..=hi {
                r += s.get(i, j).abs();
            }
            bound = bound.max(r / self.gram_diag[i].max(1e-300));
        }
        let spd_at = |sh: f64| band_cholesky_is_spd(&s.add_diag_scaled(-sh, &self.gram_diag));
        let mut lo = -bound - 1.0;
        let mut hi = bound + 1.0;
        let mut guard = 0;
        while !spd_at(lo) && guard < 60 {
            lo = 2.0 * lo - 1.0;
            guard += 1;
        }
        if guard == 60 {
            return Lambda0 { value: bound.max(0.0), converged: false, iterations: 0 };
        }
        let mut its = 0;
        while hi - lo > 1e-10 * hi.abs().max(1.0) && its < 200 {
            let mid = 0.5 * (lo + hi);
            if spd_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            its += 1;
        }
        // Inverse-iteration polish from the bracketing shift (strictly below
        // the smallest eigenvalue, so the iteration targets it).
        let shift = lo - 1e-8 * lo.abs().max(1.0);
        let m = s.add_diag_scaled(-shift, &self.gram_diag);
        let Ok(lu) = m.factor() else {
            return Lambda0 { value: (-lo).max(0.0), converged: false, iterations: its };
        };
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut rayleigh = f64::INFINITY;
        let mut sx = vec![0.0; n];
        for it in 0..100 {
            let gx: Vec<f64> = x.iter().zip(self.gram_diag.iter()).map(|(a, d)| a * d).collect();
            let mut y = lu.solve(&gx);
            let ny = norm(&y);
            for v in y.iter_mut() {
                *v /= ny;
            }
            s.matvec(&y, &mut sx);
            let num: f64 = y.iter().zip(sx.iter()).map(|(a, b)| a * b).sum();
            let den: f64 =
                y.iter().zip(self.gram_diag.iter()).map(|(a, d)| a * a * d).sum();
            let r = num / den;
            x = y;
            if (r - rayleigh).abs() <= 1e-11 * r.abs().max(1.0) {
                return Lambda0 { value: (-r).max(0.0), converged: true, iterations: its + it + 1 };
            }
            rayleigh = r;
        }
        // Cap hit: fall back to the certified bracket, flagged conservative.
        Lambda0 { value: (-lo).max(0.0), converged: false, iterations: its + 100 }
    }

    /// Prepares a resolvent `(lambda I + A)^{-1}` as a reusable factored
    /// solver; requires `lambda` above the coercivity shift.
    pub fn resolvent(&self, lambda: f64) -> Result<Resolvent<'_>> {
        let m = self.form.add_diag_scaled(lambda, &self.gram_diag);
        let lu = m.factor().map_err(|e| match e {
            Error::SingularFactorization { row, .. } => {
                let (i, j) = self.map.node(row);
                Error::SingularFactorization { row, i, j }
            }
            other => other,
        })?;
        Ok(Resolvent { assembly: self, lambda, matrix: m, lu })
    }

    /// One-shot resolvent solve; see [`Resolvent::solve`].
    pub fn resolvent_solve(&self, lambda: f64, rhs: &Field) -> Result<Field> {
        self.resolvent(lambda)?.solve(rhs)
    }
}

/// Result of the lambda_0 estimation; `converged = false` marks the
/// conservative fallback estimate.
#[derive(Debug, Clone, Copy)]
pub struct Lambda0 {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Factored `(lambda G + F)` with the far-field closure `u -> rhs / lambda`
/// on edge nodes (where the truncated operator degenerates to
/// multiplication by `lambda`).
pub struct Resolvent<'a> {
    assembly: &'a FormAssembly,
    pub lambda: f64,
    matrix: BandedMatrix,
    lu: BandedLu,
}

impl Resolvent<'_> {
    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        let asm = self.assembly;
        if asm.grid_hash != rhs.grid.hash() {
            return Err(Error::GridMismatch("rhs grid differs from assembly grid".into()));
        }
        let mut b = asm.gram_action(rhs);
        // Move known edge values of u (= rhs / lambda) to the right side.
        for (row, coups) in asm.form_bnd.iter().enumerate() {
            for &(gidx, c) in coups {
                b[row] -= c * rhs.values[gidx] / self.lambda;
            }
        }
        self.lu.solve_in_place(&mut b);
        let mut out = asm.prolong(&b);
        for i in 0..=asm.map.nx {
            for j in [0usize, asm.map.nxi] {
                let g = asm.grid.idx(i, j);
                out.values[g] = rhs.values[g] / self.lambda;
            }
        }
        for j in 0..=asm.map.nxi {
            for i in [0usize, asm.map.nx] {
                let g = asm.grid.idx(i, j);
                out.values[g] = rhs.values[g] / self.lambda;
            }
        }
        out.time = rhs.time;
        // Residual check on the interior system.
        let ui = asm.restrict(&out);
        let mut r = vec![0.0; asm.map.n()];
        self.matrix.matvec(&ui, &mut r);
        let mut b2 = asm.gram_action(rhs);
        for (row, coups) in asm.form_bnd.iter().enumerate() {
            for &(gidx, c) in coups {
                b2[row] -= c * rhs.values[gidx] / self.lambda;
            }
        }
        let scale: f64 = b2.iter().map(|v| v * v).sum::<f64>().sqrt();
        let resid: f64 =
            r.iter().zip(b2.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if scale > 0.0 && resid / scale > 1e-10 {
            return Err(Error::NonConvergence(format!(
                "resolvent residual {:.3e} exceeds 1e-10",
                resid / scale
            )));
        }
        Ok(out)
    }
}

/// Writes matrix triplets `(row, col, value)` as text lines.
pub fn triplets_text(m: &BandedMatrix) -> String {
    let mut s = String::new();
    for (i, j, v) in m.triplets() {
        s.push_str(&format!("{i} {j} {v}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;

    fn sample() -> (ModelParams, WeightParams) {
        let p = ModelParams {
            sigma: 0.2,
            kappa: 2.0,
            theta: 0.04,
            rho: -0.5,
            r: 0.0,
            q: 0.0,
            lambda_risk: 0.0,
        };
        let w = WeightParams { beta: 2.0, gamma: 2.5, mu: 8.75 };
        assert!(validate(&p, &w).unwrap().admissible());
        (p, w)
    }

    fn grid(nx: usize, nxi: usize) -> Arc<Grid2D> {
        Arc::new(Grid2D::new(-2.0, 2.0, nx, 1.0, nxi, 2.0).unwrap())
    }

    #[test]
    fn apply_a_annihilates_constants_exactly() {
        let (p, w) = sample();
        let g = grid(20, 16);
        let op = DiscreteOperator::new(g.clone(), p, w);
        let one = Field::from_fn(g, |_, _| 1.0);
        let a = op.apply_a(&one).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn apply_a_on_linear_fields() {
        let (p, w) = sample();
        let g = grid(20, 16);
        let op = DiscreteOperator::new(g.clone(), p, w);
        let fx = Field::from_fn(g.clone(), |x, _| x);
        let a = op.apply_a(&fx).unwrap();
        for i in 1..g.nx() {
            for j in 1..g.nxi() {
                let xi = g.xi_nodes[j];
                let want = p.q_r() + 0.5 * p.sigma * xi;
                assert!((a.at(i, j) - want).abs() < 1e-11, "{} vs {}", a.at(i, j), want);
            }
        }
        let fxi = Field::from_fn(g.clone(), |_, xi| xi);
        let a2 = op.apply_a(&fxi).unwrap();
        for i in 1..g.nx() {
            for j in 1..g.nxi() {
                let xi = g.xi_nodes[j];
                let want = -p.kappa * (p.theta_sigma() - xi);
                assert!((a2.at(i, j) - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn apply_b_on_linear_fields() {
        let (p, w) = sample();
        let g = grid(20, 16);
        let op = DiscreteOperator::new(g.clone(), p, w);
        let one = Field::from_fn(g.clone(), |_, _| 1.0);
        assert!(op.apply_b(&one).unwrap().iter().all(|&v| v.abs() < 1e-12));
        let fx = Field::from_fn(g.clone(), |x, _| x);
        for v in op.apply_b(&fx).unwrap() {
            assert!((v - p.q_r()).abs() < 1e-11);
        }
        let fxi = Field::from_fn(g.clone(), |_, xi| xi);
        for v in op.apply_b(&fxi).unwrap() {
            assert!((v + p.kappa * p.theta_sigma()).abs() < 1e-10);
        }
    }

    #[test]
    fn g_remainder_and_identity_on_monomials() {
        let (p, w) = sample();
        let g = grid(16, 12);
        let op = DiscreteOperator::new(g.clone(), p, w);

        // u = x: g = -xi sigma / 2 and B - g = A.
        let fx = Field::from_fn(g.clone(), |x, _| x);
        let gv = op.apply_g(&fx).unwrap();
        for i in 1..g.nx() {
            for j in 1..g.nxi() {
                let xi = g.xi_nodes[j];
                assert!((gv.at(i, j) + 0.5 * p.sigma * xi).abs() < 1e-11);
            }
        }
        let one = Field::from_fn(g.clone(), |_, _| 1.0);
        assert!(op.apply_g(&one).unwrap().values.iter().all(|&v| v == 0.0));

        // Identity A = B - g to roundoff for all monomials of degree <= 3.
        for a in 0..=3usize {
            for b in 0..=(3 - a) {
                let f = Field::from_fn(g.clone(), |x, xi| x.powi(a as i32) * xi.powi(b as i32));
                let av = op.apply_a(&f).unwrap();
                let bv = op.apply_b_interior(&f).unwrap();
                let gv = op.apply_g(&f).unwrap();
                for i in 1..g.nx() {
                    for j in 1..g.nxi() {
                        let lhs = av.at(i, j);
                        let rhs = bv.at(i, j) - gv.at(i, j);
                        let scale = lhs.abs().max(rhs.abs()).max(1.0);
                        assert!(
                            (lhs - rhs).abs() <= 1e-10 * scale,
                            "monomial x^{a} xi^{b} at ({i},{j}): {lhs} vs {rhs}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn stencil_is_compact() {
        let (p, w) = sample();
        let g = grid(12, 10);
        let op = DiscreteOperator::new(g, p, w);
        let row = op.stencil_row(5, 4);
        assert!(row.len() <= 9, "stencil touches {} neighbors", row.len());
        for ((i, j), _) in row {
            assert!((i as i64 - 5).abs() <= 1 && (j as i64 - 4).abs() <= 1);
        }
    }

    #[test]
    fn form_annihilates_constants() {
        let (p, w) = sample();
        let g = grid(14, 12);
        let asm = assemble_form(g.clone(), &p, &w).unwrap();
        let one = Field::from_fn(g, |_, _| 1.0);
        let y = asm.form_action(&one);
        let scale: f64 = asm.form.triplets().iter().map(|t| t.2.abs()).fold(0.0, f64::max);
        for v in y {
            assert!(v.abs() < 1e-12 * scale.max(1.0), "row sum {v}");
        }
    }

    #[test]
    fn gram_is_spd() {
        // Lumped mass: a positive diagonal that integrates the weight.
        let (p, w) = sample();
        let g = grid(12, 10);
        let asm = assemble_form(g.clone(), &p, &w).unwrap();
        assert!(asm.gram_diag.iter().all(|&d| d > 0.0));
        let total: f64 = asm.gram_diag.iter().sum();
        // Against the nodal quadrature of the weight over the domain.
        let mut quad = 0.0;
        for i in 0..g.x_nodes.len() {
            for j in 0..g.xi_nodes.len() {
                let (x, xi) = g.node(i, j);
                quad += g.quad_weight(i, j) * weight_at_node(x, xi, &w);
            }
        }
        assert!((total - quad).abs() < 0.1 * quad, "lumped mass {total} vs quadrature {quad}");
    }

    fn bump(cx: f64, cxi: f64, r: f64) -> impl Fn(f64, f64) -> f64 {
        move |x: f64, xi: f64| {
            let d2 = ((x - cx) / r).powi(2) + ((xi - cxi) / r).powi(2);
            if d2 < 1.0 {
                (1.0 - d2).powi(3)
            } else {
                0.0
            }
        }
    }

    #[test]
    fn duality_form_vs_pointwise_operator() {
        let (p, w) = sample();
        let err_at = |n: usize| -> f64 {
            let g = grid(n, n);
            let asm = assemble_form(g.clone(), &p, &w).unwrap();
            let op = DiscreteOperator::new(g.clone(), p, w);
            let u = Field::from_fn(g.clone(), bump(0.2, 0.5, 0.35));
            let wf = Field::from_fn(g.clone(), bump(-0.1, 0.45, 0.3));
            let weak = asm.form_pairing(&u, &wf);
            let au = op.apply_a(&u).unwrap();
            let strong = asm.gram_pairing(&au, &wf);
            (weak - strong).abs()
        };
        let e1 = err_at(24);
        let e2 = err_at(48);
        assert!(e2 < e1 / 1.8, "duality error {e1} -> {e2} should drop at order >= 1");
    }

    #[test]
    fn lambda0_pure_diffusion_is_zero() {
        let (p, w) = sample();
        let g = grid(12, 10);
        let asm = assemble_form_with(g, &p, &w, false).unwrap();
        let l0 = asm.estimate_lambda0();
        assert!(l0.converged);
        assert!(l0.value.abs() < 1e-8, "lambda0 = {}", l0.value);
    }

    #[test]
    fn lambda0_admissible_and_monotone_in_kappa() {
        let (p, w) = sample();
        let g = grid(16, 12);
        let asm = assemble_form(g.clone(), &p, &w).unwrap();
        let l0 = asm.estimate_lambda0();
        assert!(l0.converged);
        assert!(l0.value.is_finite());

        let mut prev = f64::INFINITY;
        for kappa in [2.0, 3.0, 4.0] {
            let pk = ModelParams { kappa, ..p };
            let asm_k = assemble_form(g.clone(), &pk, &w).unwrap();
            let v = asm_k.estimate_lambda0().value;
            assert!(v <= prev + 1e-9, "lambda0 not nonincreasing: {v} after {prev}");
            prev = v;
        }
    }

    #[test]
    fn coercivity_witness_rayleigh() {
        let (p, w) = sample();
        let g = grid(16, 12);
        let asm = assemble_form(g.clone(), &p, &w).unwrap();
        let l0 = asm.estimate_lambda0().value;
        let mut state = 5u64;
        let mut rnd = || {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            ((z >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..100 {
            let cx = rnd();
            let cxi = 0.3 + 0.4 * (rnd() + 0.5);
            let amp = 2.0 * rnd();
            let u = Field::from_fn(g.clone(), move |x, xi| amp * bump(cx, cxi, 0.4)(x, xi));
            let h = asm.gram_pairing(&u, &u);
            if h == 0.0 {
                continue;
            }
            let a = asm.form_pairing(&u, &u);
            assert!((a + l0 * h) / h >= -1e-8, "rayleigh {}", (a + l0 * h) / h);
        }
    }

    #[test]
    fn resolvent_constant_and_zero() {
        let (p, w) = sample();
        let g = grid(16, 12);
        let asm = assemble_form(g.clone(), &p, &w).unwrap();
        let l0 = asm.estimate_lambda0().value;
        let lambda = l0 + 1.0;

        let zero = Field::zeros(g.clone());
        let u0 = asm.resolvent_solve(lambda, &zero).unwrap();
        assert!(u0.values.iter().all(|&v| v == 0.0));

        let rhs = Field::from_fn(g.clone(), |_, _| lambda);
        let u1 = asm.resolvent_solve(lambda, &rhs).unwrap();
        for &v in &u1.values {
            assert!((v - 1.0).abs() < 1e-9, "resolvent of lambda*1 gave {v}");
        }
    }

    #[test]
    fn resolvent_roundtrip_matrix_route() {
        let (p, w) = sample();
        let g = grid(20, 16);
        let asm = assemble_form(g.clone(), &p, &w).unwrap();
        let lambda = asm.estimate_lambda0().value + 1.0;
        let cubic = Field::from_fn(g.clone(), |x, xi| {
            bump(0.0, 0.5, 0.35)(x, xi) * (1.0 + x + x * xi + xi * xi)
        });
        // rhs = (lambda I + A_h) p through the same weak matrices
        let mut rhs = Field::zeros(g.clone());
        let mut y = asm.form_action(&cubic);
        for (v, d) in y.iter_mut().zip(asm.gram_diag.iter()) {
            *v /= d;
        }
        for (k, v) in y.iter().enumerate() {
            let (i, j) = asm.map.node(k);
            rhs.set(i, j, lambda * cubic.at(i, j) + v);
        }
        let back = asm.resolvent_solve(lambda, &rhs).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for k in 0..asm.map.n() {
            let (i, j) = asm.map.node(k);
            num = num.max((back.at(i, j) - cubic.at(i, j)).abs());
            den = den.max(cubic.at(i, j).abs());
        }
        assert!(num / den.max(1.0) < 1e-8, "roundtrip error {}", num / den.max(1.0));
    }

    #[test]
    fn non_admissible_parameters_rejected() {
        let g = grid(12, 10);
        let p = ModelParams {
            sigma: 1.0,
            kappa: 0.5,
            theta: 0.2,
            rho: 0.0,
            r: 0.0,
            q: 0.0,
            lambda_risk: 0.0,
        };
        let w = WeightParams { beta: 1.5, gamma: 1.0, mu: 0.3 };
        assert!(assemble_form(g, &p, &w).is_err());
    }

    #[test]
    fn triplet_export_roundtrip() {
        let (p, w) = sample();
        let g = grid(8, 6);
        let asm = assemble_form(g, &p, &w).unwrap();
        let text = triplets_text(&asm.form);
        let mut count = 0;
        for line in text.lines() {
            let parts: Vec<&str> = line.split(' ').collect();
            assert_eq!(parts.len(), 3);
            let i: usize = parts[0].parse().unwrap();
            let j: usize = parts[1].parse().unwrap();
            let v: f64 = parts[2].parse().unwrap();
            assert!((asm.form.get(i, j) - v).abs() < 1e-15);
            count += 1;
        }
        assert!(count > 0);
    }
}
