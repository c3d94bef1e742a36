//! Truncated tensor grid over `(x, xi)` with xi-grading toward the
//! degenerate boundary and trapezoid quadrature weights for `dx dxi`.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};

/// Tensor grid on `[x_min, x_max] x [0, xi_max]`. The x-nodes are uniform;
/// the xi-nodes are graded as `xi_j = xi_max (j/N)^q` so that spacing
/// concentrates near `xi = 0`. Node `(i, j)` has linear index
/// `i * (n_xi + 1) + j` (xi fastest).
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub x_nodes: Vec<f64>,
    pub xi_nodes: Vec<f64>,
    pub grading_exponent: f64,
    /// 1D trapezoid weights in x.
    pub wx: Vec<f64>,
    /// 1D trapezoid weights in xi.
    pub wxi: Vec<f64>,
}

impl Grid2D {
    /// Builds the grid with `nx` intervals in x and `nxi` intervals in xi.
    pub fn new(x_min: f64, x_max: f64, nx: usize, xi_max: f64, nxi: usize, grading: f64) -> Result<Grid2D> {
        if !(x_max > x_min) || !(xi_max > 0.0) {
            return Err(Error::Domain(format!(
                "degenerate grid extents: x in [{x_min}, {x_max}], xi_max = {xi_max}"
            )));
        }
        if nx < 4 || nxi < 4 {
            return Err(Error::Domain(format!("grid too coarse: nx = {nx}, nxi = {nxi}")));
        }
        if !(grading >= 1.0) {
            return Err(Error::Domain(format!("grading exponent {grading} must be >= 1")));
        }
        let hx = (x_max - x_min) / nx as f64;
        let x_nodes: Vec<f64> = (0..=nx).map(|i| x_min + hx * i as f64).collect();
        let xi_nodes: Vec<f64> = (0..=nxi)
            .map(|j| xi_max * (j as f64 / nxi as f64).powf(grading))
            .collect();
        let wx = trapezoid_weights(&x_nodes);
        let wxi = trapezoid_weights(&xi_nodes);
        Ok(Grid2D { x_nodes, xi_nodes, grading_exponent: grading, wx, wxi })
    }

    pub fn nx(&self) -> usize {
        self.x_nodes.len() - 1
    }

    pub fn nxi(&self) -> usize {
        self.xi_nodes.len() - 1
    }

    /// Number of nodes, `(nx + 1)(nxi + 1)`.
    pub fn len(&self) -> usize {
        self.x_nodes.len() * self.xi_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.xi_nodes.len() + j
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x_nodes[i], self.xi_nodes[j])
    }

    /// Quadrature weight of node `(i, j)` for the plain measure `dx dxi`.
    #[inline]
    pub fn quad_weight(&self, i: usize, j: usize) -> f64 {
        self.wx[i] * self.wxi[j]
    }

    /// Uniform x-spacing.
    pub fn hx(&self) -> f64 {
        self.x_nodes[1] - self.x_nodes[0]
    }

    /// Smallest positive xi-spacing (the first graded cell).
    pub fn h_xi_min(&self) -> f64 {
        self.xi_nodes[1] - self.xi_nodes[0]
    }

    /// Content hash of the node coordinates, for run manifests and operator
    /// metadata.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in self.x_nodes.iter().chain(self.xi_nodes.iter()) {
            h.update(v.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Bilinear interpolation weights for a point inside the grid: returns
    /// the cell `(i, j)` and fractional offsets.
    pub fn locate(&self, x: f64, xi: f64) -> Result<(usize, usize, f64, f64)> {
        let nx = self.nx();
        let nxi = self.nxi();
        if x < self.x_nodes[0] || x > self.x_nodes[nx] || xi < 0.0 || xi > self.xi_nodes[nxi] {
            return Err(Error::Domain(format!("point ({x}, {xi}) outside grid")));
        }
        let i = ((x - self.x_nodes[0]) / self.hx()).floor() as usize;
        let i = i.min(nx - 1);
        let mut j = match self.xi_nodes.binary_search_by(|v| v.partial_cmp(&xi).unwrap()) {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        };
        j = j.min(nxi - 1);
        let tx = (x - self.x_nodes[i]) / (self.x_nodes[i + 1] - self.x_nodes[i]);
        let txi = (xi - self.xi_nodes[j]) / (self.xi_nodes[j + 1] - self.xi_nodes[j]);
        Ok((i, j, tx, txi))
    }
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    w[0] = 0.5 * (nodes[1] - nodes[0]);
    w[n - 1] = 0.5 * (nodes[n - 1] - nodes[n - 2]);
    for i in 1..n - 1 {
        w[i] = 0.5 * (nodes[i + 1] - nodes[i - 1]);
    }
    w
}

/// Derivative weights must sum to zero so that constants are annihilated
/// exactly in floating point; the residual roundoff is folded into the
/// largest-magnitude weight.
fn normalize_zero_sum(mut w: [f64; 3]) -> [f64; 3] {
    let s = w[0] + w[1] + w[2];
    let mut k = 0;
    for i in 1..3 {
        if w[i].abs() > w[k].abs() {
            k = i;
        }
    }
    w[k] -= s;
    w
}

/// Three-point Lagrange first-derivative weights at evaluation point `x`
/// for nodes `(a, b, c)`.
pub fn lagrange3_d1(a: f64, b: f64, c: f64, x: f64) -> [f64; 3] {
    normalize_zero_sum([
        (2.0 * x - b - c) / ((a - b) * (a - c)),
        (2.0 * x - a - c) / ((b - a) * (b - c)),
        (2.0 * x - a - b) / ((c - a) * (c - b)),
    ])
}

/// Three-point Lagrange second-derivative weights (independent of the
/// evaluation point).
pub fn lagrange3_d2(a: f64, b: f64, c: f64) -> [f64; 3] {
    normalize_zero_sum([
        2.0 / ((a - b) * (a - c)),
        2.0 / ((b - a) * (b - c)),
        2.0 / ((c - a) * (c - b)),
    ])
}
