//! Grid function `u(x_i, xi_j)` with a time stamp: the discrete state of
//! the evolution.

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<Grid2D>,
    /// Values indexed `(i, j)` via `grid.idx`.
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(grid: Arc<Grid2D>) -> Field {
        let n = grid.len();
        Field { grid, values: vec![0.0; n], time: 0.0 }
    }

    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = vec![0.0; grid.len()];
        for i in 0..grid.x_nodes.len() {
            for j in 0..grid.xi_nodes.len() {
                let (x, xi) = grid.node(i, j);
                values[grid.idx(i, j)] = f(x, xi);
            }
        }
        Field { grid, values, time: 0.0 }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    /// Checks shape and finiteness.
    pub fn check(&self) -> Result<()> {
        if self.values.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                self.values.len(),
                self.grid.len()
            )));
        }
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at linear index {k}")));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Bilinear interpolation at `(x, xi)`.
    pub fn interp(&self, x: f64, xi: f64) -> Result<f64> {
        let (i, j, tx, txi) = self.grid.locate(x, xi)?;
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        Ok(v00 * (1.0 - tx) * (1.0 - txi)
            + v10 * tx * (1.0 - txi)
            + v01 * (1.0 - tx) * txi
            + v11 * tx * txi)
    }

    /// Asserts two fields share one grid.
    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.hash() == other.grid.hash() {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }
}
