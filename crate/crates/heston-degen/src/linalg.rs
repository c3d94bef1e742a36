//! Banded matrix storage, LU factorization with partial pivoting, and the
//! triangular solves used by the implicit time stepper and resolvent.

use crate::error::{Error, Result};

/// General banded matrix with `kl` subdiagonals and `ku` superdiagonals.
/// Row `i` stores `A[i][i - kl + k]` at offset `k` in `0..kl + ku + 1`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> BandedMatrix {
        BandedMatrix { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        if j < lo || j > hi {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.offset(i, j) {
            Some(k) => self.data[k],
            None => 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .offset(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band kl={} ku={}", self.kl, self.ku));
        self.data[k] += v;
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let mm = self.kl + self.ku + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * mm..(i + 1) * mm];
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += row[j + self.kl - i] * x[j];
            }
            y[i] = acc;
        }
    }

    /// `self + c * other`, requiring identical band shape.
    pub fn add_scaled(&self, c: f64, other: &BandedMatrix) -> BandedMatrix {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
        out
    }

    pub fn scale(&self, c: f64) -> BandedMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= c;
        }
        out
    }

    /// `self + c * diag(d)`.
    pub fn add_diag_scaled(&self, c: f64, d: &[f64]) -> BandedMatrix {
        assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            out.add(i, i, c * di);
        }
        out
    }

    /// Symmetric part `(A + A^T) / 2`; band widened to `max(kl, ku)`.
    pub fn symmetric_part(&self) -> BandedMatrix {
        let k = self.kl.max(self.ku);
        let mut out = BandedMatrix::zeros(self.n, k, k);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j);
                if v != 0.0 {
                    out.add(i, j, 0.5 * v);
                    out.add(j, i, 0.5 * v);
                }
            }
        }
        out
    }

    /// Coordinate-triplet dump `(row, col, value)` of the stored band.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j);
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Banded LU with partial pivoting. Fails on a vanishing pivot, which is
    /// reported with its row so callers can name the offending grid node.
    pub fn factor(&self) -> Result<BandedLu> {
        let n = self.n;
        let m1 = self.kl;
        let m2 = self.ku;
        let mm = m1 + m2 + 1;
        // Working copy with m1 extra superdiagonals for pivoting fill-in.
        let w = mm + m1;
        let mut a = vec![0.0; n * w];
        for i in 0..n {
            for k in 0..mm {
                a[i * w + k] = self.data[i * mm + k];
            }
        }
        // Shift the first m1 rows left so column 0 holds the diagonal.
        let mut l = m1;
        for i in 0..m1.min(n) {
            for j in (m1 - i)..w {
                a[i * w + j - l] = a[i * w + j];
            }
            for j in (w - l)..w {
                a[i * w + j] = 0.0;
            }
            l -= 1;
        }
        let mut al = vec![0.0; n * m1.max(1)];
        let mut indx = vec![0usize; n];
        let mut l = m1;
        for k in 0..n {
            let mut piv = a[k * w];
            let mut ip = k;
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l.min(n) {
                if a[j * w].abs() > piv.abs() {
                    piv = a[j * w];
                    ip = j;
                }
            }
            indx[k] = ip;
            if piv.abs() < 1e-300 {
                return Err(Error::SingularFactorization { row: k, i: 0, j: 0 });
            }
            if ip != k {
                for j in 0..w {
                    a.swap(k * w + j, ip * w + j);
                }
            }
            for i in (k + 1)..l.min(n) {
                let dum = a[i * w] / a[k * w];
                al[k * m1.max(1) + (i - k - 1)] = dum;
                for j in 1..w {
                    a[i * w + j - 1] = a[i * w + j] - dum * a[k * w + j];
                }
                a[i * w + w - 1] = 0.0;
            }
        }
        Ok(BandedLu { n, m1, m2: m2 + m1, u: a, al, indx, width: w })
    }
}

/// LU factors of a banded matrix; `solve` performs forward substitution with
/// the stored multipliers and a banded back-substitution.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    m1: usize,
    m2: usize,
    width: usize,
    u: Vec<f64>,
    al: Vec<f64>,
    indx: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let m1 = self.m1;
        let w = self.width;
        let mut l = m1;
        for k in 0..n {
            let ip = self.indx[k];
            if ip != k {
                b.swap(k, ip);
            }
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l.min(n) {
                b[j] -= self.al[k * m1.max(1) + (j - k - 1)] * b[k];
            }
        }
        let mut l = 1usize;
        for i in (0..n).rev() {
            let mut dum = b[i];
            for k in 1..l {
                dum -= self.u[i * w + k] * b[i + k];
            }
            b[i] = dum / self.u[i * w];
            if l < self.m2 + 1 {
                l += 1;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Attempts a banded Cholesky factorization of a symmetric band matrix
/// (`kl == ku`); success certifies positive definiteness. Only the lower
/// factor is formed and then discarded.
pub fn band_cholesky_is_spd(a: &BandedMatrix) -> bool {
    assert_eq!(a.kl, a.ku, "band_cholesky_is_spd expects a symmetric band shape");
    let n = a.n;
    let k = a.kl;
    // l[j * (k + 1) + (i - j)] holds L[i][j] for j <= i <= j + k.
    let mut l = vec![0.0f64; n * (k + 1)];
    for j in 0..n {
        let mut s = a.get(j, j);
        let m0 = j.saturating_sub(k);
        for m in m0..j {
            let v = l[m * (k + 1) + (j - m)];
            s -= v * v;
        }
        if s <= 0.0 || !s.is_finite() {
            return false;
        }
        let d = s.sqrt();
        l[j * (k + 1)] = d;
        for i in (j + 1)..(j + k + 1).min(n) {
            let mut s = a.get(i, j);
            let m0 = i.saturating_sub(k).max(j.saturating_sub(k));
            for m in m0..j {
                s -= l[m * (k + 1) + (i - m)] * l[m * (k + 1) + (j - m)];
            }
            l[j * (k + 1) + (i - j)] = s / d;
        }
    }
    true
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y.iter()) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}
