//! Small dense and banded kernels for symmetric positive definite systems.
//!
//! Plate systems are banded with half-bandwidth `2(n-1)`, so a banded
//! Cholesky costs `O(N·bw²)`. The Kalman gain needs a dense Cholesky of a
//! `q x q` matrix. Both report the first non-positive pivot on failure.

use alloc::vec;
use alloc::vec::Vec;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `‖a - b‖₂`
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Non-positive pivot encountered during a Cholesky factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

/// Symmetric band matrix storing the diagonal and `bw` sub-diagonals.
///
/// Entry `A[r][r-d]` lives at `data[r * (bw + 1) + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(dim: usize, bw: usize) -> Self {
        SymBandMatrix {
            dim,
            bw,
            data: vec![0.0; dim * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        let d = r - c;
        (d <= self.bw && r < self.dim).then(|| r * (self.bw + 1) + d)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.slot(r, c).map_or(0.0, |s| self.data[s])
    }

    /// Panics if `(r, c)` is outside the band.
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c).expect("entry outside the band");
        self.data[s] = v;
    }

    pub fn add_diagonal(&mut self, diag: &[f64]) {
        for (r, d) in diag.iter().enumerate() {
            self.data[r * (self.bw + 1)] += d;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `A·x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for r in 0..self.dim {
            let row = &self.data[r * (self.bw + 1)..(r + 1) * (self.bw + 1)];
            y[r] += row[0] * x[r];
            for d in 1..=self.bw.min(r) {
                let a = row[d];
                if a != 0.0 {
                    y[r] += a * x[r - d];
                    y[r - d] += a * x[r];
                }
            }
        }
        y
    }

    /// Non-zero entries `(row, col, value)` of the full matrix, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for r in 0..self.dim {
            let lo = r.saturating_sub(self.bw);
            let hi = (r + self.bw).min(self.dim - 1);
            for c in lo..=hi {
                let v = self.get(r, c);
                if v != 0.0 {
                    out.push((r, c, v));
                }
            }
        }
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for (r, c, v) in self.triplets() {
            out[r * n + c] = v;
        }
        out
    }

    pub fn cholesky(&self) -> Result<BandCholesky, NotPositiveDefinite> {
        let (n, bw) = (self.dim, self.bw);
        let w = bw + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            // Diagonal pivot.
            let mut s = l[j * w];
            for k in j.saturating_sub(bw)..j {
                let ljk = l[j * w + (j - k)];
                s -= ljk * ljk;
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(NotPositiveDefinite { pivot: j });
            }
            let djj = libm::sqrt(s);
            l[j * w] = djj;
            // Column below the pivot.
            for i in j + 1..(j + w).min(n) {
                let mut s = l[i * w + (i - j)];
                for k in i.saturating_sub(bw)..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / djj;
            }
        }
        Ok(BandCholesky { dim: n, bw, l })
    }
}

/// Lower-triangular band factor `L` with `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    dim: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve `L·z = b` in place.
    pub fn forward_sub(&self, b: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.dim {
            let start = i.saturating_sub(self.bw);
            let mut s = b[i];
            for (k, bk) in (start..i).zip(&b[start..i]) {
                s -= self.l[i * w + (i - k)] * bk;
            }
            b[i] = s / self.l[i * w];
        }
    }

    /// Solve `Lᵀ·x = z` in place.
    pub fn backward_sub(&self, z: &mut [f64]) {
        let w = self.bw + 1;
        for i in (0..self.dim).rev() {
            let end = (i + w).min(self.dim);
            let mut s = z[i];
            for (k, zk) in (i + 1..end).zip(&z[i + 1..end]) {
                s -= self.l[k * w + (k - i)] * zk;
            }
            z[i] = s / self.l[i * w];
        }
    }

    /// Solve `A·x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward_sub(b);
        self.backward_sub(b);
    }
}

/// Dense Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factor a row-major symmetric matrix; only the lower triangle is read.
    pub fn new(n: usize, a: &[f64]) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let lj = j * n;
            let mut s = a[lj + j] - dot(&l[lj..lj + j], &l[lj..lj + j]);
            if !(s > 0.0 && s.is_finite()) {
                return Err(NotPositiveDefinite { pivot: j });
            }
            s = libm::sqrt(s);
            l[lj + j] = s;
            for i in j + 1..n {
                let li = i * n;
                let v = (a[li + j] - dot(&l[li..li + j], &l[lj..lj + j])) / s;
                l[li + j] = v;
            }
        }
        Ok(DenseCholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            b[i] = (b[i] - dot(row, &b[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for (k, bk) in (i + 1..n).zip(&b[i + 1..n]) {
                s -= self.l[k * n + i] * bk;
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    fn random_band(n: usize, bw: usize, seed: &mut u64) -> SymBandMatrix {
        let mut a = SymBandMatrix::zeros(n, bw);
        for r in 0..n {
            for c in r.saturating_sub(bw)..r {
                a.set(r, c, lcg(seed));
            }
            a.set(r, r, 2.0 * bw as f64 + 1.0 + lcg(seed));
        }
        a
    }

    #[test]
    fn band_solve_matches_dense_lu() {
        let mut seed = 11;
        for (n, bw) in [(1, 0), (7, 2), (20, 6), (30, 29)] {
            let a = random_band(n, bw, &mut seed);
            let b: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
            let mut x = b.clone();
            a.cholesky().unwrap().solve_in_place(&mut x);
            let dense = DMatrix::from_row_slice(n, n, &a.to_dense());
            let oracle = dense.lu().solve(&DVector::from_vec(b)).unwrap();
            for (u, v) in x.iter().zip(oracle.iter()) {
                assert!((u - v).abs() < 1e-12, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn band_matvec_matches_dense() {
        let mut seed = 5;
        let a = random_band(12, 3, &mut seed);
        let x: Vec<f64> = (0..12).map(|_| lcg(&mut seed)).collect();
        let dense = DMatrix::from_row_slice(12, 12, &a.to_dense());
        let y = dense * DVector::from_vec(x.clone());
        for (u, v) in a.matvec(&x).iter().zip(y.iter()) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_band_reports_pivot() {
        let mut a = SymBandMatrix::zeros(3, 1);
        a.set(0, 0, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 1.0);
        a.set(2, 2, 1.0);
        assert_eq!(a.cholesky().unwrap_err(), NotPositiveDefinite { pivot: 1 });
    }

    #[test]
    fn dense_solve_matches_lu() {
        let mut seed = 3;
        let n = 9;
        let m = DMatrix::from_fn(n, n, |_, _| lcg(&mut seed));
        let spd = &m * m.transpose() + DMatrix::identity(n, n) * 0.1;
        let b: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
        let row_major: Vec<f64> = spd.transpose().iter().copied().collect();
        let mut x = b.clone();
        DenseCholesky::new(n, &row_major)
            .unwrap()
            .solve_in_place(&mut x);
        let oracle = spd.lu().solve(&DVector::from_vec(b)).unwrap();
        for (u, v) in x.iter().zip(oracle.iter()) {
            assert!((u - v).abs() < 1e-10 * v.abs().max(1.0));
        }
    }

    #[test]
    fn dense_rejects_negative_pivot() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert_eq!(DenseCholesky::new(2, &a).unwrap_err().pivot, 1);
    }
}
