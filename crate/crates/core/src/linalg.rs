//! Small dense kernels: complex LU, a Cholesky positivity probe, the
//! Walsh-Hadamard transform and Householder least squares.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use crate::math::sqrt;

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::zero(); dim * dim],
        }
    }

    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn add_to(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] += value;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Solves `self * x = b` by LU with partial pivoting. `None` if singular.
    pub fn solve(&self, b: &[Complex64]) -> Option<Vec<Complex64>> {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].norm().total_cmp(&a[s * n + col].norm()))?;
            if a[pivot * n + col].norm() == 0.0 {
                return None;
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                }
                x.swap(pivot, col);
            }
            let inv = a[col * n + col].inv();
            for r in (col + 1)..n {
                let factor = a[r * n + col] * inv;
                if factor.is_zero() {
                    continue;
                }
                for c in col..n {
                    let upper = a[col * n + c];
                    a[r * n + c] -= factor * upper;
                }
                let xc = x[col];
                x[r] -= factor * xc;
            }
        }
        for row in (0..n).rev() {
            let tail: Complex64 = ((row + 1)..n).map(|c| a[row * n + c] * x[c]).sum();
            x[row] = (x[row] - tail) / a[row * n + row];
        }
        Some(x)
    }
}

pub(crate) fn norm2(v: &[Complex64]) -> f64 {
    sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// True when `m + shift * I` admits a Cholesky factorization, i.e. the
/// Hermitian matrix `m` has no eigenvalue below `-shift`.
pub fn is_positive_semidefinite(m: &[Complex64], dim: usize, shift: f64) -> bool {
    let mut l = vec![Complex64::zero(); dim * dim];
    for j in 0..dim {
        let mut diag = m[j * dim + j].re + shift;
        for k in 0..j {
            diag -= l[j * dim + k].norm_sqr();
        }
        if !(diag > 0.0) {
            return false;
        }
        let d = sqrt(diag);
        l[j * dim + j] = Complex64::new(d, 0.0);
        for i in (j + 1)..dim {
            let mut s = m[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k].conj();
            }
            l[i * dim + j] = s / d;
        }
    }
    true
}

/// In-place unnormalized Walsh-Hadamard transform; `v.len()` must be a power of two.
///
/// Afterwards `v[m] = sum_s (-1)^{popcount(m & s)} v_in[s]`.
pub fn walsh_hadamard<T>(v: &mut [T])
where
    T: Copy + core::ops::Add<Output = T> + core::ops::Sub<Output = T>,
{
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in v.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

/// Least-squares solution of `min |A x - b|` for a column-major `rows x cols`
/// matrix with full column rank, via Householder QR.
///
/// Returns `None` when a column is numerically dependent on the others.
pub fn least_squares(columns: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let cols = columns.len();
    let rows = b.len();
    if cols == 0 {
        return Some(Vec::new());
    }
    if cols > rows {
        return None;
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut rhs = b.to_vec();
    let scale = a
        .iter()
        .map(|c| sqrt(c.iter().map(|x| x * x).sum::<f64>()))
        .fold(0.0, f64::max);
    for k in 0..cols {
        let norm = sqrt(a[k][k..].iter().map(|x| x * x).sum::<f64>());
        if norm <= 1e-13 * scale {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum();
                let f = 2.0 * dot / vnorm2;
                for (x, vi) in col[k..].iter_mut().zip(&v) {
                    *x -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&rhs[k..]).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            for (x, vi) in rhs[k..].iter_mut().zip(&v) {
                *x -= f * vi;
            }
        }
    }
    let mut x = vec![0.0; cols];
    for row in (0..cols).rev() {
        let tail: f64 = ((row + 1)..cols).map(|c| a[c][row] * x[c]).sum();
        x[row] = (rhs[row] - tail) / a[row][row];
    }
    Some(x)
}
