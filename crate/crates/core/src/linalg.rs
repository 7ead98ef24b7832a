//! Small dense matrices acting on bundle fibers.
//!
//! Fibers have rank at most [`MAX_RANK`], so matrices are stored inline and
//! are `Copy`. Entries are complex; real bundles simply carry zero imaginary
//! parts.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

pub const MAX_RANK: usize = 4;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, PartialEq)]
pub struct SmallMat {
    n: usize,
    a: [C64; MAX_RANK * MAX_RANK],
}

impl fmt::Debug for SmallMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<C64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)]).collect())
            .collect();
        f.debug_struct("SmallMat").field("rows", &rows).finish()
    }
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_RANK).contains(&n), "rank {n} outside 1..={MAX_RANK}");
        Self {
            n,
            a: [ZERO; MAX_RANK * MAX_RANK],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, ONE)
    }

    pub fn scalar(n: usize, c: C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c;
        }
        m
    }

    pub fn real_scalar(n: usize, c: f64) -> Self {
        Self::scalar(n, C64::new(c, 0.0))
    }

    /// Row-major real entries.
    pub fn from_real(n: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), n * n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = C64::new(entries[i * n + j], 0.0);
            }
        }
        m
    }

    /// Row-major complex entries.
    pub fn from_complex(n: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), n * n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = entries[i * n + j];
            }
        }
        m
    }

    pub fn from_dmatrix(d: &DMatrix<C64>) -> Self {
        assert_eq!(d.nrows(), d.ncols());
        let mut m = Self::zeros(d.nrows());
        for i in 0..m.n {
            for j in 0..m.n {
                m[(i, j)] = d[(i, j)];
            }
        }
        m
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self[(i, j)])
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut m = *self;
        for v in m.a.iter_mut() {
            *v *= c;
        }
        m
    }

    pub fn scale_c(&self, c: C64) -> Self {
        let mut m = *self;
        for v in m.a.iter_mut() {
            *v *= c;
        }
        m
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum (the induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.a.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.distance(&self.adjoint()) <= tol
    }

    /// `A^† A - I` small, i.e. an isometry of the fiber.
    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).distance(&Self::identity(self.n)) <= tol
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        match self.n {
            1 => vec![self[(0, 0)].re],
            2 => {
                let a = self[(0, 0)].re;
                let d = self[(1, 1)].re;
                let b = self[(0, 1)];
                let mean = 0.5 * (a + d);
                let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
                vec![mean - rad, mean + rad]
            }
            _ => {
                let h = self.to_dmatrix();
                let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
                let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
                ev.sort_by(|x, y| x.total_cmp(y));
                ev
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()[0]
    }

    /// Operator (spectral) norm: the largest singular value.
    pub fn op_norm(&self) -> f64 {
        if self.n == 1 {
            return self[(0, 0)].norm();
        }
        let g = self.adjoint() * *self;
        let ev = g.hermitian_eigenvalues();
        ev[ev.len() - 1].max(0.0).sqrt()
    }

    /// Matrix exponential by scaling and squaring of a truncated Taylor series.
    pub fn expm(&self) -> Self {
        if self.n == 1 {
            let mut m = Self::zeros(1);
            m[(0, 0)] = self[(0, 0)].exp();
            return m;
        }
        let norm = self.norm_inf();
        // Scale so the scaled norm is <= 1/2; 20 Taylor terms then leave a
        // truncation error below 2^-20 / 20! ~ 4e-25.
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let scaled = self.scale(0.5f64.powi(squarings));
        let mut result = Self::identity(self.n);
        let mut term = Self::identity(self.n);
        for k in 1..=20 {
            term = (term * scaled).scale(1.0 / k as f64);
            result = result + term;
            if term.max_abs() < 1e-18 * result.max_abs() {
                break;
            }
        }
        for _ in 0..squarings {
            result = result * result;
        }
        result
    }

    /// Apply to a vector of length `rank`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for SmallMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.n && j < self.n);
        &self.a[i * MAX_RANK + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SmallMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.n && j < self.n);
        &mut self.a[i * MAX_RANK + j]
    }
}

impl Mul for SmallMat {
    type Output = SmallMat;
    fn mul(self, rhs: SmallMat) -> SmallMat {
        assert_eq!(self.n, rhs.n, "rank mismatch");
        let n = self.n;
        if n == 1 {
            let mut m = Self::zeros(1);
            m.a[0] = self.a[0] * rhs.a[0];
            return m;
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                for j in 0..n {
                    m[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        m
    }
}

impl Add for SmallMat {
    type Output = SmallMat;
    fn add(mut self, rhs: SmallMat) -> SmallMat {
        assert_eq!(self.n, rhs.n, "rank mismatch");
        for (x, y) in self.a.iter_mut().zip(rhs.a.iter()) {
            *x += *y;
        }
        self
    }
}

impl Sub for SmallMat {
    type Output = SmallMat;
    fn sub(mut self, rhs: SmallMat) -> SmallMat {
        assert_eq!(self.n, rhs.n, "rank mismatch");
        for (x, y) in self.a.iter_mut().zip(rhs.a.iter()) {
            *x -= *y;
        }
        self
    }
}

impl Neg for SmallMat {
    type Output = SmallMat;
    fn neg(self) -> SmallMat {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_of_rotation_generator() {
        let th = 0.7;
        let g = SmallMat::from_real(2, &[0.0, -th, th, 0.0]);
        let e = g.expm();
        let want = SmallMat::from_real(2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        assert!(e.distance(&want) < 1e-14);
    }

    #[test]
    fn expm_diagonal_large_norm() {
        let m = SmallMat::from_real(3, &[-30.0, 0.0, 0.0, 0.0, 2.5, 0.0, 0.0, 0.0, 0.1]);
        let e = m.expm();
        for (i, v) in [-30.0f64, 2.5, 0.1].iter().enumerate() {
            assert!((e[(i, i)].re - v.exp()).abs() <= 1e-13 * v.exp().max(1.0));
        }
    }

    #[test]
    fn eigenvalues_of_demo_potential() {
        let v = SmallMat::from_real(2, &[1.0, 0.3, 0.3, 2.0]);
        let ev = v.hermitian_eigenvalues();
        let r = (0.25f64 + 0.09).sqrt();
        assert!((ev[0] - (1.5 - r)).abs() < 1e-14);
        assert!((ev[1] - (1.5 + r)).abs() < 1e-14);
        assert!((ev[0] - 0.916_905).abs() < 1e-6);
        assert!((ev[1] - 2.083_095).abs() < 1e-6);
    }

    #[test]
    fn op_norm_of_unitary_is_one() {
        let u = SmallMat::from_complex(2, &[c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.8), c(0.6, 0.0)]);
        assert!((u.op_norm() - 1.0).abs() < 1e-14);
        assert!(u.is_unitary(1e-14));
    }

    fn arb_mat(n: usize) -> impl Strategy<Value = SmallMat> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n).prop_map(move |v| {
            let e: Vec<C64> = v.into_iter().map(|(a, b)| c(a, b)).collect();
            SmallMat::from_complex(n, &e)
        })
    }

    proptest! {
        // Independent route: nalgebra's Padé-based exponential.
        #[test]
        fn expm_matches_nalgebra(m in (1usize..=4).prop_flat_map(arb_mat)) {
            let ours = m.expm();
            let theirs = SmallMat::from_dmatrix(&m.to_dmatrix().exp());
            let scale = theirs.max_abs().max(1.0);
            prop_assert!(ours.distance(&theirs) <= 1e-12 * scale);
        }

        #[test]
        fn eigenvalues_match_nalgebra(m in (1usize..=4).prop_flat_map(arb_mat)) {
            let h = (m + m.adjoint()).scale(0.5);
            let ours = h.hermitian_eigenvalues();
            let mut theirs: Vec<f64> = h.to_dmatrix().symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|a, b| a.total_cmp(b));
            for (a, b) in ours.iter().zip(&theirs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn op_norm_bounds(m in (1usize..=4).prop_flat_map(arb_mat)) {
            let n = m.op_norm();
            prop_assert!(n <= m.norm_inf() * 2.0 + 1e-12);
            prop_assert!(n + 1e-12 >= m.max_abs());
        }
    }
}
