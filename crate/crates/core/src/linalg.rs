//! Fixed-size square matrices and the few dense routines the analysis needs:
//! products, determinants, linear solves and eigenvalues.
//!
//! Eigenvalues of 2×2 matrices come from the characteristic quadratic. Larger
//! matrices are reduced to upper Hessenberg form and iterated with the
//! Francis double-shift QR algorithm until every subdiagonal entry is below
//! `1e-12` relative to its neighbours.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const QR_MAX_ITER_PER_EIGENVALUE: usize = 60;

#[derive(Clone, Copy, PartialEq)]
pub struct Matrix<const N: usize>(pub [[f64; N]; N]);

pub type Mat2 = Matrix<2>;
pub type Mat4 = Matrix<4>;

impl<const N: usize> fmt::Debug for Matrix<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl<const N: usize> Default for Matrix<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Matrix<N> {
    pub fn zeros() -> Self {
        Self([[0.0; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(d: [f64; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn from_columns(cols: [[f64; N]; N]) -> Self {
        let mut m = Self::zeros();
        for (j, col) in cols.iter().enumerate() {
            for i in 0..N {
                m.0[i][j] = col[i];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> [f64; N] {
        std::array::from_fn(|i| self.0[i][j])
    }

    pub fn rows(&self) -> &[[f64; N]; N] {
        &self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|row| row.map(|v| v * s)))
    }

    pub fn transpose(&self) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[j][i])))
    }

    pub fn mul_vec(&self, x: &[f64; N]) -> [f64; N] {
        std::array::from_fn(|i| (0..N).map(|j| self.0[i][j] * x[j]).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    /// LU factorisation with partial pivoting; `None` when a pivot is exactly zero.
    fn lu(&self) -> Option<([[f64; N]; N], [usize; N], f64)> {
        let mut a = self.0;
        let mut perm: [usize; N] = std::array::from_fn(|i| i);
        let mut sign = 1.0;
        for k in 0..N {
            let p = (k..N).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
            if a[p][k] == 0.0 {
                return None;
            }
            if p != k {
                a.swap(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            for i in k + 1..N {
                let factor = a[i][k] / a[k][k];
                a[i][k] = factor;
                for j in k + 1..N {
                    a[i][j] -= factor * a[k][j];
                }
            }
        }
        Some((a, perm, sign))
    }

    pub fn determinant(&self) -> f64 {
        match N {
            0 => 1.0,
            1 => self.0[0][0],
            2 => self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0],
            _ => match self.lu() {
                Some((a, _, sign)) => (0..N).fold(sign, |acc, i| acc * a[i][i]),
                None => 0.0,
            },
        }
    }

    /// Solve `self · x = b`. Returns `None` for a singular matrix.
    pub fn solve(&self, b: &[f64; N]) -> Option<[f64; N]> {
        let (lu, perm, _) = self.lu()?;
        let mut x: [f64; N] = std::array::from_fn(|i| b[perm[i]]);
        for i in 0..N {
            for j in 0..i {
                x[i] -= lu[i][j] * x[j];
            }
        }
        for i in (0..N).rev() {
            for j in i + 1..N {
                x[i] -= lu[i][j] * x[j];
            }
            x[i] /= lu[i][i];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    /// All eigenvalues (with multiplicity), in no particular order.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        match N {
            0 => Vec::new(),
            1 => vec![Complex64::new(self.0[0][0], 0.0)],
            2 => {
                let [[a, b], [c, d]] = [[self.0[0][0], self.0[0][1]], [self.0[1][0], self.0[1][1]]];
                quadratic_roots(a + d, a * d - b * c).to_vec()
            }
            _ => hessenberg_qr(hessenberg(self.0)),
        }
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Roots of `λ² − tr λ + det`.
fn quadratic_roots(tr: f64, det: f64) -> [Complex64; 2] {
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = if half >= 0.0 { half + sq } else { half - sq };
        let small = if big != 0.0 { det / big } else { 0.0 };
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half, im), Complex64::new(half, -im)]
    }
}

/// Reduction to upper Hessenberg form by Gaussian elimination with pivoting
/// (a similarity transform, so eigenvalues are preserved).
fn hessenberg<const N: usize>(mut a: [[f64; N]; N]) -> [[f64; N]; N] {
    for m in 1..N.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..N {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            a.swap(i, m);
            for row in a.iter_mut() {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in m + 1..N {
                let y = a[i][m - 1] / x;
                if y != 0.0 {
                    a[i][m - 1] = y;
                    for j in m..N {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 2..N {
        for j in 0..i - 1 {
            a[i][j] = 0.0;
        }
    }
    a
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hessenberg_qr<const N: usize>(mut a: [[f64; N]; N]) -> Vec<Complex64> {
    let mut eig = vec![Complex64::new(0.0, 0.0); N];
    let anorm: f64 = a.iter().flatten().map(|v| v.abs()).sum();
    if anorm == 0.0 {
        return eig;
    }
    let eps = 1e-12;
    let mut nn = N as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let (lu, lm) = (l as usize, (l - 1) as usize);
                let s = a[lm][lm].abs() + a[lu][lu].abs();
                let s = if s == 0.0 { anorm } else { s };
                if a[lu][lm].abs() <= eps * s {
                    a[lu][lm] = 0.0;
                    break;
                }
                l -= 1;
            }
            let n = nn as usize;
            let x = a[n][n];
            if l == nn {
                eig[n] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let y = a[n - 1][n - 1];
            let w = a[n][n - 1] * a[n - 1][n];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    let hi = x + z;
                    let lo = if z != 0.0 { x - w / z } else { hi };
                    eig[n - 1] = Complex64::new(hi, 0.0);
                    eig[n] = Complex64::new(lo, 0.0);
                } else {
                    eig[n - 1] = Complex64::new(x + p, z);
                    eig[n] = Complex64::new(x + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == QR_MAX_ITER_PER_EIGENVALUE {
                // give back the current diagonal rather than looping forever
                for i in 0..=n {
                    eig[i] = Complex64::new(a[i][i] + t, 0.0);
                }
                return eig;
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=n {
                    a[i][i] -= x;
                }
                let s = a[n][n - 1].abs() + a[n - 1][n - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            francis_step(&mut a, l as usize, n, x, y, w);
        }
    }
    eig
}

fn francis_step<const N: usize>(a: &mut [[f64; N]; N], l: usize, n: usize, x: f64, y: f64, w: f64) {
    let mut m = n - 2;
    let (mut p, mut q, mut r);
    loop {
        let z = a[m][m];
        let rr = x - z;
        let s = y - z;
        p = (rr * s - w) / a[m + 1][m] + a[m][m + 1];
        q = a[m + 1][m + 1] - z - rr - s;
        r = a[m + 2][m + 1];
        let scale = p.abs() + q.abs() + r.abs();
        p /= scale;
        q /= scale;
        r /= scale;
        if m == l {
            break;
        }
        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
        if u + v == v {
            break;
        }
        m -= 1;
    }
    for i in m + 2..=n {
        a[i][i - 2] = 0.0;
        if i != m + 2 {
            a[i][i - 3] = 0.0;
        }
    }
    let mut k = m;
    while k < n {
        let mut scale = 0.0;
        if k != m {
            p = a[k][k - 1];
            q = a[k + 1][k - 1];
            r = if k + 1 != n { a[k + 2][k - 1] } else { 0.0 };
            scale = p.abs() + q.abs() + r.abs();
            if scale != 0.0 {
                p /= scale;
                q /= scale;
                r /= scale;
            }
        }
        let s = (p * p + q * q + r * r).sqrt().copysign(p);
        if s != 0.0 {
            if k == m {
                if l != m {
                    a[k][k - 1] = -a[k][k - 1];
                }
            } else {
                a[k][k - 1] = -s * scale;
            }
            p += s;
            let x = p / s;
            let y = q / s;
            let z = r / s;
            q /= p;
            r /= p;
            for j in k..=n {
                let mut pp = a[k][j] + q * a[k + 1][j];
                if k + 1 != n {
                    pp += r * a[k + 2][j];
                    a[k + 2][j] -= pp * z;
                }
                a[k + 1][j] -= pp * y;
                a[k][j] -= pp * x;
            }
            let mmin = if n < k + 3 { n } else { k + 3 };
            for i in l..=mmin {
                let mut pp = x * a[i][k] + y * a[i][k + 1];
                if k + 1 != n {
                    pp += z * a[i][k + 2];
                    a[i][k + 2] -= pp * r;
                }
                a[i][k + 1] -= pp * q;
                a[i][k] -= pp;
            }
        }
        k += 1;
    }
}

impl<const N: usize> Index<(usize, usize)> for Matrix<N> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for Matrix<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Mul for Matrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..N).map(|k| self.0[i][k] * rhs.0[k][j]).sum())
        }))
    }
}

impl<const N: usize> Add for Matrix<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j] + rhs.0[i][j])))
    }
}

impl<const N: usize> Sub for Matrix<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j] - rhs.0[i][j])))
    }
}

// Serialised as nested row arrays.
impl<const N: usize> Serialize for Matrix<N> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.0.iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }
}

impl<'de, const N: usize> Deserialize<'de> for Matrix<N> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.len() != N || rows.iter().any(|r| r.len() != N) {
            return Err(serde::de::Error::custom(format!("expected a {N}x{N} matrix")));
        }
        Ok(Self(std::array::from_fn(|i| std::array::from_fn(|j| rows[i][j]))))
    }
}
