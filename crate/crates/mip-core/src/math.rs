//! Small dense linear algebra used by the dynamics, contact and QP code.
//!
//! The model only ever produces 2x2 and 4x4 systems plus modest dense
//! matrices inside the QP (tens of rows), so everything here is hand-rolled
//! over `f64` instead of pulling in a matrix library.

use alloc::vec;
use alloc::vec::Vec;

/// `f64` transcendentals routed through `libm` so the crate builds without
/// `std` (the inherent `sin`/`cos`/... methods on `f64` live in `std`).
pub trait FloatExt {
    fn sin(self) -> f64;
    fn cos(self) -> f64;
    fn sin_cos(self) -> (f64, f64);
    fn exp(self) -> f64;
    fn sqrt(self) -> f64;
    fn abs(self) -> f64;
    fn asin(self) -> f64;
    fn atan2(self, other: f64) -> f64;
}

impl FloatExt for f64 {
    #[inline]
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    #[inline]
    fn sin_cos(self) -> (f64, f64) {
        (libm::sin(self), libm::cos(self))
    }
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    #[inline]
    fn asin(self) -> f64 {
        libm::asin(self)
    }
    #[inline]
    fn atan2(self, other: f64) -> f64 {
        libm::atan2(self, other)
    }
}

/// Plane vector with `x` horizontal and `y` up.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Scalar z-component of the 3D cross product `self x o`.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl core::ops::Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl core::ops::Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl core::ops::Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Counterclockwise rotation of `v` by `angle`.
#[inline]
pub fn rotate(angle: f64, v: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Derivative of the rotation with respect to the angle, applied to `v`:
/// `d/da [R(a) v]`. Equals the rotated vector turned another quarter turn.
#[inline]
pub fn rotate_deriv(angle: f64, v: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(-s * v.x - c * v.y, c * v.x - s * v.y)
}

/// Unit vector at `angle` from the x axis.
#[inline]
pub fn unit_vec(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c, s)
}

/// Solves the symmetric positive definite 2x2 system `m * x = b` in closed
/// form. The caller guarantees `m` is invertible (the mass matrix always is).
#[inline]
pub fn solve_sym2(m: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (m[1][1] * b[0] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ]
}

/// In-place LU factorization with partial pivoting of a row-major `n` x `n`
/// matrix. Returns `false` when a pivot is exactly zero (structurally
/// singular); near-singular systems factor fine and are caught by the
/// caller's condition estimate instead.
pub fn lu_factor(a: &mut [f64], n: usize, piv: &mut [usize]) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(piv.len(), n);
    for (i, p) in piv.iter_mut().enumerate() {
        *p = i;
    }
    for col in 0..n {
        let mut best = col;
        let mut best_mag = a[col * n + col].abs();
        for row in col + 1..n {
            let mag = a[row * n + col].abs();
            if mag > best_mag {
                best = row;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return false;
        }
        if best != col {
            for k in 0..n {
                a.swap(col * n + k, best * n + k);
            }
            piv.swap(col, best);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            a[row * n + col] = factor;
            for k in col + 1..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
        }
    }
    true
}

/// Solves `a * x = b` given the output of [`lu_factor`]; `x` replaces `b`.
pub fn lu_solve(lu: &[f64], n: usize, piv: &[usize], b: &mut [f64]) {
    let mut x = vec![0.0; n];
    for i in 0..n {
        x[i] = b[piv[i]];
    }
    for i in 0..n {
        for k in 0..i {
            x[i] -= lu[i * n + k] * x[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= lu[i * n + k] * x[k];
        }
        x[i] /= lu[i * n + i];
    }
    b.copy_from_slice(&x);
}

/// Determinant from an LU factorization (product of pivots times the
/// permutation sign).
pub fn lu_det(lu: &[f64], n: usize, piv: &[usize]) -> f64 {
    let mut det = 1.0;
    for i in 0..n {
        det *= lu[i * n + i];
    }
    // Count transpositions in the permutation to recover the sign.
    let mut seen = [false; 16];
    debug_assert!(n <= 16);
    let mut sign = 1.0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = piv[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    det * sign
}

/// Factored 4x4 system with a one-norm condition estimate, used by the
/// contact-force solver to detect its geometric singularity.
pub struct Lu4 {
    lu: [f64; 16],
    piv: [usize; 4],
    ok: bool,
    norm1_a: f64,
}

impl Lu4 {
    pub fn new(a: &[[f64; 4]; 4]) -> Lu4 {
        let mut flat = [0.0; 16];
        for (i, row) in a.iter().enumerate() {
            flat[i * 4..i * 4 + 4].copy_from_slice(row);
        }
        let mut norm1_a: f64 = 0.0;
        for col in 0..4 {
            let s: f64 = (0..4).map(|r| a[r][col].abs()).sum();
            norm1_a = norm1_a.max(s);
        }
        let mut lu = flat;
        let mut piv = [0usize; 4];
        let ok = lu_factor(&mut lu, 4, &mut piv);
        Lu4 {
            lu,
            piv,
            ok,
            norm1_a,
        }
    }

    pub fn is_singular(&self) -> bool {
        !self.ok
    }

    pub fn solve(&self, b: [f64; 4]) -> Option<[f64; 4]> {
        if !self.ok {
            return None;
        }
        let mut x = b;
        lu_solve(&self.lu, 4, &self.piv, &mut x);
        Some(x)
    }

    pub fn det(&self) -> f64 {
        if !self.ok {
            return 0.0;
        }
        lu_det(&self.lu, 4, &self.piv)
    }

    /// One-norm condition number computed from the explicit inverse. The
    /// matrix is 4x4, so forming the inverse is cheaper than an iterative
    /// norm estimate and fully deterministic.
    pub fn cond1(&self) -> f64 {
        if !self.ok {
            return f64::INFINITY;
        }
        let mut norm1_inv: f64 = 0.0;
        for col in 0..4 {
            let mut e = [0.0; 4];
            e[col] = 1.0;
            let x = self.solve(e).unwrap();
            let s: f64 = x.iter().map(|v| v.abs()).sum();
            norm1_inv = norm1_inv.max(s);
        }
        self.norm1_a * norm1_inv
    }
}

/// Row-major heap-allocated matrix for the QP and SQP workspaces.
#[derive(Clone, Debug)]
pub struct DMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize) -> DMat {
        DMat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for r in 0..self.rows {
            y[r] = dot(self.row(r), x);
        }
    }

    /// `y += self^T * x`.
    pub fn matvec_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            for (yc, a) in y.iter_mut().zip(row) {
                *yc += a * xr;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
