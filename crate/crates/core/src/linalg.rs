//! Small dense linear algebra, generic over the float type.
//!
//! Only what the inference needs: products, one-sided Jacobi singular
//! values, LU with partial pivoting, and a Givens row-updated QR factor for
//! least squares on stacked difference rows.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub};

use crate::real::Real;

/// Float types usable by the dense kernels.
pub trait Scalar:
    Copy
    + PartialOrd
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn unit_roundoff() -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn abs(self) -> Self {
        if self < Self::zero() { -self } else { self }
    }

    fn max(self, other: Self) -> Self {
        if other > self { other } else { self }
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn unit_roundoff() -> Self {
        f64::EPSILON
    }
}

impl Scalar for Real {
    fn from_f64(v: f64) -> Self {
        Real::from_f64(v)
    }
    fn to_f64(self) -> f64 {
        self.0 + self.1
    }
    fn sqrt(self) -> Self {
        Real::sqrt(self)
    }
    fn unit_roundoff() -> Self {
        Real::from_f64(2f64.powi(-104))
    }
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        self.map(|v| v * s)
    }

    fn zip_with(&self, other: &Mat<T>, f: impl Fn(T, T) -> T) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Adds `scale * a bᵀ` in place.
    pub fn add_outer(&mut self, a: &[T], b: &[T], scale: T) {
        assert_eq!((self.rows, self.cols), (a.len(), b.len()));
        for (i, &ai) in a.iter().enumerate() {
            let s = ai * scale;
            for (d, &bj) in self.row_mut(i).iter_mut().zip(b) {
                *d += s * bj;
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |s, &v| s + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let half = T::from_f64(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{:.6e}", v.to_f64())).collect();
            writeln!(f, "  {}", cells.join(", "))?;
        }
        write!(f, "]")
    }
}

const MAX_JACOBI_SWEEPS: usize = 80;

/// Singular values in descending order (one-sided Jacobi).
///
/// Works on columns of `a` (or of `aᵀ` when `a` is wide), so the result has
/// `min(rows, cols)` entries.
pub fn singular_values<T: Scalar>(a: &Mat<T>) -> Vec<T> {
    let work = if a.rows >= a.cols { a.clone() } else { a.transpose() };
    let (m, n) = (work.rows, work.cols);
    if n == 0 {
        return Vec::new();
    }
    // column-major copy so rotations touch contiguous memory
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| work.col(j)).collect();
    let eps = T::unit_roundoff();
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for k in 0..m {
                        alpha += cp[k] * cp[k];
                        beta += cq[k] * cq[k];
                        gamma += cp[k] * cq[k];
                    }
                    (alpha, beta, gamma)
                };
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let two = T::one() + T::one();
                let zeta = (beta - alpha) / (two * gamma);
                let sign = if zeta < T::zero() { -T::one() } else { T::one() };
                let az = zeta.abs();
                let root = if az > T::one() {
                    let r = T::one() / az;
                    az * (T::one() + r * r).sqrt()
                } else {
                    (T::one() + az * az).sqrt()
                };
                let t = sign / (az + root);
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for k in 0..m {
                    let up = cp[k];
                    let uq = cq[k];
                    cp[k] = c * up - s * uq;
                    cq[k] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols
        .iter()
        .map(|c| c.iter().fold(T::zero(), |s, &v| s + v * v).sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Count of singular values strictly above `rel_tol * σ_max`; 0 for a zero matrix.
pub fn rank_from_singular_values<T: Scalar>(sv: &[T], rel_tol: T) -> usize {
    let smax = sv.iter().copied().fold(T::zero(), T::max);
    if smax == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn numerical_rank<T: Scalar>(a: &Mat<T>, rel_tol: T) -> usize {
    rank_from_singular_values(&singular_values(a), rel_tol)
}

/// Solves `a x = b` for square `a` by LU with partial pivoting.
///
/// Returns `None` when a pivot vanishes.
pub fn lu_solve<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Option<Mat<T>> {
    assert!(a.is_square(), "lu_solve needs a square matrix");
    assert_eq!(a.rows, b.rows, "lu_solve shape mismatch");
    let n = a.rows;
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs();
    if scale == T::zero() {
        return if n == 0 { Some(x) } else { None };
    }
    let tiny = scale * T::unit_roundoff() * T::from_f64(n as f64);
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| {
                lu[(i, k)]
                    .abs()
                    .partial_cmp(&lu[(j, k)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if lu[(piv, k)].abs() <= tiny {
            return None;
        }
        if piv != k {
            swap_rows(&mut lu, piv, k);
            swap_rows(&mut x, piv, k);
        }
        let d = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / d;
            if f == T::zero() {
                continue;
            }
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                let v = lu[(k, j)];
                lu[(i, j)] = lu[(i, j)] - f * v;
            }
            for j in 0..x.cols {
                let v = x[(k, j)];
                x[(i, j)] = x[(i, j)] - f * v;
            }
        }
    }
    for j in 0..x.cols {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in (i + 1)..n {
                s = s - lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Some(x)
}

fn swap_rows<T: Scalar>(m: &mut Mat<T>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols {
        m.data.swap(a * m.cols + j, b * m.cols + j);
    }
}

/// Solves `r x = b` for upper-triangular `r`; `None` on a zero pivot.
pub fn solve_upper<T: Scalar>(r: &Mat<T>, b: &Mat<T>) -> Option<Mat<T>> {
    assert!(r.is_square() && r.rows == b.rows);
    let n = r.rows;
    let mut x = b.clone();
    for j in 0..b.cols {
        for i in (0..n).rev() {
            let d = r[(i, i)];
            if d == T::zero() {
                return None;
            }
            let mut s = x[(i, j)];
            for k in (i + 1)..n {
                s = s - r[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / d;
        }
    }
    Some(x)
}

fn scaled_hypot<T: Scalar>(a: T, b: T) -> T {
    let m = a.abs().max(b.abs());
    if m == T::zero() {
        return m;
    }
    let (x, y) = (a / m, b / m);
    m * (x * x + y * y).sqrt()
}

/// Triangular factor of a row-stacked least-squares problem `X B = Y`.
///
/// Rows `(x_k, y_k)` are folded in one at a time with Givens rotations, so
/// after pushing rows `k = m..=p` we hold `R` (upper triangular, `X = Q R`)
/// and `Z = Qᵀ Y`. Then `XᵀX = RᵀR`, `YᵀX = ZᵀR`, and the least-squares
/// solution is `B = R⁻¹ Z`. The factor never forms `XᵀX`, so its condition
/// number is that of `X`, not its square.
#[derive(Clone, Debug)]
pub struct RowQr<T: Scalar> {
    r: Mat<T>,
    z: Mat<T>,
    pushed: usize,
}

impl<T: Scalar> RowQr<T> {
    pub fn new(n: usize, rhs_cols: usize) -> Self {
        RowQr {
            r: Mat::zeros(n, n),
            z: Mat::zeros(n, rhs_cols),
            pushed: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.r.rows
    }

    pub fn pushed(&self) -> usize {
        self.pushed
    }

    pub fn r(&self) -> &Mat<T> {
        &self.r
    }

    pub fn z(&self) -> &Mat<T> {
        &self.z
    }

    pub fn push_row(&mut self, x: &[T], y: &[T]) {
        let n = self.r.rows;
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), self.z.cols);
        let mut xr = x.to_vec();
        let mut yr = y.to_vec();
        for j in 0..n {
            let b = xr[j];
            if b == T::zero() {
                continue;
            }
            let a = self.r[(j, j)];
            let rho = scaled_hypot(a, b);
            if rho == T::zero() {
                continue;
            }
            let c = a / rho;
            let s = b / rho;
            {
                let rrow = self.r.row_mut(j);
                for k in j..n {
                    let rv = rrow[k];
                    let xv = xr[k];
                    rrow[k] = c * rv + s * xv;
                    xr[k] = c * xv - s * rv;
                }
            }
            xr[j] = T::zero();
            let zrow = self.z.row_mut(j);
            for (zv, yv) in zrow.iter_mut().zip(yr.iter_mut()) {
                let a0 = *zv;
                let b0 = *yv;
                *zv = c * a0 + s * b0;
                *yv = c * b0 - s * a0;
            }
        }
        self.pushed += 1;
    }

    /// Singular values of `X` (equal to those of `R`).
    pub fn singular_values(&self) -> Vec<T> {
        singular_values(&self.r)
    }

    /// `B = R⁻¹ Z`; `None` if `R` has a zero pivot.
    pub fn solve(&self) -> Option<Mat<T>> {
        solve_upper(&self.r, &self.z)
    }
}
