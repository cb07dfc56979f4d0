//! Measurement matrices built from consecutive opinion differences.
//!
//! For a window `[m, p]` with `d(k) = x(k+1) - x(k)`:
//! `P = Σ d(k) d(k)ᵀ` and `Q = Σ d(k+1) d(k)ᵀ`. Alongside the explicit
//! matrices we keep a triangular factor of the stacked difference rows,
//! which gives the ranks and the solution of `W P = Q` without squaring the
//! condition number.

use thiserror::Error;

use crate::dynamics::{DynamicsError, Trajectory, build_a_of_k};
use crate::linalg::{Mat, RowQr, rank_from_singular_values, singular_values};
use crate::network::{EncodedMatrices, ValidatedNetwork};
use crate::real::{Real, real, to_f64};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum MeasurementError {
    #[error("window needs {needed} states, trajectory has {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("window start {m} exceeds end {p}")]
    InvalidWindow { m: usize, p: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// `P`, `Q` over an inclusive window with rank diagnostics.
#[derive(Clone, Debug)]
pub struct MeasurementPair {
    pub p: Mat<Real>,
    pub q: Mat<Real>,
    /// Inclusive `(m, p)`.
    pub window: (usize, usize),
    pub rank: usize,
    pub rank_tol: f64,
    /// Singular values of `P`, descending.
    pub singular_values: Vec<Real>,
    factor: RowQr<Real>,
}

impl MeasurementPair {
    pub fn n(&self) -> usize {
        self.p.rows()
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.n()
    }

    /// Window length `p - m + 1`.
    pub fn len(&self) -> usize {
        self.window.1 - self.window.0 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `σ_min / σ_max` of `P`; 0 for a zero matrix.
    pub fn inverse_condition(&self) -> f64 {
        let (Some(first), Some(last)) = (self.singular_values.first(), self.singular_values.last()) else {
            return 0.0;
        };
        if *first == real(0.0) {
            0.0
        } else {
            to_f64(*last / *first)
        }
    }

    /// Ratio between the last retained singular value and the first
    /// discarded one; `None` when nothing was discarded.
    pub fn rank_gap(&self) -> Option<f64> {
        if self.rank == 0 || self.rank >= self.singular_values.len() {
            return None;
        }
        let kept = self.singular_values[self.rank - 1];
        let dropped = self.singular_values[self.rank];
        Some(if dropped == real(0.0) {
            f64::INFINITY
        } else {
            to_f64(kept / dropped)
        })
    }

    /// Unique `W` with `W P = Q`, or `None` if `P` is rank-deficient.
    pub fn solve(&self) -> Option<Mat<Real>> {
        if !self.full_rank() {
            return None;
        }
        self.factor.solve().map(|b| b.transpose())
    }

    /// `‖W P - Q‖_∞`.
    pub fn residual(&self, w: &Mat<Real>) -> Real {
        w.matmul(&self.p).sub(&self.q).norm_inf()
    }
}

/// Incremental builder; rows may be pushed in any order.
#[derive(Clone, Debug)]
pub(crate) struct PairAccumulator {
    p: Mat<Real>,
    q: Mat<Real>,
    factor: RowQr<Real>,
}

impl PairAccumulator {
    pub(crate) fn new(n: usize) -> Self {
        PairAccumulator {
            p: Mat::zeros(n, n),
            q: Mat::zeros(n, n),
            factor: RowQr::new(n, n),
        }
    }

    pub(crate) fn push(&mut self, dk: &[Real], dk1: &[Real]) {
        let one = real(1.0);
        self.p.add_outer(dk, dk, one);
        self.q.add_outer(dk1, dk, one);
        self.factor.push_row(dk, dk1);
    }

    pub(crate) fn snapshot(&self, window: (usize, usize), rank_tol: f64) -> MeasurementPair {
        let mut p = self.p.clone();
        p.symmetrize();
        let singular_values: Vec<Real> = self.factor.singular_values().into_iter().map(|s| s * s).collect();
        let rank = rank_from_singular_values(&singular_values, real(rank_tol));
        MeasurementPair {
            p,
            q: self.q.clone(),
            window,
            rank,
            rank_tol,
            singular_values,
            factor: self.factor.clone(),
        }
    }
}

fn check_window(traj: &Trajectory, m: usize, p: usize) -> Result<(), MeasurementError> {
    if m > p {
        return Err(MeasurementError::InvalidWindow { m, p });
    }
    let needed = p + 3;
    if traj.len() < needed {
        return Err(MeasurementError::InsufficientData {
            needed,
            have: traj.len(),
        });
    }
    Ok(())
}

/// `P_{m,p}` and `Q_{m,p}` with `rank_tol` relative to `σ_max(P)`.
pub fn build_pq(traj: &Trajectory, m: usize, p: usize, rank_tol: f64) -> Result<MeasurementPair, MeasurementError> {
    check_window(traj, m, p)?;
    let mut acc = PairAccumulator::new(traj.n());
    let mut dk = traj.diff(m);
    for k in m..=p {
        let dk1 = traj.diff(k + 1);
        acc.push(&dk, &dk1);
        dk = dk1;
    }
    Ok(acc.snapshot((m, p), rank_tol))
}

/// Rank with singular values counted above `rel_tol * σ_max`.
pub fn numerical_rank(m: &Mat<Real>, rel_tol: f64) -> usize {
    rank_from_singular_values(&singular_values(m), real(rel_tol))
}

/// Columns `W^c L x(0)` for `c = 0..depth`.
#[derive(Clone, Debug)]
pub struct KrylovMatrix {
    pub columns: Mat<Real>,
}

impl KrylovMatrix {
    /// Rank on the Gram scale, comparable with the rank of `P`:
    /// `σ_k(K)² > rel_tol · σ_max(K)²`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let sv: Vec<Real> = singular_values(&self.columns).into_iter().map(|s| s * s).collect();
        rank_from_singular_values(&sv, real(rel_tol))
    }
}

pub fn krylov(enc: &EncodedMatrices, x0: &[Real], depth: usize) -> KrylovMatrix {
    let n = enc.w.rows();
    let mut columns = Mat::zeros(n, depth);
    let mut v = enc.l.mul_vec(x0);
    for c in 0..depth {
        for i in 0..n {
            columns[(i, c)] = v[i];
        }
        v = enc.w.mul_vec(&v);
    }
    KrylovMatrix { columns }
}

/// `R = Σ_{k=m}^{p} (Ă(k) - Ă(k+1)) x(0) d(k)ᵀ`, so that `W P = Q + R` for
/// trajectories of the general dynamics, where `W` is the weight matrix.
pub fn residual_r(
    net: &ValidatedNetwork,
    traj: &Trajectory,
    m: usize,
    p: usize,
) -> Result<Mat<Real>, MeasurementError> {
    check_window(traj, m, p)?;
    let n = traj.n();
    let x0 = traj.x0();
    let mut r = Mat::zeros(n, n);
    let mut a_k = build_a_of_k(net, traj.state(m), x0)?;
    for k in m..=p {
        let a_k1 = build_a_of_k(net, traj.state(k + 1), x0)?;
        let coef: Vec<Real> = (0..n).map(|i| (a_k[i] - a_k1[i]) * x0[i]).collect();
        r.add_outer(&coef, &traj.diff(k), real(1.0));
        a_k = a_k1;
    }
    Ok(r)
}
