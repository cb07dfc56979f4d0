//! Exact inference for piecewise-linear bias with silenced sources and for
//! constant source weights, plus the ground-truth solvability test.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::linalg::Mat;
use crate::measurement::{MeasurementError, MeasurementPair, build_pq, krylov};
use crate::network::{NetworkError, ValidatedNetwork, build_encoded};
use crate::real::{Real, real, to_f64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactOptions {
    /// Absolute threshold below which an entry counts as zero.
    pub zero_tol: f64,
    /// Relative rank tolerance on `P`; `None` picks the trajectory default.
    pub rank_tol: Option<f64>,
    /// Largest tolerated disagreement between β estimates at two time steps.
    pub beta_tol: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            zero_tol: 1e-7,
            rank_tol: None,
            beta_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Solvable,
    RankDeficient,
    /// Individuals whose zero innate opinion hides γ and β.
    ZeroInnateFollowers(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolvabilityReport {
    pub n: usize,
    pub rank_p: usize,
    pub full_rank: bool,
    pub zero_innate: Vec<usize>,
    pub verdict: Verdict,
    pub window: (usize, usize),
    pub window_len: usize,
    pub rank_tol: f64,
    /// `σ_min / σ_max` of `P`.
    pub inverse_condition: f64,
    pub rank_gap: Option<f64>,
}

impl SolvabilityReport {
    fn from_pair(mp: &MeasurementPair, x0: &[Real]) -> Self {
        let zero_innate: Vec<usize> = x0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == real(0.0))
            .map(|(i, _)| i)
            .collect();
        let full_rank = mp.full_rank();
        let verdict = if !full_rank {
            Verdict::RankDeficient
        } else if !zero_innate.is_empty() {
            Verdict::ZeroInnateFollowers(zero_innate.clone())
        } else {
            Verdict::Solvable
        };
        SolvabilityReport {
            n: mp.n(),
            rank_p: mp.rank,
            full_rank,
            zero_innate,
            verdict,
            window: mp.window,
            window_len: mp.len(),
            rank_tol: mp.rank_tol,
            inverse_condition: mp.inverse_condition(),
            rank_gap: mp.rank_gap(),
        }
    }

    /// Explains why fewer than `n` differences cannot reach full rank.
    pub fn diagnostic(&self) -> Option<String> {
        if self.full_rank {
            None
        } else if self.window_len < self.n {
            Some(format!(
                "window holds {} differences but {} individuals need at least {}",
                self.window_len, self.n, self.n
            ))
        } else {
            Some(format!(
                "P has numerical rank {} < {} (tolerance {:e})",
                self.rank_p, self.n, self.rank_tol
            ))
        }
    }
}

#[derive(Clone, Debug, Error)]
pub enum InferenceError {
    #[error("not solvable: {}", .0.diagnostic().unwrap_or_else(|| format!("{:?}", .0.verdict)))]
    NotSolvable(Box<SolvabilityReport>),
    #[error("individual {} has a non-zero self term but zero innate opinion", .0 + 1)]
    ZeroInnate(usize),
    #[error("bias estimates disagree across time by {spread:e}")]
    InconsistentData { spread: f64 },
    #[error("trajectory too short: horizon {horizon}, need at least {needed}")]
    TooShort { horizon: usize, needed: usize },
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Result of exact inference on piecewise-linear data.
#[derive(Clone, Debug)]
pub struct InferenceResult {
    /// `Q P⁻¹`, including the diagonal self terms `γ_i x_i(0)`.
    pub w_hat: Mat<Real>,
    /// `None` where `x_i(0) = 0` makes the parameter unrecoverable.
    pub gamma_hat: Vec<Option<Real>>,
    pub beta_hat: Vec<Option<Real>>,
    /// Off-diagonal entries above `zero_tol`.
    pub inferred_edges: Vec<(usize, usize, Real)>,
    pub inferred_followers: Vec<usize>,
    pub solvability: SolvabilityReport,
    /// `‖W P - Q‖_∞`.
    pub residual: Real,
    /// Largest gap between β estimated at two different steps.
    pub beta_spread: Real,
}

fn rank_tol(traj: &Trajectory, opts: &ExactOptions) -> f64 {
    opts.rank_tol.unwrap_or_else(|| traj.precision.default_rank_tol())
}

fn full_window(traj: &Trajectory, opts: &ExactOptions) -> Result<(MeasurementPair, Mat<Real>), InferenceError> {
    let horizon = traj.horizon();
    if horizon < 2 {
        return Err(InferenceError::TooShort { horizon, needed: 2 });
    }
    let mp = build_pq(traj, 0, horizon - 2, rank_tol(traj, opts))?;
    match mp.solve() {
        Some(w) => Ok((mp, w)),
        None => Err(InferenceError::NotSolvable(Box::new(SolvabilityReport::from_pair(
            &mp,
            traj.x0(),
        )))),
    }
}

fn edges(w: &Mat<Real>, zero_tol: f64) -> Vec<(usize, usize, Real)> {
    let mut out = Vec::new();
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            if i != j && to_f64(w[(i, j)]).abs() >= zero_tol {
                out.push((i, j, w[(i, j)]));
            }
        }
    }
    out
}

/// Recovers `W`, `γ` and `β` from a full trajectory `x(0..T)`.
pub fn infer_problem1(traj: &Trajectory, opts: &ExactOptions) -> Result<InferenceResult, InferenceError> {
    let (mp, w) = full_window(traj, opts)?;
    let n = traj.n();
    let x0 = traj.x0();
    let mut gamma_hat = vec![None; n];
    let mut followers = Vec::new();
    for i in 0..n {
        let d = w[(i, i)];
        if x0[i] == real(0.0) {
            if to_f64(d).abs() >= opts.zero_tol {
                return Err(InferenceError::ZeroInnate(i));
            }
            continue;
        }
        let g = d / x0[i];
        if to_f64(g).abs() >= opts.zero_tol {
            followers.push(i);
        }
        gamma_hat[i] = Some(g);
    }

    let mid = traj.horizon() / 2;
    let beta0 = beta_rows(&w, x0, traj.state(0), traj.state(1));
    let beta_mid = beta_rows(&w, x0, traj.state(mid), traj.state(mid + 1));
    let spread = beta0
        .iter()
        .zip(&beta_mid)
        .filter_map(|(a, b)| Some(((*a)? - (*b)?).abs()))
        .fold(real(0.0), |m, v| if v > m { v } else { m });
    if to_f64(spread) > opts.beta_tol {
        return Err(InferenceError::InconsistentData { spread: to_f64(spread) });
    }

    Ok(InferenceResult {
        residual: mp.residual(&w),
        inferred_edges: edges(&w, opts.zero_tol),
        inferred_followers: followers,
        solvability: SolvabilityReport::from_pair(&mp, x0),
        gamma_hat,
        beta_hat: beta0,
        beta_spread: spread,
        w_hat: w,
    })
}

fn beta_row(w: &Mat<Real>, x0: &[Real], xk: &[Real], xk1: &[Real], i: usize) -> Real {
    let mut off = real(0.0);
    let mut pred = real(0.0);
    for (j, (&wij, &xj)) in w.row(i).iter().zip(xk).enumerate() {
        if j != i {
            off += wij;
        }
        pred += wij * xj;
    }
    real(1.0) - off - (xk1[i] - pred) / x0[i]
}

fn beta_rows(w: &Mat<Real>, x0: &[Real], xk: &[Real], xk1: &[Real]) -> Vec<Option<Real>> {
    (0..x0.len())
        .map(|i| (x0[i] != real(0.0)).then(|| beta_row(w, x0, xk, xk1, i)))
        .collect()
}

/// `β_i = 1 - Σ_{j≠i} W_ij - (x_i(k+1) - Σ_j W_ij x_j(k)) / x_i(0)`.
pub fn infer_beta(w: &Mat<Real>, x0: &[Real], xk: &[Real], xk1: &[Real]) -> Result<Vec<Real>, InferenceError> {
    if let Some(i) = x0.iter().position(|v| *v == real(0.0)) {
        return Err(InferenceError::ZeroInnate(i));
    }
    Ok((0..x0.len()).map(|i| beta_row(w, x0, xk, xk1, i)).collect())
}

/// True iff every follower has a non-zero innate opinion and the Krylov
/// matrix of depth `n` has full rank.
pub fn check_solvability_ground_truth(
    net: &ValidatedNetwork,
    x0: &[Real],
    rank_tol: f64,
) -> Result<bool, NetworkError> {
    let enc = build_encoded(net, x0)?;
    if net.followers().iter().any(|&i| x0[i] == real(0.0)) {
        return Ok(false);
    }
    Ok(krylov(&enc, x0, net.n()).rank(rank_tol) == net.n())
}

/// Result of exact inference with constant source weights.
#[derive(Clone, Debug)]
pub struct Problem2Result {
    /// `Q P⁻¹`; its off-diagonal part is the topology.
    pub w_hat: Mat<Real>,
    /// `max_i |[W]_ii|`, zero for consistent data.
    pub diag_residual: Real,
    pub inferred_edges: Vec<(usize, usize, Real)>,
    pub solvability: SolvabilityReport,
    pub residual: Real,
}

pub fn infer_problem2(traj: &Trajectory, opts: &ExactOptions) -> Result<Problem2Result, InferenceError> {
    let (mp, w) = full_window(traj, opts)?;
    let diag_residual = w
        .diag()
        .into_iter()
        .map(|v| v.abs())
        .fold(real(0.0), |m, v| if v > m { v } else { m });
    Ok(Problem2Result {
        residual: mp.residual(&w),
        inferred_edges: edges(&w, opts.zero_tol),
        solvability: SolvabilityReport::from_pair(&mp, traj.x0()),
        diag_residual,
        w_hat: w,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SourceStatus {
    /// One source: the link weight itself.
    Single { weight: f64 },
    /// Several sources: only the aggregate is identifiable.
    NonUnique,
    /// No sources recorded in the trajectory.
    NoSources,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceResidual {
    /// `Σ_d ŵ_id (u_d - x_i(0))`.
    pub residual: f64,
    /// Max minus min of the per-step residuals.
    pub spread: f64,
    pub status: SourceStatus,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SourceError {
    #[error("source opinion equals the innate opinion of individual {}", .0 + 1)]
    DegenerateSource(usize),
    #[error("trajectory needs at least two states")]
    TooShort,
}

/// Residual `x_i(k+1) - Σ_{j≠i} W_ij x_j(k) - (1 - Σ_{j≠i} W_ij) x_i(0)`,
/// averaged over `k`.
pub fn source_residual(traj: &Trajectory, w_hat: &Mat<Real>, i: usize) -> Result<SourceResidual, SourceError> {
    if traj.len() < 2 {
        return Err(SourceError::TooShort);
    }
    let x0 = traj.x0();
    let off: Real = w_hat
        .row(i)
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .fold(real(0.0), |s, (_, &v)| s + v);
    let per_step: Vec<f64> = (0..traj.horizon())
        .map(|k| {
            let xk = traj.state(k);
            let pred = w_hat
                .row(i)
                .iter()
                .zip(xk)
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(real(0.0), |s, (_, (&w, &x))| s + w * x);
            to_f64(traj.state(k + 1)[i] - pred - (real(1.0) - off) * x0[i])
        })
        .collect();
    let residual = per_step.iter().sum::<f64>() / per_step.len() as f64;
    let max = per_step.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = per_step.iter().copied().fold(f64::INFINITY, f64::min);
    let status = match traj.source_opinions.as_slice() {
        [] => SourceStatus::NoSources,
        [u] => {
            let gap = u - to_f64(x0[i]);
            if gap.abs() < 1e-12 {
                return Err(SourceError::DegenerateSource(i));
            }
            SourceStatus::Single { weight: residual / gap }
        }
        _ => SourceStatus::NonUnique,
    };
    Ok(SourceResidual {
        residual,
        spread: max - min,
        status,
    })
}
