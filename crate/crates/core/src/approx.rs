//! Approximate inference under an unknown bias model.
//!
//! Windows `[k, p]` for `k = 1..=m_max` each give a solution `S_k` of
//! `W P_{k,p} = Q_{k,p}`. Rows of individuals without a source link satisfy
//! the equation exactly for every window, so their rows of `S_k` agree;
//! follower rows carry a window-dependent error and disagree. Rows are
//! classified by that agreement.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::linalg::Mat;
use crate::measurement::{MeasurementError, MeasurementPair, PairAccumulator};
use crate::network::ValidatedNetwork;
use crate::real::{Real, real, to_f64};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ApproxError {
    #[error("no window [k, {p}] with 1 <= k <= {m_max} has full rank")]
    EmptyWindowSet { m_max: usize, p: usize },
    #[error("end index {p} must be at least m_max + n = {needed}")]
    WindowTooShort { p: usize, needed: usize },
    #[error("m_max must be at least 1")]
    NoWindows,
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

#[derive(Clone, Debug)]
pub struct Window {
    pub start: usize,
    pub pair: MeasurementPair,
    /// `Q P⁻¹` when the window has full rank.
    pub solution: Option<Mat<Real>>,
}

#[derive(Clone, Debug)]
pub struct WindowSet {
    pub p: usize,
    pub m_max: usize,
    /// One entry per start `k = 1..=m_max`, in order.
    pub windows: Vec<Window>,
}

impl WindowSet {
    /// Start indices of full-rank windows.
    pub fn candidates(&self) -> Vec<usize> {
        self.full_rank().map(|w| w.start).collect()
    }

    pub fn full_rank(&self) -> impl Iterator<Item = &Window> {
        self.windows.iter().filter(|w| w.solution.is_some())
    }
}

/// Builds `P_{k,p}`, `Q_{k,p}` for `k = 1..=m_max` by accumulating from `p`
/// backwards, so the shared tail is processed once.
pub fn build_window_set(traj: &Trajectory, m_max: usize, p: usize, rank_tol: f64) -> Result<WindowSet, ApproxError> {
    if m_max == 0 {
        return Err(ApproxError::NoWindows);
    }
    let n = traj.n();
    if p < m_max + n {
        return Err(ApproxError::WindowTooShort { p, needed: m_max + n });
    }
    if traj.len() < p + 3 {
        return Err(MeasurementError::InsufficientData {
            needed: p + 3,
            have: traj.len(),
        }
        .into());
    }
    let mut acc = PairAccumulator::new(n);
    let mut pairs = Vec::with_capacity(m_max);
    let mut dk1 = traj.diff(p + 1);
    for k in (1..=p).rev() {
        let dk = traj.diff(k);
        acc.push(&dk, &dk1);
        dk1 = dk;
        if k <= m_max {
            pairs.push(acc.snapshot((k, p), rank_tol));
        }
    }
    pairs.reverse();
    let windows: Vec<Window> = pairs
        .into_iter()
        .map(|pair| Window {
            start: pair.window.0,
            solution: pair.solve(),
            pair,
        })
        .collect();
    let set = WindowSet { p, m_max, windows };
    if set.candidates().is_empty() {
        return Err(ApproxError::EmptyWindowSet { m_max, p });
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RowClass {
    NonFollower,
    Follower,
    /// Fewer than two full-rank windows; no comparison possible.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    /// From a row whose solutions agree across windows.
    Exact,
    /// From a follower (or unclassified) row.
    Approximate,
    /// Negative estimate set to zero.
    Clamped,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxOptions {
    pub m_max: usize,
    /// End index; `None` picks [`auto_p`].
    pub p: Option<usize>,
    pub agree_tol: f64,
    pub rank_tol: Option<f64>,
    /// Also require `|S_ii| <= agree_tol` for a non-follower row. True
    /// non-followers have no self-loop, while a follower whose bias is
    /// nearly affine over the trajectory shows up on the diagonal before it
    /// shows up as disagreement between windows.
    pub diagonal_check: bool,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            m_max: 2,
            p: None,
            agree_tol: 1e-7,
            rank_tol: None,
            diagonal_check: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApproxResult {
    /// Non-negative estimate with zero diagonal.
    pub w_breve: Mat<Real>,
    /// Unclamped solution of the smallest-start window.
    pub raw: Mat<Real>,
    pub provenance: Vec<Vec<Provenance>>,
    pub follower_flags: Vec<RowClass>,
    /// Per row, the largest entry-wise disagreement between windows.
    pub agreement_scores: Vec<Option<f64>>,
    /// Per row, `|S_ii|` of the smallest-start window.
    pub diagonal_scores: Vec<f64>,
    pub windows_used: Vec<usize>,
    /// Per row, `max_j |[W̆ P - Q]_ij|` on the smallest-start window.
    pub row_residuals: Vec<f64>,
    /// `(start, rank)` for every window examined.
    pub window_ranks: Vec<(usize, usize)>,
    pub p: usize,
}

impl ApproxResult {
    pub fn followers(&self) -> Vec<usize> {
        self.rows_with(RowClass::Follower)
    }

    pub fn non_followers(&self) -> Vec<usize> {
        self.rows_with(RowClass::NonFollower)
    }

    fn rows_with(&self, class: RowClass) -> Vec<usize> {
        (0..self.follower_flags.len())
            .filter(|&i| self.follower_flags[i] == class)
            .collect()
    }
}

/// First `k` with `‖x(k+1) - x(k)‖_∞ < 1e-6`, clamped to `[m_max + n, T - 2]`.
pub fn auto_p(traj: &Trajectory, m_max: usize) -> usize {
    let upper = traj.horizon().saturating_sub(2);
    let lower = m_max + traj.n();
    let settle = (0..traj.horizon()).find(|&k| traj.step_size(k) < 1e-6).unwrap_or(upper);
    settle.max(lower).min(upper)
}

/// Windowed inference with follower classification.
pub fn infer_problem3(traj: &Trajectory, opts: &ApproxOptions) -> Result<ApproxResult, ApproxError> {
    let p = opts.p.unwrap_or_else(|| auto_p(traj, opts.m_max));
    let rank_tol = opts.rank_tol.unwrap_or_else(|| traj.precision.default_rank_tol());
    let set = build_window_set(traj, opts.m_max, p, rank_tol)?;
    let n = traj.n();
    let used: Vec<&Window> = set.full_rank().collect();
    let raw = used[0].solution.clone().expect("candidate windows are solved");

    let mut flags = vec![RowClass::Unknown; n];
    let mut scores = vec![None; n];
    if used.len() >= 2 {
        for i in 0..n {
            let mut worst = 0.0f64;
            for a in 0..used.len() {
                for b in (a + 1)..used.len() {
                    let (sa, sb) = (used[a].solution.as_ref().unwrap(), used[b].solution.as_ref().unwrap());
                    for j in 0..n {
                        worst = worst.max(to_f64((sa[(i, j)] - sb[(i, j)]).abs()));
                    }
                }
            }
            scores[i] = Some(worst);
            let diag_ok = !opts.diagonal_check || to_f64(raw[(i, i)].abs()) <= opts.agree_tol;
            flags[i] = if worst <= opts.agree_tol && diag_ok {
                RowClass::NonFollower
            } else {
                RowClass::Follower
            };
        }
    }

    let mut w_breve = Mat::zeros(n, n);
    let mut provenance = vec![vec![Provenance::Exact; n]; n];
    for i in 0..n {
        for j in 0..n {
            let v = raw[(i, j)];
            let base = if flags[i] == RowClass::NonFollower {
                Provenance::Exact
            } else {
                Provenance::Approximate
            };
            provenance[i][j] = base;
            if i == j {
                continue;
            }
            if v < real(0.0) {
                provenance[i][j] = Provenance::Clamped;
            } else {
                w_breve[(i, j)] = v;
            }
        }
    }

    let first = &used[0].pair;
    let res = w_breve.matmul(&first.p).sub(&first.q);
    let row_residuals = (0..n)
        .map(|i| res.row(i).iter().fold(0.0f64, |m, v| m.max(to_f64(v.abs()))))
        .collect();

    Ok(ApproxResult {
        diagonal_scores: (0..n).map(|i| to_f64(raw[(i, i)].abs())).collect(),
        row_residuals,
        w_breve,
        raw,
        provenance,
        follower_flags: flags,
        agreement_scores: scores,
        windows_used: used.iter().map(|w| w.start).collect(),
        window_ranks: set.windows.iter().map(|w| (w.start, w.pair.rank)).collect(),
        p,
    })
}

/// Per-row error of an estimate against ground truth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowError {
    pub row: usize,
    pub is_follower: bool,
    /// `max_{j ∈ N_i} |w̆_ij - w_ij|`.
    pub max_neighbor_error: f64,
    /// `max_{j≠i} |w̆_ij - w_ij|`, including spurious edges.
    pub max_error: f64,
}

/// Compares each row with the true weights; the guarantee concerns
/// non-follower rows only, follower rows are reported for context.
pub fn partial_exactness_check(result: &ApproxResult, net: &ValidatedNetwork) -> Vec<RowError> {
    let n = net.n();
    let w = net.weights();
    (0..n)
        .map(|i| {
            let mut nb = 0.0f64;
            let mut all = 0.0f64;
            for j in (0..n).filter(|&j| j != i) {
                let e = to_f64((result.w_breve[(i, j)] - w[(i, j)]).abs());
                all = all.max(e);
                if w[(i, j)] > real(0.0) {
                    nb = nb.max(e);
                }
            }
            RowError {
                row: i,
                is_follower: net.is_follower(i),
                max_neighbor_error: nb,
                max_error: all,
            }
        })
        .collect()
}
