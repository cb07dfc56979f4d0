//! Monte-Carlo error estimates over uniformly random innate opinions.
//!
//! Sample `s` draws its innate opinions from a ChaCha8 stream keyed by
//! `(seed, s)`, so every sample is reproducible on its own and sequential
//! and parallel runs produce bit-identical reports.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{DynamicsError, simulate};
use crate::measurement::{MeasurementError, PairAccumulator};
use crate::network::ValidatedNetwork;
use crate::par::{Execution, map_indexed};
use crate::real::{Real, to_f64};

/// Half-width multiplier for a 95% normal confidence interval.
const Z95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum McError {
    #[error("at least one sample is required")]
    NoSamples,
    #[error("all {0} samples produced rank-deficient windows")]
    AllSamplesDegenerate(usize),
    #[error("window end {p} must be at least m + n = {needed}")]
    WindowTooShort { p: usize, needed: usize },
    #[error("empty list of window ends")]
    NoWindowEnds,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub rank_tol: f64,
    pub exec: Execution,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig {
            samples,
            seed,
            rank_tol: crate::real::Precision::DoubleDouble.default_rank_tol(),
            exec: Execution::Parallel,
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

/// Innate opinions of sample `index`, i.i.d. uniform on `[0, 1)`.
pub fn sample_x0(n: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Running mean and variance, fed in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn half_width(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.count - 1) as f64;
        Z95 * (var / self.count as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    /// Mean `|w̆_ij - w_ij|`; zero on the diagonal.
    pub edge_errors: Vec<Vec<f64>>,
    /// 95% half-widths of `edge_errors`.
    pub half_widths: Vec<Vec<f64>>,
    /// `Σ_{i≠j}` of the edge errors.
    pub window_error: f64,
    pub window_error_half_width: f64,
    pub samples: usize,
    pub skipped: usize,
    pub seed: u64,
    pub window: (usize, usize),
}

impl ErrorReport {
    /// Mean edge error over existing edges of the given rows.
    pub fn mean_edge_error(&self, net: &ValidatedNetwork, rows: &[usize]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &i in rows {
            for j in 0..net.n() {
                if i != j && net.spec().weights[i][j] > 0.0 {
                    sum += self.edge_errors[i][j];
                    count += 1;
                }
            }
        }
        if count == 0 { 0.0 } else { sum / count as f64 }
    }
}

fn abs_errors(net: &ValidatedNetwork, w: &crate::linalg::Mat<Real>) -> Vec<f64> {
    let n = net.n();
    let truth = net.weights();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[i * n + j] = to_f64((w[(i, j)] - truth[(i, j)]).abs());
            }
        }
    }
    out
}

/// Solutions of `W P_{m,p} = Q_{m,p}` for each `p` in ascending `ends`,
/// built incrementally from one trajectory of length `max(ends) + 2`.
fn sample_errors(
    net: &ValidatedNetwork,
    m: usize,
    ends: &[usize],
    x0: &[f64],
    rank_tol: f64,
) -> Result<Vec<Option<Vec<f64>>>, McError> {
    let last = *ends.last().expect("non-empty ends");
    let traj = simulate(net, x0, last + 2)?;
    let mut acc = PairAccumulator::new(net.n());
    let mut out = Vec::with_capacity(ends.len());
    let mut next = 0;
    let mut dk = traj.diff(m);
    for k in m..=last {
        let dk1 = traj.diff(k + 1);
        acc.push(&dk, &dk1);
        dk = dk1;
        while next < ends.len() && ends[next] == k {
            let pair = acc.snapshot((m, k), rank_tol);
            out.push(pair.solve().map(|w| abs_errors(net, &w)));
            next += 1;
        }
    }
    Ok(out)
}

fn check_ends(net: &ValidatedNetwork, m: usize, ends: &[usize]) -> Result<(), McError> {
    if ends.is_empty() {
        return Err(McError::NoWindowEnds);
    }
    let needed = m + net.n();
    match ends.iter().find(|&&p| p < needed) {
        Some(&p) => Err(McError::WindowTooShort { p, needed }),
        None => Ok(()),
    }
}

/// Mean absolute edge error of the raw window solution over `cfg.samples`
/// random innate-opinion vectors.
pub fn mc_edge_errors(net: &ValidatedNetwork, m: usize, p: usize, cfg: &McConfig) -> Result<ErrorReport, McError> {
    if cfg.samples == 0 {
        return Err(McError::NoSamples);
    }
    check_ends(net, m, &[p])?;
    let n = net.n();
    let per_sample = map_indexed(cfg.samples, cfg.exec, |s| {
        let x0 = sample_x0(n, cfg.seed, s);
        sample_errors(net, m, &[p], &x0, cfg.rank_tol).map(|mut v| v.pop().flatten())
    });
    let mut edge = vec![Moments::default(); n * n];
    let mut total = Moments::default();
    let mut skipped = 0;
    for r in per_sample {
        match r? {
            Some(errs) => {
                for (mo, &e) in edge.iter_mut().zip(&errs) {
                    mo.push(e);
                }
                total.push(errs.iter().sum());
            }
            None => skipped += 1,
        }
    }
    if total.count == 0 {
        return Err(McError::AllSamplesDegenerate(cfg.samples));
    }
    let grid = |f: &dyn Fn(&Moments) -> f64| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f(&edge[i * n + j])).collect()).collect()
    };
    Ok(ErrorReport {
        edge_errors: grid(&|m| m.mean),
        half_widths: grid(&Moments::half_width),
        window_error: total.mean,
        window_error_half_width: total.half_width(),
        samples: total.count,
        skipped,
        seed: cfg.seed,
        window: (m, p),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowErrorPoint {
    pub p: usize,
    /// `e(m, p)`.
    pub error: f64,
    pub half_width: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// `e(m, p)` for every `p` in `ends`, reusing each sample's trajectory
/// across all window ends.
pub fn mc_window_error(
    net: &ValidatedNetwork,
    m: usize,
    ends: &[usize],
    cfg: &McConfig,
) -> Result<Vec<WindowErrorPoint>, McError> {
    if cfg.samples == 0 {
        return Err(McError::NoSamples);
    }
    let mut sorted = ends.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    check_ends(net, m, &sorted)?;
    let n = net.n();
    let per_sample = map_indexed(cfg.samples, cfg.exec, |s| {
        let x0 = sample_x0(n, cfg.seed, s);
        sample_errors(net, m, &sorted, &x0, cfg.rank_tol)
    });
    let mut acc = vec![Moments::default(); sorted.len()];
    for r in per_sample {
        for (mo, e) in acc.iter_mut().zip(r?) {
            if let Some(errs) = e {
                mo.push(errs.iter().sum());
            }
        }
    }
    if acc.iter().all(|m| m.count == 0) {
        return Err(McError::AllSamplesDegenerate(cfg.samples));
    }
    Ok(sorted
        .iter()
        .zip(&acc)
        .map(|(&p, mo)| WindowErrorPoint {
            p,
            error: if mo.count == 0 { f64::NAN } else { mo.mean },
            half_width: mo.half_width(),
            samples: mo.count,
            skipped: cfg.samples - mo.count,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanTrajectory {
    /// `mean[k][i]` is the sample mean of `x_i(k)`.
    pub mean: Vec<Vec<f64>>,
    pub half_width: Vec<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
}

pub fn mean_trajectory(net: &ValidatedNetwork, horizon: usize, cfg: &McConfig) -> Result<MeanTrajectory, McError> {
    if cfg.samples == 0 {
        return Err(McError::NoSamples);
    }
    let n = net.n();
    let runs = map_indexed(cfg.samples, cfg.exec, |s| {
        simulate(net, &sample_x0(n, cfg.seed, s), horizon).map(|t| t.to_f64_states())
    });
    let mut moments = vec![vec![Moments::default(); n]; horizon + 1];
    for r in runs {
        for (row, state) in moments.iter_mut().zip(r?) {
            for (mo, v) in row.iter_mut().zip(state) {
                mo.push(v);
            }
        }
    }
    Ok(MeanTrajectory {
        mean: moments.iter().map(|r| r.iter().map(|m| m.mean).collect()).collect(),
        half_width: moments
            .iter()
            .map(|r| r.iter().map(Moments::half_width).collect())
            .collect(),
        samples: cfg.samples,
        seed: cfg.seed,
    })
}
