//! Ground-truth network: influence weights, information sources and the
//! confirmation-bias model of each follower.
//!
//! Indices are 0-based throughout the library; scenario files use 1-based
//! indices and are converted at the I/O boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;
use crate::real::{Real, real, sin};

/// Weight an individual assigns to each linked source, as a function of its
/// own opinion `x` and the source opinion `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BiasModel {
    /// Constant weight (no confirmation bias).
    Fixed { weight: f64 },
    /// `beta - gamma * |x - u|`.
    #[serde(rename = "linear")]
    PiecewiseLinear { beta: f64, gamma: f64 },
    /// `a - b * sin(|x - u|)`.
    Sin { a: f64, b: f64 },
    /// `a * ln(c - x)`.
    Log { a: f64, c: f64 },
    /// `sum_k coeffs[k] * |x - u|^k`.
    Poly { coeffs: Vec<f64> },
}

impl BiasModel {
    /// True for the catalog functions outside the piecewise-linear family.
    pub fn is_custom(&self) -> bool {
        matches!(
            self,
            BiasModel::Sin { .. } | BiasModel::Log { .. } | BiasModel::Poly { .. }
        )
    }

    /// `(beta, gamma)` if the model is affine in `|x - u|`.
    pub fn piecewise(&self) -> Option<(f64, f64)> {
        match *self {
            BiasModel::Fixed { weight } => Some((weight, 0.0)),
            BiasModel::PiecewiseLinear { beta, gamma } => Some((beta, gamma)),
            _ => None,
        }
    }

    pub fn eval(&self, x: Real, u: Real) -> Real {
        let t = (x - u).abs();
        match self {
            BiasModel::Fixed { weight } => real(*weight),
            BiasModel::PiecewiseLinear { beta, gamma } => real(*beta) - real(*gamma) * t,
            BiasModel::Sin { a, b } => real(*a) - real(*b) * sin(t),
            BiasModel::Log { a, c } => real(*a) * (real(*c) - x).ln(),
            BiasModel::Poly { coeffs } => coeffs.iter().rev().fold(real(0.0), |acc, &c| acc * t + real(c)),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            BiasModel::Fixed { weight } => *weight == 0.0,
            BiasModel::PiecewiseLinear { beta, gamma } => *beta == 0.0 && *gamma == 0.0,
            _ => false,
        }
    }

    fn parameters_finite(&self) -> bool {
        match self {
            BiasModel::Fixed { weight } => weight.is_finite(),
            BiasModel::PiecewiseLinear { beta, gamma } => {
                beta.is_finite() && gamma.is_finite() && *beta >= 0.0 && *gamma >= 0.0
            }
            BiasModel::Sin { a, b } => a.is_finite() && b.is_finite(),
            BiasModel::Log { a, c } => a.is_finite() && c.is_finite(),
            BiasModel::Poly { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()),
        }
    }
}

/// `ŵ(x)` for one source link; `None` means the individual is not linked.
pub fn bias_weight(model: Option<&BiasModel>, x: Real, u: Real) -> Real {
    model.map_or(real(0.0), |m| m.eval(x, u))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Source {
    /// Opinion `u_d` in `[0, 1]`.
    pub opinion: f64,
    /// Individuals listening to this source.
    pub followers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `weights[i][j]` is the influence of `j` on `i`.
    pub weights: Vec<Vec<f64>>,
    pub sources: Vec<Source>,
    /// Bias model of each follower, applied to every source it follows.
    pub bias: BTreeMap<usize, BiasModel>,
}

impl NetworkSpec {
    pub fn n(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum NetworkError {
    #[error("weight matrix must be square and non-empty (row {row} has {len} entries, expected {n})")]
    Shape { row: usize, len: usize, n: usize },
    #[error("self-loop at individual {}", .0 + 1)]
    SelfLoop(usize),
    #[error("negative or non-finite weight w[{},{}]", .0 + 1, .1 + 1)]
    NegativeWeight(usize, usize),
    #[error("source {} has opinion {} outside [0, 1]", .0 + 1, .1)]
    SourceOpinionOutOfRange(usize, f64),
    #[error("source {} lists follower {} which is not an individual", .0 + 1, .1 + 1)]
    FollowerOutOfRange(usize, usize),
    #[error("source {} lists follower {} more than once", .0 + 1, .1 + 1)]
    DuplicateFollower(usize, usize),
    #[error("individual {} has a non-zero bias model but follows no source", .0 + 1)]
    BiasWithoutSource(usize),
    #[error("follower {} has no bias model", .0 + 1)]
    MissingBias(usize),
    #[error("bias of individual {} leaves [0, 1) at x = {}", .0 + 1, .1)]
    BiasOutOfRange(usize, f64),
    #[error("resistance of individual {} is negative at x = {}", .0 + 1, .1)]
    RowSumExceeded(usize, f64),
    #[error("encoding requires piecewise-linear bias and zero source opinions (individual {})", .0 + 1)]
    WrongRegime(usize),
}

/// Slack on the resistance sign so that pure averaging rows (`α = 0`) pass.
pub const RESISTANCE_SLACK: f64 = 1e-12;

const CUSTOM_GRID: usize = 1001;

/// A network that passed [`validate_network`]. Immutable.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedNetwork {
    spec: NetworkSpec,
    weights: Mat<Real>,
    row_sums: Vec<Real>,
    links: Vec<Vec<usize>>,
}

impl ValidatedNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn weights(&self) -> &Mat<Real> {
        &self.weights
    }

    pub fn row_sum(&self, i: usize) -> Real {
        self.row_sums[i]
    }

    /// Source indices followed by `i`.
    pub fn links(&self, i: usize) -> &[usize] {
        &self.links[i]
    }

    pub fn is_follower(&self, i: usize) -> bool {
        !self.links[i].is_empty()
    }

    pub fn followers(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.is_follower(i)).collect()
    }

    pub fn source_opinions(&self) -> Vec<f64> {
        self.spec.sources.iter().map(|s| s.opinion).collect()
    }

    pub fn bias(&self, i: usize) -> Option<&BiasModel> {
        if self.is_follower(i) {
            self.spec.bias.get(&i)
        } else {
            None
        }
    }

    /// Total source weight `Σ_d ŵ_{i,d}(x)` and source pull `Σ_d ŵ_{i,d}(x) u_d`.
    pub fn source_terms(&self, i: usize, x: Real) -> (Real, Real) {
        let model = self.bias(i);
        let mut total = real(0.0);
        let mut pull = real(0.0);
        for &d in &self.links[i] {
            let u = real(self.spec.sources[d].opinion);
            let w = bias_weight(model, x, u);
            total += w;
            pull += w * u;
        }
        (total, pull)
    }

    /// Effective piecewise parameters `(|links| β, |links| γ)` when the
    /// individual's bias is affine; `(0, 0)` for non-followers.
    pub fn effective_piecewise(&self, i: usize) -> Option<(Real, Real)> {
        let k = real(self.links[i].len() as f64);
        match self.bias(i) {
            None => Some((real(0.0), real(0.0))),
            Some(m) => m.piecewise().map(|(b, g)| (k * real(b), k * real(g))),
        }
    }
}

/// Resistance `α_i(x) = 1 - Σ_j w_ij - Σ_d ŵ_id(x)`.
pub fn resistance(net: &ValidatedNetwork, i: usize, x: Real) -> Real {
    real(1.0) - net.row_sum(i) - net.source_terms(i, x).0
}

/// Checks every structural and range constraint, collecting all violations.
pub fn validate_network(spec: NetworkSpec) -> Result<ValidatedNetwork, Vec<NetworkError>> {
    let n = spec.n();
    let mut errors = Vec::new();
    if n == 0 {
        errors.push(NetworkError::Shape { row: 0, len: 0, n: 0 });
        return Err(errors);
    }
    for (i, row) in spec.weights.iter().enumerate() {
        if row.len() != n {
            errors.push(NetworkError::Shape {
                row: i,
                len: row.len(),
                n,
            });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    for (i, row) in spec.weights.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                errors.push(NetworkError::NegativeWeight(i, j));
            } else if i == j && w != 0.0 {
                errors.push(NetworkError::SelfLoop(i));
            }
        }
    }
    let mut links = vec![Vec::new(); n];
    for (d, src) in spec.sources.iter().enumerate() {
        if !(0.0..=1.0).contains(&src.opinion) {
            errors.push(NetworkError::SourceOpinionOutOfRange(d, src.opinion));
        }
        for &i in &src.followers {
            if i >= n {
                errors.push(NetworkError::FollowerOutOfRange(d, i));
            } else if links[i].contains(&d) {
                errors.push(NetworkError::DuplicateFollower(d, i));
            } else {
                links[i].push(d);
            }
        }
    }
    for (&i, model) in &spec.bias {
        if i >= n || (links[i].is_empty() && !model.is_zero()) {
            errors.push(NetworkError::BiasWithoutSource(i));
        } else if !model.parameters_finite() {
            errors.push(NetworkError::BiasOutOfRange(i, f64::NAN));
        }
    }
    for (i, l) in links.iter().enumerate() {
        if !l.is_empty() && !spec.bias.contains_key(&i) {
            errors.push(NetworkError::MissingBias(i));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let weights = Mat::from_fn(n, n, |i, j| real(spec.weights[i][j]));
    let row_sums = (0..n)
        .map(|i| weights.row(i).iter().fold(real(0.0), |s, &w| s + w))
        .collect();
    let net = ValidatedNetwork {
        spec,
        weights,
        row_sums,
        links,
    };

    for i in 0..n {
        let Some(model) = net.bias(i) else {
            if net.row_sum(i) > real(1.0 + RESISTANCE_SLACK) {
                errors.push(NetworkError::RowSumExceeded(i, 0.0));
            }
            continue;
        };
        let mut points: Vec<f64> = net.links(i).iter().map(|&d| net.spec.sources[d].opinion).collect();
        if model.is_custom() {
            points.extend((0..CUSTOM_GRID).map(|k| k as f64 / (CUSTOM_GRID - 1) as f64));
        } else {
            points.extend([0.0, 1.0]);
        }
        let mut bias_bad = None;
        let mut alpha_bad = None;
        for &x in &points {
            let xr = real(x);
            for &d in net.links(i) {
                let g = model.eval(xr, real(net.spec.sources[d].opinion));
                if bias_bad.is_none() && !(g >= real(0.0) && g < real(1.0)) {
                    bias_bad = Some(x);
                }
            }
            if alpha_bad.is_none() && resistance(&net, i, xr) < real(-RESISTANCE_SLACK) {
                alpha_bad = Some(x);
            }
        }
        if let Some(x) = bias_bad {
            errors.push(NetworkError::BiasOutOfRange(i, x));
        }
        if let Some(x) = alpha_bad {
            errors.push(NetworkError::RowSumExceeded(i, x));
        }
    }
    if errors.is_empty() { Ok(net) } else { Err(errors) }
}

/// Affine encoding `x(k+1) = A x(0) + W x(k)` of piecewise-linear dynamics
/// with all source opinions at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrices {
    pub a: Mat<Real>,
    pub w: Mat<Real>,
    /// `A + W - I`.
    pub l: Mat<Real>,
}

pub fn build_encoded(net: &ValidatedNetwork, x0: &[Real]) -> Result<EncodedMatrices, NetworkError> {
    let n = net.n();
    assert_eq!(x0.len(), n, "x0 length mismatch");
    let mut a = Mat::zeros(n, n);
    let mut w = net.weights().clone();
    for i in 0..n {
        if net.links(i).iter().any(|&d| net.spec().sources[d].opinion != 0.0) {
            return Err(NetworkError::WrongRegime(i));
        }
        let (beta, gamma) = net.effective_piecewise(i).ok_or(NetworkError::WrongRegime(i))?;
        a[(i, i)] = real(1.0) - net.row_sum(i) - beta;
        w[(i, i)] = gamma * x0[i];
    }
    let l = a.add(&w).sub(&Mat::identity(n));
    Ok(EncodedMatrices { a, w, l })
}
