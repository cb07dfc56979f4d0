//! Forward simulation of opinion dynamics and the affine encodings used as
//! oracles by the inference modules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Mat, lu_solve};
use crate::network::{EncodedMatrices, ValidatedNetwork};
use crate::real::{Precision, Real, real, to_f64};

/// Which inference problem a trajectory belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Piecewise-linear bias, all source opinions zero.
    #[serde(rename = "I")]
    ProblemI,
    /// Constant source weights, arbitrary source opinions.
    #[serde(rename = "II")]
    ProblemII,
    /// Unknown bias, arbitrary source opinions.
    #[serde(rename = "III")]
    ProblemIII,
}

impl Regime {
    pub fn detect(net: &ValidatedNetwork) -> Regime {
        let followers = net.followers();
        let models: Vec<_> = followers.iter().filter_map(|&i| net.bias(i)).collect();
        if models.iter().any(|m| m.is_custom()) {
            return Regime::ProblemIII;
        }
        let sources_zero = followers
            .iter()
            .all(|&i| net.links(i).iter().all(|&d| net.spec().sources[d].opinion == 0.0));
        if sources_zero {
            Regime::ProblemI
        } else if models.iter().all(|m| m.piecewise().is_some_and(|(_, g)| g == 0.0)) {
            Regime::ProblemII
        } else {
            Regime::ProblemIII
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DynamicsError {
    #[error("horizon must be at least 1")]
    HorizonZero,
    #[error("initial opinion of individual {} is {}, outside [0, 1]", .0 + 1, .1)]
    OpinionOutOfRange(usize, f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("follower {} has zero innate opinion", .0 + 1)]
    ZeroInnateOpinion(usize),
    #[error("I - W is singular")]
    SingularSystem,
}

/// Opinion vectors `x(0), ..., x(T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<Real>>,
    pub regime: Option<Regime>,
    pub source_opinions: Vec<f64>,
    pub precision: Precision,
}

impl Trajectory {
    pub fn from_states(states: Vec<Vec<Real>>, precision: Precision) -> Self {
        Trajectory {
            states,
            regime: None,
            source_opinions: Vec::new(),
            precision,
        }
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Number of stored states, `T + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn x0(&self) -> &[Real] {
        &self.states[0]
    }

    pub fn state(&self, k: usize) -> &[Real] {
        &self.states[k]
    }

    /// `d(k) = x(k+1) - x(k)`.
    pub fn diff(&self, k: usize) -> Vec<Real> {
        self.states[k + 1]
            .iter()
            .zip(&self.states[k])
            .map(|(&a, &b)| a - b)
            .collect()
    }

    /// `max_i |x_i(k+1) - x_i(k)|`.
    pub fn step_size(&self, k: usize) -> f64 {
        self.diff(k).into_iter().map(|v| to_f64(v).abs()).fold(0.0, f64::max)
    }

    pub fn to_f64_states(&self) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .map(|s| s.iter().copied().map(to_f64).collect())
            .collect()
    }
}

/// Simulates `horizon` steps of the general update rule, tagging the detected regime.
pub fn simulate(net: &ValidatedNetwork, x0: &[f64], horizon: usize) -> Result<Trajectory, DynamicsError> {
    simulate_as(net, x0, horizon, Regime::detect(net))
}

/// Same as [`simulate`] with an explicit regime tag.
///
/// The raw update needs no division by innate opinions, so it is valid for
/// every regime; the tag only tells downstream inference what to expect.
pub fn simulate_as(
    net: &ValidatedNetwork,
    x0: &[f64],
    horizon: usize,
    regime: Regime,
) -> Result<Trajectory, DynamicsError> {
    let n = net.n();
    if horizon == 0 {
        return Err(DynamicsError::HorizonZero);
    }
    if x0.len() != n {
        return Err(DynamicsError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if let Some(i) = x0.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(DynamicsError::OpinionOutOfRange(i, x0[i]));
    }
    let s: Vec<Real> = x0.iter().copied().map(real).collect();
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(s.clone());
    for _ in 0..horizon {
        let next = step(net, &s, states.last().unwrap());
        states.push(next);
    }
    Ok(Trajectory {
        states,
        regime: Some(regime),
        source_opinions: net.source_opinions(),
        precision: Precision::DoubleDouble,
    })
}

/// One step `x_i ← α_i(x_i) s_i + Σ_j w_ij x_j + Σ_d ŵ_id(x_i) u_d`.
pub fn step(net: &ValidatedNetwork, s: &[Real], x: &[Real]) -> Vec<Real> {
    let social = net.weights().mul_vec(x);
    (0..net.n())
        .map(|i| {
            let (total, pull) = net.source_terms(i, x[i]);
            let alpha = real(1.0) - net.row_sum(i) - total;
            alpha * s[i] + social[i] + pull
        })
        .collect()
}

/// `x(k+1) = A x(0) + W x(k)`.
pub fn step_encoded(enc: &EncodedMatrices, x0: &[Real], xk: &[Real]) -> Result<Vec<Real>, DynamicsError> {
    let n = enc.w.rows();
    for v in [x0, xk] {
        if v.len() != n {
            return Err(DynamicsError::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let a = enc.a.mul_vec(x0);
    let w = enc.w.mul_vec(xk);
    Ok(a.into_iter().zip(w).map(|(p, q)| p + q).collect())
}

/// Diagonal of the time-varying encoding `Ă(k)`, with which
/// `x(k+1) = Ă(k) x(0) + W x(k)` and `W` is the plain weight matrix.
pub fn build_a_of_k(net: &ValidatedNetwork, xk: &[Real], x0: &[Real]) -> Result<Vec<Real>, DynamicsError> {
    (0..net.n())
        .map(|i| {
            let base = real(1.0) - net.row_sum(i);
            if !net.is_follower(i) {
                return Ok(base);
            }
            if x0[i] == real(0.0) {
                return Err(DynamicsError::ZeroInnateOpinion(i));
            }
            let (total, pull) = net.source_terms(i, xk[i]);
            Ok(base - total + pull / x0[i])
        })
        .collect()
}

/// Solves `(I - W) x* = A x(0)`.
pub fn steady_state(enc: &EncodedMatrices, x0: &[Real]) -> Result<Vec<Real>, DynamicsError> {
    let n = enc.w.rows();
    if x0.len() != n {
        return Err(DynamicsError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let lhs = Mat::identity(n).sub(&enc.w);
    let rhs = Mat::from_fn(n, 1, |i, _| {
        enc.a.row(i).iter().zip(x0).fold(real(0.0), |s, (&a, &b)| s + a * b)
    });
    lu_solve(&lhs, &rhs)
        .map(|x| x.col(0))
        .ok_or(DynamicsError::SingularSystem)
}
