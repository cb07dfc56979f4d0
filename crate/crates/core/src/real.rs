//! Scalar type used by every numerical path in the crate.
//!
//! Opinion differences late in a trajectory shrink by many orders of
//! magnitude, and the measurement matrices built from them routinely have
//! singular-value spreads beyond 1e-16. All simulation and inference
//! therefore runs in double-double arithmetic (~32 significant digits);
//! values are converted to `f64` only at the reporting boundary.

use qd::Quad;
use serde::{Deserialize, Serialize};

pub type Real = Quad;

#[inline]
pub fn real(v: f64) -> Real {
    Quad::from_f64(v)
}

#[inline]
pub fn to_f64(v: Real) -> f64 {
    v.0 + v.1
}

pub fn to_f64_vec(v: &[Real]) -> Vec<f64> {
    v.iter().copied().map(to_f64).collect()
}

pub fn from_f64_vec(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(real).collect()
}

/// Builds a value from its high and low words, renormalising if needed.
pub fn from_parts(hi: f64, lo: f64) -> Real {
    real(hi) + real(lo)
}

const TWO_PI: Real = Quad(std::f64::consts::TAU, 2.4492935982947064e-16);

/// Sine, accurate to double-double precision for moderate arguments.
pub fn sin(x: Real) -> Real {
    let k = (x.0 / TWO_PI.0).round();
    let r = x - TWO_PI * real(k);
    let r2 = r * r;
    let tiny = 1e-34 * r.0.abs().max(f64::MIN_POSITIVE);
    let mut term = r;
    let mut sum = r;
    let mut j = 1.0;
    while term.0.abs() > tiny {
        term = -term * r2 / real((2.0 * j) * (2.0 * j + 1.0));
        sum += term;
        j += 1.0;
    }
    sum
}

/// Precision of the data a trajectory carries.
///
/// Trajectories produced by the simulator are `DoubleDouble`; trajectories
/// read back from a plain CSV only retain `Double`. The default rank
/// tolerance follows the precision because the noise floor of the
/// difference matrix does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Double,
    DoubleDouble,
}

impl Precision {
    /// Relative tolerance on the singular values of `P` (Gram scale).
    pub fn default_rank_tol(self) -> f64 {
        match self {
            Precision::Double => 1e-10,
            Precision::DoubleDouble => 1e-40,
        }
    }
}
