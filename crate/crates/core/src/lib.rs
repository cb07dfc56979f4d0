//! Opinion dynamics with information sources and confirmation bias, and
//! inference of the influence network from observed opinion trajectories.
//!
//! - [`network`]: ground-truth specification and validation.
//! - [`dynamics`]: simulation and the affine encodings.
//! - [`measurement`]: data matrices `P`, `Q` and rank diagnostics.
//! - [`exact`]: exact recovery for piecewise-linear and constant bias.
//! - [`approx`]: windowed inference under an unknown bias model.
//! - [`montecarlo`]: error estimates over random innate opinions.
//! - [`scenario`] and [`cli`]: file formats and the command-line tool.
//!
//! All arithmetic on opinions runs in double-double precision ([`real`]).

pub mod approx;
pub mod cli;
pub mod dynamics;
pub mod exact;
pub mod linalg;
pub mod measurement;
pub mod montecarlo;
pub mod network;
pub mod par;
pub mod real;
pub mod scenario;
pub mod synth;
