//! Random networks for property tests and round-trip checks.
//!
//! Every generator is a pure function of `(n, seed)` and always returns a
//! spec that passes validation.

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{BiasModel, NetworkSpec, Source, ValidatedNetwork, validate_network};

/// Upper bound on each row's total influence (weights plus source terms).
const ROW_BUDGET: f64 = 0.95;
const EDGE_PROB: f64 = 0.3;

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub network: ValidatedNetwork,
    pub x0: Vec<f64>,
}

impl Synthetic {
    pub fn spec(&self) -> &NetworkSpec {
        self.network.spec()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Innate opinions in `[0.05, 1]`, away from the `x_i(0) = 0` degeneracy.
fn innate(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.05..=1.0)).collect()
}

/// Random sparse weights on top of a directed ring, so the graph is strongly
/// connected; row `i` sums to at most `ROW_BUDGET - bias_max[i]`.
fn weights(rng: &mut ChaCha8Rng, bias_max: &[f64]) -> Vec<Vec<f64>> {
    let n = bias_max.len();
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| {
                    if (n > 1 && j == (i + 1) % n) || (j != i && rng.random_bool(EDGE_PROB)) {
                        rng.random_range(0.1..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = row.iter().sum();
            let budget = ROW_BUDGET - bias_max[i];
            let target = rng.random_range(0.3 * budget..budget);
            if total > 0.0 {
                row.iter_mut().for_each(|w| *w *= target / total);
            }
            row
        })
        .collect()
}

fn pick_followers(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut f: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
    if f.is_empty() {
        f.push(rng.random_range(0..n));
    }
    f
}

fn finish(spec: NetworkSpec, x0: Vec<f64>) -> Synthetic {
    let network = validate_network(spec).expect("generated spec is valid");
    Synthetic { network, x0 }
}

/// One silenced source (`u = 0`) with piecewise-linear bias.
pub fn problem1(n: usize, seed: u64) -> Synthetic {
    let mut rng = rng_for(seed, 1);
    let followers = pick_followers(&mut rng, n);
    let mut bias = BTreeMap::new();
    let mut bias_max = vec![0.0; n];
    for &i in &followers {
        let beta = rng.random_range(0.05..=0.3);
        let gamma = rng.random_range(0.01..=0.9 * beta);
        bias.insert(i, BiasModel::PiecewiseLinear { beta, gamma });
        bias_max[i] = beta;
    }
    let weights = weights(&mut rng, &bias_max);
    let x0 = innate(&mut rng, n);
    finish(
        NetworkSpec {
            weights,
            sources: vec![Source {
                opinion: 0.0,
                followers,
            }],
            bias,
        },
        x0,
    )
}

/// `sources` uncontrolled sources with `u_d ~ U(0, 1)` and fixed weights.
pub fn problem2(n: usize, sources: usize, seed: u64) -> Synthetic {
    let mut rng = rng_for(seed, 2);
    let mut srcs = Vec::with_capacity(sources);
    let mut linked = vec![0usize; n];
    for _ in 0..sources {
        let followers = pick_followers(&mut rng, n);
        for &i in &followers {
            linked[i] += 1;
        }
        srcs.push(Source {
            opinion: rng.random_range(0.0..=1.0),
            followers,
        });
    }
    let mut bias = BTreeMap::new();
    let mut bias_max = vec![0.0; n];
    for i in (0..n).filter(|&i| linked[i] > 0) {
        let weight = rng.random_range(0.05..=0.3 / linked[i] as f64);
        bias.insert(i, BiasModel::Fixed { weight });
        bias_max[i] = weight * linked[i] as f64;
    }
    let weights = weights(&mut rng, &bias_max);
    let x0 = innate(&mut rng, n);
    finish(
        NetworkSpec {
            weights,
            sources: srcs,
            bias,
        },
        x0,
    )
}

/// A random catalog bias model and its maximum over `|x - u| ∈ [0, 1]`.
///
/// Slopes are kept away from zero so followers stay distinguishable.
pub fn custom_bias(rng: &mut ChaCha8Rng) -> (BiasModel, f64) {
    match rng.random_range(0..3) {
        0 => {
            let a = rng.random_range(0.05..=0.3);
            let b = rng.random_range(0.25 * a..=a);
            (BiasModel::Sin { a, b }, a)
        }
        1 => {
            let a = rng.random_range(0.05..=0.3);
            (BiasModel::Log { a, c: 2.0 }, a * 2f64.ln())
        }
        _ => {
            let c0 = rng.random_range(0.05..=0.3);
            let c1 = rng.random_range(0.2 * c0..=c0 / 2.0);
            let c2 = rng.random_range(0.0..=c1 / 4.0);
            (
                BiasModel::Poly {
                    coeffs: vec![c0, -c1, c2],
                },
                c0 + c2,
            )
        }
    }
}

/// One source with `u ~ U(0, 1)` and catalog bias functions.
pub fn problem3(n: usize, seed: u64) -> Synthetic {
    let mut rng = rng_for(seed, 3);
    let followers = pick_followers(&mut rng, n);
    let mut bias = BTreeMap::new();
    let mut bias_max = vec![0.0; n];
    for &i in &followers {
        let (model, max) = custom_bias(&mut rng);
        bias.insert(i, model);
        bias_max[i] = max;
    }
    let weights = weights(&mut rng, &bias_max);
    let opinion = rng.random_range(0.0..=1.0);
    let x0 = innate(&mut rng, n);
    finish(
        NetworkSpec {
            weights,
            sources: vec![Source { opinion, followers }],
            bias,
        },
        x0,
    )
}

/// Network without any source.
pub fn no_source(n: usize, seed: u64) -> Synthetic {
    let mut rng = rng_for(seed, 4);
    let weights = weights(&mut rng, &vec![0.0; n]);
    let x0 = innate(&mut rng, n);
    finish(
        NetworkSpec {
            weights,
            sources: Vec::new(),
            bias: BTreeMap::new(),
        },
        x0,
    )
}
