//! Seeded generators for the three simulation scenarios.
//!
//! All randomness flows through xoshiro256++ seeded by splitmix64, with
//! independent sub-streams derived by hashing `(seed, stream)` through
//! the splitmix64 finalizer. The generator family and derivation scheme
//! are pinned in [`PRNG_ID`] and embedded in every output file so runs
//! can be reproduced bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::eta_signal;
use crate::types::Dataset;

/// Identifier of the pinned PRNG scheme, written into output metadata.
pub const PRNG_ID: &str = "xoshiro256++/splitmix64-streams v1";

/// The three synthetic benchmark scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Example1,
    Example2,
    Example3,
}

impl Scenario {
    /// Total dimension used in the reference experiments: two signal
    /// dimensions plus scenario-specific noise.
    pub fn default_dims(&self) -> usize {
        match self {
            Scenario::Example1 => 10,
            Scenario::Example2 => 100,
            Scenario::Example3 => 500,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "example1" => Ok(Scenario::Example1),
            "example2" => Ok(Scenario::Example2),
            "example3" => Ok(Scenario::Example3),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario '{other}'; expected example1, example2, or example3"
            ))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::Example1 => write!(f, "example1"),
            Scenario::Example2 => write!(f, "example2"),
            Scenario::Example3 => write!(f, "example3"),
        }
    }
}

/// splitmix64 finalizer; the standard avalanche mix.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// An independent generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(mix64(seed ^ mix64(stream)))
}

/// A derived seed for the `index`-th member of a family (data splits,
/// benchmark repeats). The golden-ratio stride keeps neighbouring base
/// seeds from producing overlapping families.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(index.wrapping_add(1)))
}

/// One joint draw `(signal, label)` of a scenario's two signal
/// dimensions; noise dimensions are appended separately.
pub(crate) fn sample_pair(scenario: Scenario, rng: &mut Xoshiro256PlusPlus) -> ([f64; 2], i8) {
    match scenario {
        Scenario::Example1 => {
            let label: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
            let (mu, sd) = if label == 1 {
                ([1.0, 0.0], [0.5f64.sqrt(), 2.0f64.sqrt()])
            } else {
                ([-2.0, 1.0], [2.0f64.sqrt(), 0.5f64.sqrt()])
            };
            let x1 = Normal::new(mu[0], sd[0]).unwrap().sample(rng);
            let x2 = Normal::new(mu[1], sd[1]).unwrap().sample(rng);
            ([x1, x2], label)
        }
        Scenario::Example2 => {
            let x1 = rng.random_range(-1.0..1.0);
            let x2 = rng.random_range(-1.0..1.0);
            let eta = eta_signal(Scenario::Example2, x1, x2);
            let label: i8 = if rng.random_bool(eta) { 1 } else { -1 };
            ([x1, x2], label)
        }
        Scenario::Example3 => {
            let label: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let r = if label == 1 {
                rng.random_range(0.8..2.0)
            } else {
                rng.random_range(0.0..1.2)
            };
            ([r * theta.cos(), r * theta.sin()], label)
        }
    }
}

fn generate(scenario: Scenario, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "total dimension must be at least 2, got {p}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    // Noise shares the scale convention sigma^2 = 1/p with p the total
    // dimension, identically distributed in both classes.
    let noise = Normal::new(0.0, (1.0 / p as f64).sqrt()).unwrap();
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (signal, label) = sample_pair(scenario, &mut rng);
        features.push(signal[0]);
        features.push(signal[1]);
        for _ in 2..p {
            features.push(noise.sample(&mut rng));
        }
        labels.push(label);
    }
    Dataset::new(n, p, features, labels)
}

/// Two Gaussian classes with unequal covariances plus noise dimensions.
pub fn gen_example1(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "example1 requires n >= 2, got {n}"
        )));
    }
    generate(Scenario::Example1, n, p, seed)
}

/// Uniform square with a quartic class boundary plus noise dimensions.
pub fn gen_example2(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(Scenario::Example2, n, p, seed)
}

/// Overlapping radial classes (disc against annulus) plus noise.
pub fn gen_example3(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(Scenario::Example3, n, p, seed)
}

pub fn generate_scenario(scenario: Scenario, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    match scenario {
        Scenario::Example1 => gen_example1(n, p, seed),
        Scenario::Example2 => gen_example2(n, p, seed),
        Scenario::Example3 => gen_example3(n, p, seed),
    }
}
