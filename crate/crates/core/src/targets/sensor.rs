use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TargetDensity;
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

pub const N_SENSORS: usize = 11;
pub const N_UNKNOWN: usize = 8;
pub const N_KNOWN: usize = 3;
/// Length scale of the observation probability `exp(−r²/(2·0.3²))`.
pub const OBSERVATION_SCALE: f64 = 0.3;
/// Standard deviation of an observed distance around the true one.
pub const DISTANCE_NOISE_SD: f64 = 0.02;

/// One observed distance. Indices are 0-based with `i < j`; sensors
/// `0..N_UNKNOWN` are unknown, the rest known.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub i: usize,
    pub j: usize,
    pub y: f64,
}

/// Known sensor locations plus the observed pairwise distances.
/// A pair involving an unknown sensor is observed iff it appears in `observations`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensorData {
    known: [[f64; 2]; N_KNOWN],
    observations: Vec<Observation>,
}

impl SensorData {
    pub fn new(known: [[f64; 2]; N_KNOWN], mut observations: Vec<Observation>) -> Result<Self> {
        if known.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("known location is not finite".into()));
        }
        for o in &observations {
            if o.i >= o.j || o.j >= N_SENSORS {
                return Err(Error::InvalidData(format!("bad pair ({}, {})", o.i + 1, o.j + 1)));
            }
            if o.i >= N_UNKNOWN {
                return Err(Error::InvalidData(format!(
                    "pair ({}, {}) joins two known sensors",
                    o.i + 1,
                    o.j + 1
                )));
            }
            if !(o.y >= 0.0 && o.y.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "distance for pair ({}, {}) must be finite and non-negative",
                    o.i + 1,
                    o.j + 1
                )));
            }
        }
        observations.sort_by_key(|o| (o.i, o.j));
        if observations.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::InvalidData("duplicate observed pair".into()));
        }
        Ok(Self { known, observations })
    }

    pub fn known_locations(&self) -> &[[f64; 2]; N_KNOWN] {
        &self.known
    }

    /// Observed pairs sorted by `(i, j)`.
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Observation indicator `w_ij`.
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.observations
            .binary_search_by_key(&(a, b), |o| (o.i, o.j))
            .is_ok()
    }
}

#[derive(Debug, Clone, Copy)]
enum Pair {
    Observed(f64),
    Unobserved,
}

/// Posterior over the 8 unknown sensor locations under a flat prior, laid out
/// as `(z₁₁, z₁₂, z₂₁, …, z₈₂)`.
#[derive(Debug, Clone)]
pub struct SensorNetwork {
    data: SensorData,
    /// Every pair with at least one unknown sensor.
    pairs: Vec<(usize, usize, Pair)>,
}

impl SensorNetwork {
    pub fn new(data: SensorData) -> Self {
        let mut pairs = Vec::with_capacity(N_UNKNOWN * N_KNOWN + N_UNKNOWN * (N_UNKNOWN - 1) / 2);
        for i in 0..N_UNKNOWN {
            for j in (i + 1)..N_SENSORS {
                let kind = data
                    .observations
                    .binary_search_by_key(&(i, j), |o| (o.i, o.j))
                    .map(|k| Pair::Observed(data.observations[k].y))
                    .unwrap_or(Pair::Unobserved);
                pairs.push((i, j, kind));
            }
        }
        Self { data, pairs }
    }

    pub fn data(&self) -> &SensorData {
        &self.data
    }

    fn location(&self, x: &[f64], s: usize) -> [f64; 2] {
        if s < N_UNKNOWN {
            [x[2 * s], x[2 * s + 1]]
        } else {
            self.data.known[s - N_UNKNOWN]
        }
    }
}

fn two_var() -> f64 {
    2.0 * OBSERVATION_SCALE * OBSERVATION_SCALE
}

fn two_noise_var() -> f64 {
    2.0 * DISTANCE_NOISE_SD * DISTANCE_NOISE_SD
}

/// `log f_ij` for a pair at squared distance `r2`.
fn pair_log_factor(r2: f64, pair: Pair) -> f64 {
    match pair {
        Pair::Observed(y) => {
            let r = r2.sqrt();
            -r2 / two_var() - (y - r) * (y - r) / two_noise_var()
        }
        Pair::Unobserved => (-(-r2 / two_var()).exp_m1()).ln(),
    }
}

impl TargetDensity for SensorNetwork {
    fn dim(&self) -> usize {
        2 * N_UNKNOWN
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for &(i, j, pair) in &self.pairs {
            let (a, b) = (self.location(x, i), self.location(x, j));
            let r2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            total += pair_log_factor(r2, pair);
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }

    fn grad_log_pdf(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        for &(i, j, pair) in &self.pairs {
            let (a, b) = (self.location(x, i), self.location(x, j));
            let diff = [a[0] - b[0], a[1] - b[1]];
            let r2 = diff[0] * diff[0] + diff[1] * diff[1];
            // coefficient c such that ∇_{x_i} log f_ij = c · (x_i − x_j)
            let c = match pair {
                Pair::Observed(y) => {
                    let r = r2.sqrt();
                    let radial = if r > 0.0 { 2.0 * (y - r) / (two_noise_var() * r) } else { 0.0 };
                    -2.0 / two_var() + radial
                }
                Pair::Unobserved => 2.0 / (two_var() * (r2 / two_var()).exp_m1()),
            };
            for k in 0..2 {
                g[2 * i + k] += c * diff[k];
                if j < N_UNKNOWN {
                    g[2 * j + k] -= c * diff[k];
                }
            }
        }
        Some(g)
    }

    fn name(&self) -> &str {
        "sensor"
    }
}

pub fn sensor_network_target(data: SensorData) -> SensorNetwork {
    SensorNetwork::new(data)
}

/// Simulates an observation pattern and noisy distances for pairs involving at
/// least one unknown sensor. Negative distance draws are redrawn.
pub fn simulate_sensor_data(truth: &[[f64; 2]; N_SENSORS], seed: u64) -> Result<SensorData> {
    let mut rng = stream(seed, &[purpose::SENSOR_DATA]);
    let mut observations = Vec::new();
    for i in 0..N_UNKNOWN {
        for j in (i + 1)..N_SENSORS {
            let r2 = (truth[i][0] - truth[j][0]).powi(2) + (truth[i][1] - truth[j][1]).powi(2);
            let u: f64 = rng.random();
            if u < observation_probability(r2.sqrt()) {
                let r = r2.sqrt();
                let y = loop {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let y = r + DISTANCE_NOISE_SD * z;
                    if y >= 0.0 {
                        break y;
                    }
                };
                observations.push(Observation { i, j, y });
            }
        }
    }
    let known = [truth[N_UNKNOWN], truth[N_UNKNOWN + 1], truth[N_UNKNOWN + 2]];
    SensorData::new(known, observations)
}

/// `exp(−r²/(2·0.3²))`.
pub fn observation_probability(r: f64) -> f64 {
    (-r * r / two_var()).exp()
}
