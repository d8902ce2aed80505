//! Built-in benchmark targets and the bundled sensor network.

use jams_core::targets::{
    banana_t_mixture_target, gaussian_mixture_target, sensor_network_target, simulate_sensor_data, BananaTMixture,
    IsotropicGaussianMixture, SensorData, SensorNetwork, TargetDensity, N_SENSORS,
};

use crate::config::TargetSpec;
use crate::error::CliError;
use crate::formats::parse_sensor_data;

/// Locations used to simulate the bundled network. Sensors 1–8 are unknown,
/// 9–11 known. Sensor 1 sees only sensors 6 and 10, which sit almost on a
/// vertical line, so its first coordinate is ambiguous up to a reflection.
pub const SENSOR_TRUTH: [[f64; 2]; N_SENSORS] = [
    [0.15, 0.80],
    [0.10, 0.30],
    [0.30, 0.15],
    [0.80, 0.10],
    [0.55, 0.35],
    [0.35, 0.55],
    [0.80, 0.45],
    [0.85, 0.85],
    [0.60, 0.45],
    [0.35, 0.95],
    [0.45, 0.10],
];

pub const SENSOR_DATA_SEED: u64 = 29;

/// `simulate_sensor_data(SENSOR_TRUTH, SENSOR_DATA_SEED)`, as shipped in `data/`.
pub const BUNDLED_SENSOR_FILE: &str = include_str!("../data/sensor_network.txt");

pub fn bundled_sensor_data() -> SensorData {
    parse_sensor_data(BUNDLED_SENSOR_FILE).expect("bundled sensor data parses")
}

pub fn simulated_sensor_data() -> SensorData {
    simulate_sensor_data(&SENSOR_TRUTH, SENSOR_DATA_SEED).expect("truth locations are valid")
}

#[derive(Debug, Clone)]
pub enum Target {
    GaussianMixture(IsotropicGaussianMixture),
    BananaT(BananaTMixture),
    Sensor(SensorNetwork),
}

impl Target {
    pub fn build(spec: &TargetSpec) -> Result<Self, CliError> {
        Ok(match spec {
            TargetSpec::GaussianMixture { dim } => Target::GaussianMixture(gaussian_mixture_target(*dim)),
            TargetSpec::BananaT { dim } => Target::BananaT(banana_t_mixture_target(*dim)),
            TargetSpec::Sensor { data_path: None } => Target::Sensor(sensor_network_target(bundled_sensor_data())),
            TargetSpec::Sensor { data_path: Some(p) } => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Target::Sensor(sensor_network_target(parse_sensor_data(&text)?))
            }
        })
    }

    /// Exact mean of the target, where known.
    pub fn true_mean(&self) -> Option<Vec<f64>> {
        match self {
            Target::GaussianMixture(t) => Some(t.true_mean()),
            Target::BananaT(t) => Some(t.true_mean()),
            Target::Sensor(_) => None,
        }
    }

    fn inner(&self) -> &dyn TargetDensity {
        match self {
            Target::GaussianMixture(t) => t,
            Target::BananaT(t) => t,
            Target::Sensor(t) => t,
        }
    }
}

impl TargetDensity for Target {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn log_pdf(&self, x: &[f64]) -> f64 {
        self.inner().log_pdf(x)
    }
    fn grad_log_pdf(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inner().grad_log_pdf(x)
    }
    fn name(&self) -> &str {
        self.inner().name()
    }
}
