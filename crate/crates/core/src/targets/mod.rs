//! Target densities: the sampling interface and the built-in benchmark targets.

mod banana;
mod gaussian_mixture;
mod sensor;

use alloc::vec::Vec;

pub use banana::{banana_t_mixture_target, BananaTMixture, KOU_CENTERS};
pub use gaussian_mixture::{gaussian_mixture_target, IsotropicComponent, IsotropicGaussianMixture};
pub use sensor::{
    observation_probability, sensor_network_target, simulate_sensor_data, Observation, SensorData, SensorNetwork,
    DISTANCE_NOISE_SD, N_KNOWN, N_SENSORS, N_UNKNOWN, OBSERVATION_SCALE,
};

/// A log-density on `R^d` (up to an additive constant), optionally with its gradient.
///
/// `log_pdf` returns `-∞` where the density vanishes; samplers treat that as
/// automatic rejection. Evaluation must be reentrant.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;

    fn log_pdf(&self, x: &[f64]) -> f64;

    /// Analytic gradient of `log_pdf`, when available.
    fn grad_log_pdf(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn name(&self) -> &str;
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_pdf(&self, x: &[f64]) -> f64 {
        (**self).log_pdf(x)
    }
    fn grad_log_pdf(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).grad_log_pdf(x)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}
