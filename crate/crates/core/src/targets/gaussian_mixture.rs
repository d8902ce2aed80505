use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::TargetDensity;
use crate::numerics::special::{log_sum_exp, normal_cdf, normal_log_normalizer};

/// One `w · N(mean, variance · I)` component.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: f64,
}

/// Finite mixture of isotropic Gaussians.
#[derive(Debug, Clone)]
pub struct IsotropicGaussianMixture {
    dim: usize,
    components: Vec<IsotropicComponent>,
    log_consts: Vec<f64>,
    name: String,
}

impl IsotropicGaussianMixture {
    pub fn new(components: Vec<IsotropicComponent>, name: impl Into<String>) -> Self {
        assert!(!components.is_empty());
        let dim = components[0].mean.len();
        assert!(components.iter().all(|c| c.mean.len() == dim && c.variance > 0.0));
        let total: f64 = components.iter().map(|c| c.weight).sum();
        let log_consts = components
            .iter()
            .map(|c| {
                (c.weight / total).ln() + normal_log_normalizer(dim) - 0.5 * dim as f64 * c.variance.ln()
            })
            .collect();
        Self {
            dim,
            components,
            log_consts,
            name: name.into(),
        }
    }

    pub fn components(&self) -> &[IsotropicComponent] {
        &self.components
    }

    fn component_terms(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.log_consts)
            .map(|(c, &k)| {
                let sq: f64 = x.iter().zip(&c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
                k - 0.5 * sq / c.variance
            })
            .collect()
    }

    /// Mixture mean `Σ w_c μ_c`.
    pub fn true_mean(&self) -> Vec<f64> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut mean = vec![0.0; self.dim];
        for c in &self.components {
            for (m, v) in mean.iter_mut().zip(&c.mean) {
                *m += c.weight / total * v;
            }
        }
        mean
    }

    /// CDF of the first coordinate's marginal.
    pub fn marginal_cdf(&self, t: f64) -> f64 {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        self.components
            .iter()
            .map(|c| c.weight / total * normal_cdf((t - c.mean[0]) / c.variance.sqrt()))
            .sum()
    }
}

impl TargetDensity for IsotropicGaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.component_terms(x))
    }

    fn grad_log_pdf(&self, x: &[f64]) -> Option<Vec<f64>> {
        let terms = self.component_terms(x);
        let lse = log_sum_exp(&terms);
        let mut grad = vec![0.0; self.dim];
        for (c, t) in self.components.iter().zip(&terms) {
            let r = (t - lse).exp();
            if r == 0.0 {
                continue;
            }
            for ((g, xi), mi) in grad.iter_mut().zip(x).zip(&c.mean) {
                *g -= r * (xi - mi) / c.variance;
            }
        }
        Some(grad)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// `½ N(−1, σ₁² I) + ½ N(+1, σ₂² I)` with `σ₁² = 0.5 √(d/100)` and `σ₂² = √(d/100)`.
pub fn gaussian_mixture_target(dim: usize) -> IsotropicGaussianMixture {
    assert!(dim >= 1);
    let root = (dim as f64 / 100.0).sqrt();
    IsotropicGaussianMixture::new(
        vec![
            IsotropicComponent {
                weight: 0.5,
                mean: vec![-1.0; dim],
                variance: 0.5 * root,
            },
            IsotropicComponent {
                weight: 0.5,
                mean: vec![1.0; dim],
                variance: root,
            },
        ],
        "gaussian_mixture",
    )
}
