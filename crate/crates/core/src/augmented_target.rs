//! The augmented density `π̃(x, i)` on `X × I` and the elliptical
//! mode-companion distributions `Q_i`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::special::{log_sum_exp, normal_log_normalizer, t_log_normalizer};
use crate::numerics::{CholeskyFactor, SpdMatrix};
use crate::targets::TargetDensity;

/// Family of an elliptical distribution: Gaussian or multivariate t with
/// `dof > 2` degrees of freedom (shape-matrix parametrization).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum EllipticalKind {
    Normal,
    StudentT { dof: f64 },
}

impl Default for EllipticalKind {
    fn default() -> Self {
        EllipticalKind::StudentT { dof: 7.0 }
    }
}

impl EllipticalKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EllipticalKind::Normal => Ok(()),
            EllipticalKind::StudentT { dof } if dof > 2.0 && dof.is_finite() => Ok(()),
            EllipticalKind::StudentT { dof } => Err(Error::Config(format!(
                "t degrees of freedom must be finite and > 2, got {dof}"
            ))),
        }
    }

    /// Log density of the standardized variate, given its squared norm
    /// `‖L⁻¹(x − μ)‖²` and `log det Σ`.
    pub fn log_pdf_standardized(&self, dim: usize, maha_sq: f64, log_det: f64) -> f64 {
        match *self {
            EllipticalKind::Normal => normal_log_normalizer(dim) - 0.5 * log_det - 0.5 * maha_sq,
            EllipticalKind::StudentT { dof } => {
                t_log_normalizer(dof, dim)
                    - 0.5 * log_det
                    - 0.5 * (dof + dim as f64) * (maha_sq / dof).ln_1p()
            }
        }
    }

    /// Draws a standardized variate `z` (zero centre, identity shape).
    pub fn sample_standard<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        let mut z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let EllipticalKind::StudentT { dof } = *self {
            let chi2: f64 = ChiSquared::new(dof).expect("dof validated").sample(rng);
            let s = (dof / chi2).sqrt();
            z.iter_mut().for_each(|v| *v *= s);
        }
        z
    }

    /// Draws from the distribution centred at `mu` with shape factor `chol`.
    pub fn sample<R: Rng + ?Sized>(&self, mu: &[f64], chol: &CholeskyFactor, rng: &mut R) -> Vec<f64> {
        let z = self.sample_standard(mu.len(), rng);
        let mut y = chol.mul_lower(&z);
        y.iter_mut().zip(mu).for_each(|(v, m)| *v += m);
        y
    }
}

/// Discovered mode locations with the Hessians of `−log π` at each.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeSet {
    mu: Vec<Vec<f64>>,
    hessians: Vec<SpdMatrix>,
    log_pi: Vec<f64>,
}

impl ModeSet {
    /// `log_pi[i]` is `log π(μ_i)`.
    pub fn new(mu: Vec<Vec<f64>>, hessians: Vec<SpdMatrix>, log_pi: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidData("mode set is empty".into()));
        }
        let d = mu[0].len();
        if d == 0 {
            return Err(Error::InvalidData("modes have dimension 0".into()));
        }
        if hessians.len() != mu.len() || log_pi.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: hessians.len().min(log_pi.len()),
            });
        }
        for (m, h) in mu.iter().zip(&hessians) {
            if m.len() != d || h.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.len().min(h.dim()) });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("mode location is not finite".into()));
            }
        }
        for a in 0..mu.len() {
            for b in (a + 1)..mu.len() {
                if mu[a] == mu[b] {
                    return Err(Error::InvalidData(format!("modes {} and {} coincide", a + 1, b + 1)));
                }
            }
        }
        Ok(Self { mu, hessians, log_pi })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mu[0].len()
    }

    pub fn mu(&self, i: usize) -> &[f64] {
        &self.mu[i]
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.mu
    }

    pub fn hessian(&self, i: usize) -> &SpdMatrix {
        &self.hessians[i]
    }

    pub fn hessians(&self) -> &[SpdMatrix] {
        &self.hessians
    }

    pub fn log_pi(&self) -> &[f64] {
        &self.log_pi
    }

    /// Index of the highest-density mode; ties go to the lowest index.
    pub fn highest(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.log_pi.iter().enumerate() {
            if v > self.log_pi[best] {
                best = i;
            }
        }
        best
    }
}

/// Default jump matrix: `a_ii = 0`, `a_ik = 1/(N−1)`. For `N = 1` the single row is `[1]`.
pub fn default_jump_probs(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0]];
    }
    let off = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| (0..n).map(|k| if i == k { 0.0 } else { off }).collect())
        .collect()
}

/// The parameter `γ`: per-mode shape matrices, mixture weights and jump matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AugmentedParams {
    pub sigma: Vec<SpdMatrix>,
    pub weights: Vec<f64>,
    pub jump_probs: Vec<Vec<f64>>,
    pub q_kind: EllipticalKind,
}

impl AugmentedParams {
    /// Equal weights and the default jump matrix.
    pub fn initial(sigma: Vec<SpdMatrix>, q_kind: EllipticalKind) -> Self {
        let n = sigma.len();
        Self {
            sigma,
            weights: vec![1.0 / n as f64; n],
            jump_probs: default_jump_probs(n),
            q_kind,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let n = self.sigma.len();
        self.q_kind.validate()?;
        if n == 0 || self.weights.len() != n || self.jump_probs.len() != n {
            return Err(Error::Config("parameter lists must have one entry per mode".into()));
        }
        if let Some(s) = self.sigma.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| !(w > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config("weights must be positive and sum to 1".into()));
        }
        for row in &self.jump_probs {
            let s: f64 = row.iter().sum();
            if row.len() != n || row.iter().any(|&a| !(a >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config("each jump-probability row must be a distribution".into()));
            }
        }
        Ok(())
    }
}

/// `log Q(μ, Σ)(x)` for the given family.
pub fn q_log_pdf(kind: EllipticalKind, mu: &[f64], sigma: &SpdMatrix, x: &[f64]) -> f64 {
    let maha = sigma.mahalanobis_sq(x, mu);
    kind.log_pdf_standardized(x.len(), maha, sigma.log_det())
}

/// `log w_j + log Q_j(x)` for every mode.
pub fn log_q_terms(modes: &ModeSet, params: &AugmentedParams, x: &[f64]) -> Vec<f64> {
    (0..modes.len())
        .map(|j| params.weights[j].ln() + q_log_pdf(params.q_kind, modes.mu(j), &params.sigma[j], x))
        .collect()
}

/// `log π̃(x, i)` from a cached `log π(x)` and [`log_q_terms`].
pub fn tilde_from_terms(log_pi: f64, terms: &[f64], i: usize) -> f64 {
    if log_pi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    log_pi + terms[i] - log_sum_exp(terms)
}

/// `log π̃(x, i) = log π(x) + log w_i + log Q_i(x) − log Σ_j w_j Q_j(x)`.
pub fn tilde_pi_log_pdf<T: TargetDensity + ?Sized>(
    target: &T,
    modes: &ModeSet,
    params: &AugmentedParams,
    x: &[f64],
    i: usize,
) -> f64 {
    tilde_from_terms(target.log_pdf(x), &log_q_terms(modes, params, x), i)
}
