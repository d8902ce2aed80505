//! Parameter learning: running moments, the scaling phase, covariance
//! refreshes, weight updates, compact-set gating and AIR update times.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{clamp_spectrum, cholesky, distance, symmetric_eigenvalues, Matrix, SpdMatrix};

/// Tunables of the adaptation scheme. `ac1` and `local_scale` default to
/// dimension-dependent values, see [`AdaptationConfig::ac1_for`] and
/// [`AdaptationConfig::local_scale_for`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdaptationConfig {
    pub alpha: f64,
    pub beta: f64,
    pub ac1: Option<u64>,
    pub ac2: u64,
    pub alpha_opt: f64,
    pub eps_w_tilde: f64,
    pub air_enabled: bool,
    pub air_c: f64,
    pub air_kappa: f64,
    pub air_kappa_star: f64,
    pub local_scale: Option<f64>,
    /// Restrict learning to the balls `A_i` around each mode.
    pub compact_gating: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            beta: 1e-4,
            ac1: None,
            ac2: 1000,
            alpha_opt: 0.234,
            eps_w_tilde: 0.01,
            air_enabled: false,
            air_c: 100.0,
            air_kappa: 1.0,
            air_kappa_star: 0.5,
            local_scale: None,
            compact_gating: false,
        }
    }
}

impl AdaptationConfig {
    /// `max(1000, d²/2)` unless set.
    pub fn ac1_for(&self, dim: usize) -> u64 {
        self.ac1.unwrap_or_else(|| 1000.max((dim * dim / 2) as u64))
    }

    /// `2.38²/d` unless set.
    pub fn local_scale_for(&self, dim: usize) -> f64 {
        self.local_scale.unwrap_or(2.38 * 2.38 / dim as f64)
    }

    /// Weight floor `ε̃_w / N`.
    pub fn eps_w(&self, n_modes: usize) -> f64 {
        self.eps_w_tilde / n_modes as f64
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("adaptation: {what}")))
            }
        };
        check(unit(self.alpha), "alpha must lie in (0, 1)")?;
        check(unit(self.alpha_opt), "alpha_opt must lie in (0, 1)")?;
        check(unit(self.eps_w_tilde), "eps_w_tilde must lie in (0, 1)")?;
        check(self.beta > 0.0 && self.beta.is_finite(), "beta must be positive")?;
        check(self.ac1 != Some(0), "ac1 must be at least 1")?;
        check(self.ac2 >= 1, "ac2 must be at least 1")?;
        check(self.air_c > 0.0, "air_c must be positive")?;
        check(
            self.air_kappa_star > 0.0 && self.air_kappa_star < self.air_kappa,
            "need 0 < air_kappa_star < air_kappa",
        )?;
        check(self.local_scale.is_none_or(|s| s > 0.0), "local_scale must be positive")
    }
}

/// Running mean and unbiased covariance of the samples attributed to one
/// mode, plus the scaling-phase matrix `Σ̃`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeMoments {
    n: u64,
    mean: Vec<f64>,
    /// Sum of squared deviations from the running mean.
    m2: Matrix,
    sigma_tilde: SpdMatrix,
}

impl ModeMoments {
    pub fn new(sigma_tilde: SpdMatrix) -> Self {
        let d = sigma_tilde.dim();
        Self {
            n: 0,
            mean: vec![0.0; d],
            m2: Matrix::zeros(d),
            sigma_tilde,
        }
    }

    /// Moments equivalent to `n` samples with the given mean and covariance.
    pub fn from_summary(n: u64, mean: Vec<f64>, covariance: &Matrix, sigma_tilde: SpdMatrix) -> Self {
        let m2 = covariance.scale(n.saturating_sub(1) as f64);
        Self { n, mean, m2, sigma_tilde }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance; the zero matrix below two samples.
    pub fn covariance(&self) -> Matrix {
        if self.n < 2 {
            Matrix::zeros(self.mean.len())
        } else {
            self.m2.scale(1.0 / (self.n - 1) as f64)
        }
    }

    pub fn sigma_tilde(&self) -> &SpdMatrix {
        &self.sigma_tilde
    }

    pub fn set_sigma_tilde(&mut self, s: SpdMatrix) {
        self.sigma_tilde = s;
    }
}

/// Welford update with one more sample.
pub fn update_moments(mm: &mut ModeMoments, x: &[f64]) {
    mm.n += 1;
    let n = mm.n as f64;
    let d = x.len();
    let delta: Vec<f64> = x.iter().zip(&mm.mean).map(|(a, b)| a - b).collect();
    for (m, dl) in mm.mean.iter_mut().zip(&delta) {
        *m += dl / n;
    }
    let c = (n - 1.0) / n;
    if c == 0.0 {
        return;
    }
    let data = mm.m2.as_mut_slice();
    for i in 0..d {
        let di = c * delta[i];
        for j in 0..=i {
            data[i * d + j] += di * delta[j];
        }
    }
    for i in 0..d {
        for j in 0..i {
            data[j * d + i] = data[i * d + j];
        }
    }
}

/// Scaling-phase step after a local move:
/// `Σ̃ ← exp(n^{−α}(e^{log α} − α_opt)) Σ̃`. Returns the new published
/// covariance `Σ̃ + βI`.
pub fn scaling_update(mm: &mut ModeMoments, local_log_alpha: f64, cfg: &AdaptationConfig) -> Result<SpdMatrix> {
    let factor = scaling_factor(mm.n.max(1), local_log_alpha, cfg);
    mm.sigma_tilde = mm.sigma_tilde.scaled(factor);
    SpdMatrix::new(mm.sigma_tilde.matrix().add_diagonal(cfg.beta))
}

/// `exp(n^{−α}(e^{log α} − α_opt))`.
pub fn scaling_factor(n: u64, local_log_alpha: f64, cfg: &AdaptationConfig) -> f64 {
    let acc = local_log_alpha.exp();
    ((n as f64).powf(-cfg.alpha) * (acc - cfg.alpha_opt)).exp()
}

/// A change to the current mode's published covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamChange {
    /// Scaling phase: `Σ = Σ̃ + βI`, used directly as the local proposal.
    Scaled(SpdMatrix),
    /// Covariance phase: `Σ = S + βI`; local proposals use `local_scale · Σ`.
    Refreshed(SpdMatrix),
}

/// The per-iteration parameter update for the mode the chain sits in.
/// `local_log_alpha` is the acceptance log-probability of the move just made
/// when it was local. `refresh_due` says whether a covariance refresh may fire
/// now (an `AC_2` multiple, or an AIR update time).
pub fn parameter_update(
    mm: &mut ModeMoments,
    local_log_alpha: Option<f64>,
    cfg: &AdaptationConfig,
    ac1: u64,
    bounds: &MatrixBounds,
    refresh_due: bool,
) -> Result<Option<ParamChange>> {
    if mm.n < ac1 {
        match local_log_alpha {
            Some(la) => Ok(Some(ParamChange::Scaled(scaling_update(mm, la, cfg)?))),
            None => Ok(None),
        }
    } else if refresh_due {
        Ok(Some(ParamChange::Refreshed(covariance_refresh(mm, cfg, bounds)?)))
    } else {
        Ok(None)
    }
}

/// Spectral bounds `lo·I ⪯ Σ ⪯ hi·I` for every published covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatrixBounds {
    pub lo: f64,
    pub hi: f64,
}

impl MatrixBounds {
    /// `lo = β`, `hi = 10⁶ · λ_M`, with `λ_M` the largest eigenvalue over `sigmas`.
    pub fn new(beta: f64, sigmas: &[SpdMatrix]) -> Self {
        Self {
            lo: beta,
            hi: 1e6 * max_eigenvalue(sigmas),
        }
    }
}

/// Largest eigenvalue over a list of SPD matrices.
pub fn max_eigenvalue(sigmas: &[SpdMatrix]) -> f64 {
    sigmas
        .iter()
        .map(|s| *symmetric_eigenvalues(s.matrix()).last().expect("non-empty"))
        .fold(0.0, f64::max)
}

/// `Σ = S + βI`, projected into the bounds when it violates them.
pub fn covariance_refresh(mm: &ModeMoments, cfg: &AdaptationConfig, bounds: &MatrixBounds) -> Result<SpdMatrix> {
    let m = mm.covariance().add_diagonal(cfg.beta);
    // S ⪰ 0, so S + βI already satisfies the lower bound
    if m.trace() <= bounds.hi && cholesky(&m).is_ok() {
        return SpdMatrix::new(m);
    }
    clamp_spectrum(&m, bounds.lo, bounds.hi)
}

/// `w_i = (n_i + w_add)/(n + N·w_add)` with `w_add = n/(1/ε_w − N)`, written
/// as `ε_w (1 + n_i (1/ε_w − N)/n)` so that empty modes get exactly `ε_w`.
pub fn weight_update(counts: &[u64], eps_w: f64) -> Result<Vec<f64>> {
    let big_n = counts.len();
    if big_n == 0 {
        return Err(Error::Config("weight update needs at least one mode".into()));
    }
    if !(eps_w > 0.0) || eps_w * big_n as f64 >= 1.0 {
        return Err(Error::Config(format!(
            "weight floor {eps_w} must be positive with eps_w * N < 1 (N = {big_n})"
        )));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Ok(vec![1.0 / big_n as f64; big_n]);
    }
    let slope = (1.0 / eps_w - big_n as f64) / n as f64;
    Ok(counts.iter().map(|&c| eps_w * (1.0 + c as f64 * slope)).collect())
}

/// Closed Euclidean balls `A_i` of common radius `2 D_C + 100 √(d λ_M)`
/// around the modes, where `D_C` is the diameter of the modes' convex hull.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompactRegions {
    pub centers: Vec<Vec<f64>>,
    pub radius: Vec<f64>,
}

impl CompactRegions {
    pub fn new(centers: &[Vec<f64>], sigmas: &[SpdMatrix]) -> Self {
        let d = centers[0].len() as f64;
        // the hull's diameter is attained between two of its vertices
        let mut diameter: f64 = 0.0;
        for a in 0..centers.len() {
            for b in (a + 1)..centers.len() {
                diameter = diameter.max(distance(&centers[a], &centers[b]));
            }
        }
        let r = 2.0 * diameter + 100.0 * (d * max_eigenvalue(sigmas)).sqrt();
        Self {
            centers: centers.to_vec(),
            radius: vec![r; centers.len()],
        }
    }
}

pub fn in_compact_set(regions: &CompactRegions, x: &[f64], i: usize) -> bool {
    distance(x, &regions.centers[i]) <= regions.radius[i]
}

/// Increasingly rare update times `N*_j = Σ_{k≤j} (⌈c k^κ⌉ + U_k)` with
/// `U_k` uniform on `{0, …, ⌊k^{κ*}⌋}`.
#[derive(Debug, Clone)]
pub struct AirSchedule<R> {
    rng: R,
    c: f64,
    kappa: f64,
    kappa_star: f64,
    k: u64,
    total: u64,
}

impl<R: Rng> AirSchedule<R> {
    pub fn new(cfg: &AdaptationConfig, rng: R) -> Self {
        Self {
            rng,
            c: cfg.air_c,
            kappa: cfg.air_kappa,
            kappa_star: cfg.air_kappa_star,
            k: 0,
            total: 0,
        }
    }

    /// Un-jittered lag `n_k = ⌈c k^κ⌉`.
    pub fn base_lag(&self, k: u64) -> u64 {
        (self.c * (k as f64).powf(self.kappa)).ceil() as u64
    }

    /// Jitter bound `⌊k^{κ*}⌋`.
    pub fn max_jitter(&self, k: u64) -> u64 {
        (k as f64).powf(self.kappa_star).floor() as u64
    }
}

impl<R: Rng> Iterator for AirSchedule<R> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        self.k += 1;
        let jitter = self.rng.random_range(0..=self.max_jitter(self.k));
        self.total += self.base_lag(self.k) + jitter;
        Some(self.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        let mut mm = ModeMoments::new(SpdMatrix::identity(2));
        update_moments(&mut mm, &[1.0, 2.0]);
        assert_eq!(mm.n(), 1);
        assert_eq!(mm.mean(), &[1.0, 2.0]);
        assert_eq!(mm.covariance(), Matrix::zeros(2));
        update_moments(&mut mm, &[3.0, 0.0]);
        let expected = Matrix::outer(&[-2.0, 2.0], &[-2.0, 2.0]).scale(0.5);
        assert!(mm.covariance().sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn scaling_factors() {
        let cfg = AdaptationConfig::default();
        assert_eq!(scaling_factor(50, cfg.alpha_opt.ln(), &cfg), 1.0);
        let f = scaling_factor(100, 0.5f64.ln(), &cfg);
        assert!((f - (0.266 * 100f64.powf(-0.7)).exp()).abs() < 1e-15);
        assert!((f - 1.01065).abs() < 1e-5);
        assert!((scaling_factor(1, 0.0, &cfg) - 0.766f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_refresh_yields_beta() {
        let cfg = AdaptationConfig::default();
        let mm = ModeMoments::new(SpdMatrix::identity(3));
        let bounds = MatrixBounds { lo: cfg.beta, hi: 1e6 };
        let s = covariance_refresh(&mm, &cfg, &bounds).unwrap();
        assert_eq!(s.matrix(), &Matrix::scaled_identity(3, 1e-4));
    }

    #[test]
    fn weights() {
        assert_eq!(weight_update(&[0, 0, 0], 0.01).unwrap(), vec![1.0 / 3.0; 3]);
        let w = weight_update(&[1000, 0], 0.005).unwrap();
        assert_eq!(w[1], 0.005);
        assert!((w[0] - 0.995).abs() < 1e-15);
        let w = weight_update(&[10, 20, 70], 0.01).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] < w[1] && w[1] < w[2]);
        assert!(weight_update(&[1, 1], 0.5).is_err());
    }

    #[test]
    fn compact_set_membership() {
        let centers = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        let r = CompactRegions::new(&centers, &[SpdMatrix::identity(2), SpdMatrix::identity(2)]);
        let radius = 10.0 + 100.0 * 2f64.sqrt();
        assert!((r.radius[0] - radius).abs() < 1e-12);
        assert!(in_compact_set(&r, &[0.0, 0.0], 0));
        assert!(in_compact_set(&r, &[r.radius[0], 0.0], 0));
        assert!(!in_compact_set(&r, &[r.radius[0] + 1.0, 0.0], 0));
    }

    #[test]
    fn air_partial_sums() {
        let cfg = AdaptationConfig::default();
        let s = AirSchedule::new(&cfg, crate::rng::stream(3, &[]));
        let times: Vec<u64> = s.take(20).collect();
        for (j, &t) in times.iter().enumerate() {
            let j = (j + 1) as f64;
            let base = 50.0 * j * (j + 1.0);
            assert!(t as f64 >= base && t as f64 <= base + j * j.sqrt());
        }
    }
}
