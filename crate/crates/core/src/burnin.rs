//! Burn-in: random starts, BFGS mode search with KKT filtering, mode merging
//! and the per-mode covariance rounds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use crate::adaptation::{
    parameter_update, update_moments, AdaptationConfig, MatrixBounds, ModeMoments, ParamChange,
};
use crate::augmented_target::{AugmentedParams, EllipticalKind, ModeSet};
use crate::error::{Error, Result};
use crate::kernels::{local_step, KernelContext};
use crate::numerics::{
    dot, fd_gradient, fd_hessian, fd_hessian_from_gradient, is_well_conditioned_pd, norm,
    relative_eigenvalues, Matrix, SpdMatrix, GRADIENT_STEP, HESSIAN_STEP,
};
use crate::rng::{purpose, stream};
use crate::targets::TargetDensity;
use crate::Executor;

/// `n` independent uniform draws from the box `∏ [lo_j, hi_j]`.
pub fn sample_starts<R: Rng + ?Sized>(bounds: &[(f64, f64)], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| if hi > lo { lo + (hi - lo) * rng.random::<f64>() } else { lo })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BfgsConfig {
    pub max_iters: usize,
    /// Sufficient-decrease constant of the Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the Wolfe conditions.
    pub c2: f64,
    /// Iteration stops once the gradient norm drops below `grad_stop · max(1, |f|)`.
    pub grad_stop: f64,
    /// KKT gradient tolerance relative to `max(1, |f|)`.
    pub grad_tol: f64,
    /// Minimum `λ_min / λ_max` of the Hessian at an accepted optimum.
    pub hessian_rel_tol: f64,
    pub max_line_search: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            c1: 1e-4,
            c2: 0.9,
            grad_stop: 1e-10,
            grad_tol: 1e-5,
            hessian_rel_tol: 1e-8,
            max_line_search: 50,
        }
    }
}

/// Outcome of one BFGS run on `f = −log π`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerResult {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// Finite-difference Hessian of `f` at `x_star`, symmetrized.
    pub hessian: Matrix,
    pub grad_norm: f64,
    /// Whether the first- and second-order optimality checks passed.
    pub converged: bool,
    pub iterations: usize,
    /// Target and gradient evaluations, finite-difference probes included.
    pub n_evals: u64,
}

struct Objective<'a, T: ?Sized> {
    target: &'a T,
    evals: Cell<u64>,
    analytic: bool,
}

impl<'a, T: TargetDensity + ?Sized> Objective<'a, T> {
    fn new(target: &'a T, x0: &[f64]) -> Self {
        Self {
            target,
            evals: Cell::new(0),
            analytic: target.grad_log_pdf(x0).is_some(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let v = -self.target.log_pdf(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if self.analytic {
            self.evals.set(self.evals.get() + 1);
            let g: Vec<f64> = self.target.grad_log_pdf(x)?.into_iter().map(|v| -v).collect();
            g.iter().all(|v| v.is_finite()).then_some(g)
        } else {
            fd_gradient(|y| self.value(y), x, GRADIENT_STEP).ok()
        }
    }

    fn hessian(&self, x: &[f64]) -> Result<Matrix> {
        if self.analytic {
            fd_hessian_from_gradient(
                |y| self.gradient(y).unwrap_or_else(|| vec![f64::NAN; y.len()]),
                x,
                HESSIAN_STEP,
            )
        } else {
            fd_hessian(|y| self.value(y), x, HESSIAN_STEP)
        }
    }
}

struct LinePoint {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
}

fn axpy(x: &[f64], a: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(xi, pi)| xi + a * pi).collect()
}

/// Line search satisfying the strong Wolfe conditions.
fn line_search<T: TargetDensity + ?Sized>(
    obj: &Objective<'_, T>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    alpha0: f64,
    cfg: &BfgsConfig,
) -> Option<LinePoint> {
    let d0 = dot(g0, p);
    let armijo = |a: f64, fa: f64| fa.is_finite() && fa <= f0 + cfg.c1 * a * d0;
    let curvature = |da: f64| da.abs() <= -cfg.c2 * d0;

    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, d0);
    let mut a = alpha0;
    let mut bracket = None;
    for it in 0..cfg.max_line_search {
        let xa = axpy(x, a, p);
        let fa = obj.value(&xa);
        if !armijo(a, fa) || (it > 0 && fa >= f_prev) {
            bracket = Some((a_prev, f_prev, d_prev, a, fa));
            break;
        }
        let ga = obj.gradient(&xa)?;
        let da = dot(&ga, p);
        if curvature(da) {
            return Some(LinePoint { alpha: a, f: fa, g: ga });
        }
        if da >= 0.0 {
            bracket = Some((a, fa, da, a_prev, f_prev));
            break;
        }
        a_prev = a;
        f_prev = fa;
        d_prev = da;
        a *= 2.0;
    }
    let (mut lo, mut f_lo, mut d_lo, mut hi, mut f_hi) = bracket?;
    let mut best: Option<LinePoint> = None;
    for _ in 0..cfg.max_line_search {
        let width = hi - lo;
        // quadratic interpolation through (lo, f_lo, d_lo) and (hi, f_hi), safeguarded
        let mut a = if f_hi.is_finite() {
            let denom = 2.0 * (f_hi - f_lo - d_lo * width);
            if denom > 0.0 {
                lo - d_lo * width * width / denom
            } else {
                lo + 0.5 * width
            }
        } else {
            lo + 0.5 * width
        };
        let (a_min, a_max) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let margin = 0.1 * (a_max - a_min);
        a = a.clamp(a_min + margin, a_max - margin);
        let xa = axpy(x, a, p);
        let fa = obj.value(&xa);
        if !armijo(a, fa) || fa >= f_lo {
            hi = a;
            f_hi = fa;
        } else {
            let ga = obj.gradient(&xa)?;
            let da = dot(&ga, p);
            if curvature(da) {
                return Some(LinePoint { alpha: a, f: fa, g: ga });
            }
            if da * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
            }
            lo = a;
            f_lo = fa;
            d_lo = da;
            best = Some(LinePoint { alpha: a, f: fa, g: ga });
        }
        if (hi - lo).abs() <= 1e-14 * lo.abs().max(1e-300) {
            break;
        }
    }
    // fall back to the best sufficient-decrease point found in the bracket
    best
}

/// Minimizes `−log π` from `x0` with BFGS, then applies the KKT filter: the
/// gradient norm must be below `grad_tol · max(1, |f|)` and the finite-difference
/// Hessian positive definite with `λ_min > hessian_rel_tol · λ_max`.
pub fn bfgs_minimize<T: TargetDensity + ?Sized>(target: &T, x0: &[f64], cfg: &BfgsConfig) -> OptimizerResult {
    let n = x0.len();
    let obj = Objective::new(target, x0);
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    let failed = |x: Vec<f64>, f: f64, it: usize, obj: &Objective<'_, T>| OptimizerResult {
        x_star: x,
        f_star: f,
        hessian: Matrix::zeros(n),
        grad_norm: f64::INFINITY,
        converged: false,
        iterations: it,
        n_evals: obj.evals.get(),
    };
    if !f.is_finite() {
        return failed(x, f, 0, &obj);
    }
    let Some(mut g) = obj.gradient(&x) else {
        return failed(x, f, 0, &obj);
    };
    let mut h_inv = Matrix::identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        if norm(&g) < cfg.grad_stop * f.abs().max(1.0) {
            break;
        }
        iterations += 1;
        let mut p: Vec<f64> = h_inv.mul_vec(&g).into_iter().map(|v| -v).collect();
        if dot(&p, &g) >= 0.0 {
            h_inv = Matrix::identity(n);
            fresh = true;
            p = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if fresh { (1.0 / norm(&p)).min(1.0) } else { 1.0 };
        let step = match line_search(&obj, &x, f, &g, &p, alpha0, cfg) {
            Some(s) => s,
            None if !fresh => {
                h_inv = Matrix::identity(n);
                fresh = true;
                continue;
            }
            None => break,
        };
        let s: Vec<f64> = p.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ys = dot(&y, &s);
        if ys > 1e-10 * norm(&y) * norm(&s) {
            if fresh {
                h_inv = Matrix::scaled_identity(n, ys / dot(&y, &y));
            }
            let hy = h_inv.mul_vec(&y);
            let yhy = dot(&y, &hy);
            let c = (ys + yhy) / (ys * ys);
            let data = h_inv.as_mut_slice();
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] += c * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / ys;
                }
            }
            fresh = false;
        }
        let progress = f - step.f;
        x.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        f = step.f;
        g = step.g;
        if progress <= 0.0 && norm(&s) <= 1e-15 * norm(&x).max(1.0) {
            break;
        }
    }
    let grad_norm = norm(&g);
    let first_order = grad_norm < cfg.grad_tol * f.abs().max(1.0);
    let (hessian, second_order) = match obj.hessian(&x) {
        Ok(h) => {
            let ok = is_well_conditioned_pd(&h, cfg.hessian_rel_tol);
            (h, ok)
        }
        Err(_) => (Matrix::zeros(n), false),
    };
    OptimizerResult {
        x_star: x,
        f_star: f,
        hessian,
        grad_norm,
        converged: first_order && second_order,
        iterations,
        n_evals: obj.evals.get(),
    }
}

/// Averaged squared Mahalanobis distance `½[vᵀH_a v + vᵀH_b v]`, `v = a − b`.
pub fn merge_distance(a: &[f64], h_a: &Matrix, b: &[f64], h_b: &Matrix) -> f64 {
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    0.5 * (h_a.quadratic_form(&v) + h_b.quadratic_form(&v))
}

/// Sequential merge of converged optima. A candidate joins the closest existing
/// mode when their averaged squared Mahalanobis distance is below `q`, the
/// higher-density point becoming the representative; otherwise it becomes a
/// new mode. Non-converged candidates are skipped.
pub fn merge_modes(candidates: &[OptimizerResult], q: f64) -> Result<ModeSet> {
    let mut mu: Vec<Vec<f64>> = Vec::new();
    let mut hess: Vec<Matrix> = Vec::new();
    let mut log_pi: Vec<f64> = Vec::new();
    for c in candidates.iter().filter(|c| c.converged) {
        let closest = (0..mu.len())
            .map(|j| (j, merge_distance(&mu[j], &hess[j], &c.x_star, &c.hessian)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match closest {
            Some((j, dist)) if dist < q => {
                if log_pi[j] < -c.f_star {
                    mu[j] = c.x_star.clone();
                    hess[j] = c.hessian.clone();
                    log_pi[j] = -c.f_star;
                }
            }
            _ => {
                mu.push(c.x_star.clone());
                hess.push(c.hessian.clone());
                log_pi.push(-c.f_star);
            }
        }
    }
    if mu.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let hessians = hess.into_iter().map(SpdMatrix::new).collect::<Result<Vec<_>>>()?;
    ModeSet::new(mu, hessians, log_pi)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModeSearchConfig {
    pub n_starts: usize,
    /// Per-coordinate `(lower, upper)` bounds of the start box.
    pub bounds: Vec<(f64, f64)>,
    /// Merge threshold in squared Mahalanobis units.
    pub q: f64,
    pub bfgs: BfgsConfig,
}

impl Default for ModeSearchConfig {
    fn default() -> Self {
        Self {
            n_starts: 1500,
            bounds: Vec::new(),
            q: 1.0,
            bfgs: BfgsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeSearchReport {
    pub modes: ModeSet,
    pub n_converged: usize,
    /// Evaluations spent by each optimizer run, in start order.
    pub evals_per_start: Vec<u64>,
}

/// Draws the starts, runs BFGS from each on the executor and merges the
/// converged optima in start order.
pub fn find_modes<T: TargetDensity + ?Sized, E: Executor>(
    target: &T,
    cfg: &ModeSearchConfig,
    seed: u64,
    exec: &E,
) -> Result<ModeSearchReport> {
    if cfg.bounds.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: cfg.bounds.len(),
        });
    }
    let mut rng = stream(seed, &[purpose::START_POINTS]);
    let starts = sample_starts(&cfg.bounds, cfg.n_starts, &mut rng);
    let results = exec.map(starts, |s| bfgs_minimize(target, &s, &cfg.bfgs));
    let modes = merge_modes(&results, cfg.q)?;
    Ok(ModeSearchReport {
        modes,
        n_converged: results.iter().filter(|r| r.converged).count(),
        evals_per_start: results.iter().map(|r| r.n_evals).collect(),
    })
}

/// `b = d Σ λ_j⁻¹ / (Σ λ_j^{−1/2})²` over the eigenvalues of `prev⁻¹ curr`.
/// Equals 1 exactly when the two matrices are proportional.
pub fn inhomogeneity_factor(prev: &SpdMatrix, curr: &SpdMatrix) -> Result<f64> {
    let lambda = relative_eigenvalues(prev, curr)?;
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NonFiniteValue("relative eigenvalues"));
    }
    let d = lambda.len() as f64;
    let inv: f64 = lambda.iter().map(|l| 1.0 / l).sum();
    let inv_sqrt: f64 = lambda.iter().map(|l| 1.0 / l.sqrt()).sum();
    Ok(d * inv / (inv_sqrt * inv_sqrt))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BurninConfig {
    pub b_acc: f64,
    pub max_rounds: usize,
    /// Length of round 1; round `k` lasts `first_round_len · 2^{k−1}` steps.
    pub first_round_len: u64,
    pub q_kind: EllipticalKind,
    pub local_kind: EllipticalKind,
    pub adaptation: AdaptationConfig,
}

impl Default for BurninConfig {
    fn default() -> Self {
        Self {
            b_acc: 1.1,
            max_rounds: 30,
            first_round_len: 1000,
            q_kind: EllipticalKind::default(),
            local_kind: EllipticalKind::Normal,
            adaptation: AdaptationConfig::default(),
        }
    }
}

/// Everything the main chain needs from burn-in.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BurninReport {
    pub target_name: String,
    pub modes: ModeSet,
    /// Family of the `Q_i` used while building `π̃`.
    pub q_kind: EllipticalKind,
    /// Initial parameter covariances `Σ_{γ₀,i} = Σ_{K,i}`.
    pub sigma0: Vec<SpdMatrix>,
    /// Moments handed to the main chain: `S_i = Σ̃_i = Σ_{K,i}`, the burn-in
    /// mean, and `n_i` equal to the burn-in steps per mode.
    pub moments: Vec<ModeMoments>,
    pub rounds_used: usize,
    /// Rounds that started with every mode past the scaling phase.
    pub covariance_rounds: usize,
    /// `b_{k,i}` for each covariance round `k`, per mode.
    pub inhomogeneity_history: Vec<Vec<f64>>,
    pub steps_per_mode: u64,
    /// Target evaluations spent in the rounds.
    pub eval_budget: u64,
    /// False when the round limit was reached before `max b ≤ b_acc`.
    pub converged: bool,
}

struct ModeChain {
    x: Vec<f64>,
    moments: ModeMoments,
    /// Current published covariance `Σ_{k,i}`.
    sigma: SpdMatrix,
    /// Local proposal covariance.
    proposal: SpdMatrix,
}

#[allow(clippy::too_many_arguments)]
fn run_round<T: TargetDensity + ?Sized>(
    target: &T,
    modes: &ModeSet,
    snapshot: &AugmentedParams,
    cfg: &BurninConfig,
    bounds: &MatrixBounds,
    seed: u64,
    round: usize,
    len: u64,
    i: usize,
    mut chain: ModeChain,
) -> Result<ModeChain> {
    let d = modes.dim();
    let ac1 = cfg.adaptation.ac1_for(d);
    let scale = cfg.adaptation.local_scale_for(d);
    let mut ctx = KernelContext::new(target, modes.clone(), snapshot.clone(), cfg.local_kind)?;
    ctx.set_local_proposal(i, &chain.proposal);
    let mut rng = stream(seed, &[purpose::BURNIN_ROUND, i as u64, round as u64]);
    let mut state = ctx.state(chain.x, i);
    for _ in 0..len {
        let out = local_step(&ctx, &state, &mut rng);
        state = out.next;
        update_moments(&mut chain.moments, &state.x);
        let due = chain.moments.n().is_multiple_of(cfg.adaptation.ac2);
        match parameter_update(&mut chain.moments, Some(out.log_alpha), &cfg.adaptation, ac1, bounds, due)? {
            Some(ParamChange::Scaled(s)) => {
                ctx.set_local_proposal(i, &s);
                chain.proposal = s.clone();
                chain.sigma = s;
            }
            Some(ParamChange::Refreshed(s)) => {
                chain.proposal = s.scaled(scale);
                ctx.set_local_proposal(i, &chain.proposal);
                chain.sigma = s;
            }
            None => {}
        }
    }
    chain.x = state.x;
    Ok(chain)
}

/// Per-mode covariance rounds with jumps switched off and weights `1/N`.
///
/// Every round runs one chain per mode on the executor, each from its previous
/// end point (round 1 starts at `μ_i`). The augmented target is rebuilt from the
/// covariances at the end of each round. Rounds continue until at least one
/// covariance round has run and `max_i b_{k,i} ≤ b_acc`, or `max_rounds` is hit.
pub fn run_burnin<T: TargetDensity + ?Sized, E: Executor>(
    target: &T,
    modes: &ModeSet,
    cfg: &BurninConfig,
    seed: u64,
    exec: &E,
) -> Result<BurninReport> {
    cfg.adaptation.validate()?;
    cfg.q_kind.validate()?;
    cfg.local_kind.validate()?;
    if !(cfg.b_acc >= 1.0) || cfg.max_rounds == 0 || cfg.first_round_len == 0 {
        return Err(Error::Config("burn-in needs b_acc >= 1 and positive round settings".into()));
    }
    if modes.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: modes.dim(),
        });
    }
    let n = modes.len();
    let ac1 = cfg.adaptation.ac1_for(modes.dim());
    let sigma0 = modes
        .hessians()
        .iter()
        .map(|h| h.inverse())
        .collect::<Result<Vec<_>>>()?;
    let bounds = MatrixBounds::new(cfg.adaptation.beta, &sigma0);
    let mut chains: Vec<ModeChain> = (0..n)
        .map(|i| ModeChain {
            x: modes.mu(i).to_vec(),
            moments: ModeMoments::new(sigma0[i].clone()),
            sigma: sigma0[i].clone(),
            proposal: sigma0[i].clone(),
        })
        .collect();
    let mut history = Vec::new();
    let mut steps = 0u64;
    let mut converged = false;
    let mut rounds = 0;
    for round in 1..=cfg.max_rounds {
        rounds = round;
        let covariance_round = chains.iter().all(|c| c.moments.n() >= ac1);
        let snapshot = AugmentedParams::initial(chains.iter().map(|c| c.sigma.clone()).collect(), cfg.q_kind);
        let prev: Vec<SpdMatrix> = snapshot.sigma.clone();
        let len = cfg.first_round_len.saturating_mul(1u64 << (round - 1).min(62));
        let items: Vec<(usize, ModeChain)> = chains.into_iter().enumerate().collect();
        let results = exec.map(items, |(i, chain)| {
            run_round(target, modes, &snapshot, cfg, &bounds, seed, round, len, i, chain)
        });
        chains = results.into_iter().collect::<Result<Vec<_>>>()?;
        steps += len;
        if covariance_round {
            let b = prev
                .iter()
                .zip(&chains)
                .map(|(p, c)| inhomogeneity_factor(p, &c.sigma))
                .collect::<Result<Vec<_>>>()?;
            let worst = b.iter().copied().fold(1.0, f64::max);
            history.push(b);
            if worst <= cfg.b_acc {
                converged = true;
                break;
            }
        }
    }
    let sigma_k: Vec<SpdMatrix> = chains.iter().map(|c| c.sigma.clone()).collect();
    let moments = chains
        .iter()
        .zip(&sigma_k)
        .map(|(c, s)| ModeMoments::from_summary(c.moments.n(), c.moments.mean().to_vec(), s.matrix(), s.clone()))
        .collect();
    Ok(BurninReport {
        target_name: target.name().to_string(),
        modes: modes.clone(),
        q_kind: cfg.q_kind,
        sigma0: sigma_k,
        moments,
        rounds_used: rounds,
        covariance_rounds: history.len(),
        inhomogeneity_history: history,
        steps_per_mode: steps,
        eval_budget: steps * n as u64,
        converged,
    })
}

impl BurninReport {
    pub fn validate_for<T: TargetDensity + ?Sized>(&self, target: &T) -> Result<()> {
        if self.target_name != target.name() {
            return Err(Error::InvalidData(format!(
                "burn-in report is for target '{}', not '{}'",
                self.target_name,
                target.name()
            )));
        }
        if self.modes.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: self.modes.dim(),
            });
        }
        if self.sigma0.len() != self.modes.len() || self.moments.len() != self.modes.len() {
            return Err(Error::InvalidData("burn-in report lists disagree in length".into()));
        }
        Ok(())
    }
}
