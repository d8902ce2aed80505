//! Metropolis–Hastings kernels on the augmented space: the local random-walk
//! move and the three jump flavors.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use crate::augmented_target::{
    log_q_terms, q_log_pdf, tilde_from_terms, AugmentedParams, EllipticalKind, ModeSet,
};
use crate::error::{Error, Result};
use crate::numerics::special::chi_squared_quantile;
use crate::numerics::{CholeskyFactor, SpdMatrix};
use crate::targets::TargetDensity;

/// How a jump proposal is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum JumpKind {
    /// Mahalanobis-preserving affine map between modes. Allowed only when the
    /// squared Mahalanobis distance of `x` to its mode is at most `radius`.
    Deterministic { radius: f64 },
    IndependentNormal,
    IndependentT { dof: f64 },
}

impl JumpKind {
    /// Deterministic jumps gated at the 0.999 quantile of `χ²_d`.
    pub fn deterministic(dim: usize) -> Self {
        JumpKind::Deterministic {
            radius: default_jump_radius(dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpKind::Deterministic { radius } if !(radius > 0.0) => {
                Err(Error::Config("deterministic jump radius must be positive".into()))
            }
            JumpKind::IndependentT { dof } => EllipticalKind::StudentT { dof }.validate(),
            _ => Ok(()),
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            JumpKind::Deterministic { .. } => "deterministic",
            JumpKind::IndependentNormal => "gaussian",
            JumpKind::IndependentT { .. } => "t",
        }
    }

    fn proposal_family(&self) -> Option<EllipticalKind> {
        match *self {
            JumpKind::Deterministic { .. } => None,
            JumpKind::IndependentNormal => Some(EllipticalKind::Normal),
            JumpKind::IndependentT { dof } => Some(EllipticalKind::StudentT { dof }),
        }
    }
}

/// `χ²_d` quantile at 0.999, in squared Mahalanobis units.
pub fn default_jump_radius(dim: usize) -> f64 {
    chi_squared_quantile(0.999, dim as f64)
}

/// Augmented state `(x, i)` together with cached `log π(x)` and `log π̃(x, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub mode: usize,
    pub log_pi: f64,
    pub log_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MoveType {
    Local,
    Jump,
}

impl MoveType {
    pub fn label(&self) -> &'static str {
        match self {
            MoveType::Local => "local",
            MoveType::Jump => "jump",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveOutcome {
    pub next: ChainState,
    pub accepted: bool,
    pub move_type: MoveType,
    /// Target mode of a jump proposal.
    pub proposed_mode: Option<usize>,
    pub log_alpha: f64,
}

/// Everything a kernel reads: the target, the modes, the current parameter
/// `γ` and the per-mode local proposal factors.
pub struct KernelContext<'t, T: ?Sized> {
    target: &'t T,
    modes: ModeSet,
    params: AugmentedParams,
    local_kind: EllipticalKind,
    local_factors: Vec<CholeskyFactor>,
}

impl<'t, T: TargetDensity + ?Sized> KernelContext<'t, T> {
    /// Local proposals start as `Σ_i` itself; use [`Self::set_local_proposal`] to rescale.
    pub fn new(
        target: &'t T,
        modes: ModeSet,
        params: AugmentedParams,
        local_kind: EllipticalKind,
    ) -> Result<Self> {
        if modes.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: modes.dim(),
            });
        }
        if params.n_modes() != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                got: params.n_modes(),
            });
        }
        params.validate(modes.dim())?;
        local_kind.validate()?;
        let local_factors = params.sigma.iter().map(|s| s.cholesky().clone()).collect();
        Ok(Self {
            target,
            modes,
            params,
            local_kind,
            local_factors,
        })
    }

    pub fn target(&self) -> &'t T {
        self.target
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn params(&self) -> &AugmentedParams {
        &self.params
    }

    pub fn local_kind(&self) -> EllipticalKind {
        self.local_kind
    }

    pub fn dim(&self) -> usize {
        self.modes.dim()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn set_sigma(&mut self, i: usize, sigma: SpdMatrix) {
        self.params.sigma[i] = sigma;
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) {
        self.params.weights = weights;
    }

    /// Sets the covariance of the local proposal at mode `i`.
    pub fn set_local_proposal(&mut self, i: usize, cov: &SpdMatrix) {
        self.local_factors[i] = cov.cholesky().clone();
    }

    pub fn local_factor(&self, i: usize) -> &CholeskyFactor {
        &self.local_factors[i]
    }

    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let lp = self.target.log_pdf(x);
        let lp = if lp.is_nan() { f64::NEG_INFINITY } else { lp };
        (lp, log_q_terms(&self.modes, &self.params, x))
    }

    /// `log π̃(x, i)`.
    pub fn log_tilde(&self, x: &[f64], i: usize) -> f64 {
        let (lp, terms) = self.eval(x);
        tilde_from_terms(lp, &terms, i)
    }

    /// Builds a state, evaluating the target once.
    pub fn state(&self, x: Vec<f64>, mode: usize) -> ChainState {
        let (log_pi, terms) = self.eval(&x);
        let log_tilde = tilde_from_terms(log_pi, &terms, mode);
        ChainState { x, mode, log_pi, log_tilde }
    }

    /// Recomputes `log π̃` after `γ` changed; `log π` is reused.
    pub fn refresh(&self, state: &mut ChainState) {
        let terms = log_q_terms(&self.modes, &self.params, &state.x);
        state.log_tilde = tilde_from_terms(state.log_pi, &terms, state.mode);
    }
}

fn log_ratio(num: f64, den: f64) -> f64 {
    if num == f64::NEG_INFINITY || num.is_nan() {
        f64::NEG_INFINITY
    } else {
        num - den
    }
}

fn clamp_log_alpha(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v.min(0.0)
    }
}

/// `min(0, log π̃(y, i) − log π̃(x, i))`.
pub fn local_log_acceptance<T: TargetDensity + ?Sized>(
    ctx: &KernelContext<'_, T>,
    x: &[f64],
    i: usize,
    y: &[f64],
) -> f64 {
    clamp_log_alpha(log_ratio(ctx.log_tilde(y, i), ctx.log_tilde(x, i)))
}

/// Local move from a supplied standardized noise vector `z` and `log u`.
pub fn local_step_with_noise<T: TargetDensity + ?Sized>(
    ctx: &KernelContext<'_, T>,
    state: &ChainState,
    z: &[f64],
    log_u: f64,
) -> MoveOutcome {
    let step = ctx.local_factors[state.mode].mul_lower(z);
    let y: Vec<f64> = state.x.iter().zip(&step).map(|(a, b)| a + b).collect();
    let proposal = ctx.state(y, state.mode);
    let log_alpha = clamp_log_alpha(log_ratio(proposal.log_tilde, state.log_tilde));
    let accepted = log_u < log_alpha;
    MoveOutcome {
        next: if accepted { proposal } else { state.clone() },
        accepted,
        move_type: MoveType::Local,
        proposed_mode: None,
        log_alpha,
    }
}

/// One local random-walk Metropolis step; the mode label never changes.
pub fn local_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    ctx: &KernelContext<'_, T>,
    state: &ChainState,
    rng: &mut R,
) -> MoveOutcome {
    let z = ctx.local_kind.sample_standard(ctx.dim(), rng);
    let log_u = rng.random::<f64>().ln();
    local_step_with_noise(ctx, state, &z, log_u)
}

/// `y = μ_k + Λ_k Λ_i⁻¹ (x − μ_i)`.
pub fn deterministic_jump_map(
    modes: &ModeSet,
    params: &AugmentedParams,
    x: &[f64],
    i: usize,
    k: usize,
) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().zip(modes.mu(i)).map(|(a, b)| a - b).collect();
    params.sigma[i].cholesky().solve_lower_in_place(&mut v);
    let mut y = params.sigma[k].cholesky().mul_lower(&v);
    y.iter_mut().zip(modes.mu(k)).for_each(|(a, b)| *a += b);
    y
}

fn deterministic_log_alpha_from<T: TargetDensity + ?Sized>(
    ctx: &KernelContext<'_, T>,
    log_tilde_x: f64,
    i: usize,
    log_tilde_y: f64,
    k: usize,
) -> f64 {
    let p = &ctx.params;
    let v = log_ratio(log_tilde_y, log_tilde_x) + p.jump_probs[k][i].ln() - p.jump_probs[i][k].ln()
        + 0.5 * (p.sigma[k].log_det() - p.sigma[i].log_det());
    clamp_log_alpha(v)
}

/// `min(0, Δ log π̃ + log a_ki − log a_ik + ½ log det Σ_k − ½ log det Σ_i)`.
pub fn deterministic_jump_log_acceptance<T: TargetDensity + ?Sized>(
    ctx: &KernelContext<'_, T>,
    x: &[f64],
    i: usize,
    y: &[f64],
    k: usize,
) -> f64 {
    deterministic_log_alpha_from(ctx, ctx.log_tilde(x, i), i, ctx.log_tilde(y, k), k)
}

fn independent_family(kind: JumpKind) -> EllipticalKind {
    kind.proposal_family()
        .expect("independent jump kinds have a proposal family")
}

/// Draws `y` around `μ_k` with shape `Σ_k` from the jump kind's family.
pub fn independent_jump_propose<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    ctx: &KernelContext<'_, T>,
    kind: JumpKind,
    k: usize,
    rng: &mut R,
) -> Vec<f64> {
    independent_family(kind).sample(ctx.modes.mu(k), ctx.params.sigma[k].cholesky(), rng)
}

/// Log density `log R_k(y)` of the independent jump proposal at mode `k`.
pub fn independent_proposal_log_pdf<T: TargetDensity + ?Sized>(
    ctx: &KernelContext<'_, T>,
    kind: JumpKind,
    k: usize,
    y: &[f64],
) -> f64 {
    q_log_pdf(independent_family(kind), ctx.modes.mu(k), &ctx.params.sigma[k], y)
}

#[allow(clippy::too_many_arguments)]
fn independent_log_alpha_from<T: TargetDensity + ?Sized>(
    ctx: &KernelContext<'_, T>,
    kind: JumpKind,
    x: &[f64],
    log_tilde_x: f64,
    i: usize,
    y: &[f64],
    log_tilde_y: f64,
    k: usize,
) -> f64 {
    let p = &ctx.params;
    let v = log_ratio(log_tilde_y, log_tilde_x) + p.jump_probs[k][i].ln()
        + independent_proposal_log_pdf(ctx, kind, i, x)
        - p.jump_probs[i][k].ln()
        - independent_proposal_log_pdf(ctx, kind, k, y);
    clamp_log_alpha(v)
}

/// `min(0, Δ log π̃ + log a_ki + log R_i(x) − log a_ik − log R_k(y))`.
pub fn independent_jump_log_acceptance<T: TargetDensity + ?Sized>(
    ctx: &KernelContext<'_, T>,
    kind: JumpKind,
    x: &[f64],
    i: usize,
    y: &[f64],
    k: usize,
) -> f64 {
    independent_log_alpha_from(ctx, kind, x, ctx.log_tilde(x, i), i, y, ctx.log_tilde(y, k), k)
}

fn sample_target_mode<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &a) in row.iter().enumerate() {
        if a > 0.0 {
            acc += a;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// One jump move. With a single mode, or a deterministic jump attempted
/// outside the jumping region, exactly one local move is executed instead and
/// reported as [`MoveType::Local`].
pub fn jump_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    ctx: &KernelContext<'_, T>,
    state: &ChainState,
    kind: JumpKind,
    rng: &mut R,
) -> MoveOutcome {
    let i = state.mode;
    if ctx.n_modes() < 2 {
        return local_step(ctx, state, rng);
    }
    if let JumpKind::Deterministic { radius } = kind {
        if ctx.params.sigma[i].mahalanobis_sq(&state.x, ctx.modes.mu(i)) > radius {
            return local_step(ctx, state, rng);
        }
    }
    let k = sample_target_mode(&ctx.params.jump_probs[i], rng);
    let (y, log_alpha) = match kind {
        JumpKind::Deterministic { .. } => {
            let y = deterministic_jump_map(&ctx.modes, &ctx.params, &state.x, i, k);
            let proposal = ctx.state(y, k);
            let la = deterministic_log_alpha_from(ctx, state.log_tilde, i, proposal.log_tilde, k);
            (proposal, la)
        }
        _ => {
            let y = independent_jump_propose(ctx, kind, k, rng);
            let proposal = ctx.state(y, k);
            let la = independent_log_alpha_from(
                ctx,
                kind,
                &state.x,
                state.log_tilde,
                i,
                &proposal.x,
                proposal.log_tilde,
                k,
            );
            (proposal, la)
        }
    };
    let accepted = rng.random::<f64>().ln() < log_alpha;
    MoveOutcome {
        next: if accepted { y } else { state.clone() },
        accepted,
        move_type: MoveType::Jump,
        proposed_mode: Some(k),
        log_alpha,
    }
}
