//! The main chain: alternating local and jump moves with online adaptation,
//! sample recording and acceptance diagnostics.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use crate::adaptation::{
    in_compact_set, parameter_update, update_moments, weight_update, AdaptationConfig, AirSchedule,
    CompactRegions, MatrixBounds, ParamChange,
};
use crate::augmented_target::{AugmentedParams, EllipticalKind};
use crate::burnin::BurninReport;
use crate::error::{Error, Result};
use crate::kernels::{jump_step, local_step, JumpKind, KernelContext, MoveType};
use crate::rng::{purpose, stream};
use crate::targets::TargetDensity;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RunConfig {
    /// Probability of attempting a jump at each iteration.
    pub epsilon: f64,
    pub n_iters: u64,
    pub jump_kind: JumpKind,
    pub local_kind: EllipticalKind,
    pub adaptation: AdaptationConfig,
    pub seed: u64,
    pub record_stride: u64,
    /// Iterations dropped before recording starts.
    pub discard: u64,
    /// Starting mode; the highest-density mode when unset.
    pub start_mode: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            n_iters: 500_000,
            jump_kind: JumpKind::IndependentNormal,
            local_kind: EllipticalKind::Normal,
            adaptation: AdaptationConfig::default(),
            seed: 0,
            record_stride: 1,
            discard: 0,
            start_mode: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config("epsilon must lie in [0, 1)".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        self.jump_kind.validate()?;
        self.local_kind.validate()?;
        self.adaptation.validate()
    }

    /// Number of recorded samples: `⌈(n_iters − discard) / record_stride⌉`.
    pub fn n_recorded(&self) -> u64 {
        self.n_iters.saturating_sub(self.discard).div_ceil(self.record_stride)
    }
}

/// One recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// 1-based iteration index.
    pub iter: u64,
    pub mode: usize,
    pub move_type: MoveType,
    pub accepted: bool,
    pub x: Vec<f64>,
}

/// Receives recorded samples as the chain runs.
pub trait SampleSink {
    fn push(&mut self, sample: &Sample);
}

/// Stores every sample in memory.
#[derive(Debug, Clone, Default)]
pub struct VecSink(pub Vec<Sample>);

impl SampleSink for VecSink {
    fn push(&mut self, sample: &Sample) {
        self.0.push(sample.clone());
    }
}

/// Discards samples; only the running statistics are kept.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl SampleSink for NullSink {
    fn push(&mut self, _: &Sample) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ParamEventKind {
    Scaled,
    Refreshed,
}

/// A mutation of `γ`, for instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamEvent {
    pub iter: u64,
    pub mode: usize,
    pub kind: ParamEventKind,
    /// Moment count of the mode when the update fired.
    pub n_i: u64,
}

/// Counters and running statistics of one chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub dim: usize,
    pub n_modes: usize,
    pub n_iters: u64,
    pub n_recorded: u64,
    /// `jump_attempts[i][k]`: jumps proposed from mode `i` to mode `k`.
    pub jump_attempts: Vec<Vec<u64>>,
    pub jump_accepts: Vec<Vec<u64>>,
    pub local_attempts: Vec<u64>,
    pub local_accepts: Vec<u64>,
    /// Deterministic jump attempts converted into local moves by the region gate.
    pub gated_jumps: u64,
    /// Recorded samples per mode.
    pub mode_occupancy: Vec<u64>,
    /// Sum of recorded points.
    pub sum_x: Vec<f64>,
    pub n_target_evals: u64,
    /// Iterations whose state fell outside its compact set.
    pub outside_compact: u64,
    pub param_events: Vec<ParamEvent>,
    pub final_params: AugmentedParams,
}

fn abort(iteration: u64, mode: usize, e: Error) -> Error {
    Error::ChainAborted {
        iteration,
        mode,
        message: e.to_string(),
    }
}

/// Runs the chain and keeps all samples in memory.
pub fn run_chain<T: TargetDensity + ?Sized>(
    target: &T,
    report: &BurninReport,
    cfg: &RunConfig,
) -> Result<(RunRecord, Vec<Sample>)> {
    let mut sink = VecSink::default();
    let record = run_chain_with_sink(target, report, cfg, &mut sink)?;
    Ok((record, sink.0))
}

/// Runs the main chain from the burn-in output, streaming samples to `sink`.
///
/// Each iteration draws `u`; `u < ε` attempts a jump, otherwise a local move.
/// The new state's point is added to its mode's moments (only inside `A_i`
/// when compact gating is on), then the parameter update runs: the scaling
/// phase below `AC_1` samples, otherwise covariance refreshes (with weight
/// updates) at `AC_2` multiples, or at AIR times when AIR is enabled.
pub fn run_chain_with_sink<T: TargetDensity + ?Sized, S: SampleSink + ?Sized>(
    target: &T,
    report: &BurninReport,
    cfg: &RunConfig,
    sink: &mut S,
) -> Result<RunRecord> {
    cfg.validate()?;
    report.validate_for(target)?;
    let modes = &report.modes;
    let n = modes.len();
    let d = modes.dim();
    let acfg = &cfg.adaptation;
    let ac1 = acfg.ac1_for(d);
    let scale = acfg.local_scale_for(d);
    let eps_w = acfg.eps_w(n);
    if n > 1 {
        weight_update(&vec![0; n], eps_w)?;
    }

    let params = AugmentedParams::initial(report.sigma0.clone(), report.q_kind);
    let mut ctx = KernelContext::new(target, modes.clone(), params, cfg.local_kind)?;
    let mut moments = report.moments.clone();
    for (i, mm) in moments.iter().enumerate() {
        let s = &report.sigma0[i];
        let proposal = if mm.n() < ac1 { s.clone() } else { s.scaled(scale) };
        ctx.set_local_proposal(i, &proposal);
    }
    let bounds = MatrixBounds::new(acfg.beta, &report.sigma0);
    let regions = acfg
        .compact_gating
        .then(|| CompactRegions::new(modes.locations(), &report.sigma0));
    let mut air = acfg
        .air_enabled
        .then(|| AirSchedule::new(acfg, stream(cfg.seed, &[purpose::AIR_SCHEDULE])));
    let mut next_air = air.as_mut().and_then(|a| a.next()).unwrap_or(u64::MAX);

    let start = match cfg.start_mode {
        Some(i) if i < n => i,
        Some(i) => return Err(Error::Config(alloc::format!("start mode {} out of range", i + 1))),
        None => modes.highest(),
    };
    let mut rng = stream(cfg.seed, &[purpose::MAIN_CHAIN]);
    let mut state = ctx.state(modes.mu(start).to_vec(), start);

    let mut rec = RunRecord {
        dim: d,
        n_modes: n,
        n_iters: cfg.n_iters,
        n_recorded: 0,
        jump_attempts: vec![vec![0; n]; n],
        jump_accepts: vec![vec![0; n]; n],
        local_attempts: vec![0; n],
        local_accepts: vec![0; n],
        gated_jumps: 0,
        mode_occupancy: vec![0; n],
        sum_x: vec![0.0; d],
        n_target_evals: 1,
        outside_compact: 0,
        param_events: Vec::new(),
        final_params: ctx.params().clone(),
    };
    // samples attributed to each mode by the main chain, for the weights
    let mut observed = vec![0u64; n];

    for iter in 1..=cfg.n_iters {
        let from = state.mode;
        let jump = rng.random::<f64>() < cfg.epsilon;
        let out = if jump {
            jump_step(&ctx, &state, cfg.jump_kind, &mut rng)
        } else {
            local_step(&ctx, &state, &mut rng)
        };
        rec.n_target_evals += 1;
        match (out.move_type, out.proposed_mode) {
            (MoveType::Jump, Some(k)) => {
                rec.jump_attempts[from][k] += 1;
                rec.jump_accepts[from][k] += out.accepted as u64;
            }
            _ => {
                rec.local_attempts[from] += 1;
                rec.local_accepts[from] += out.accepted as u64;
                rec.gated_jumps += (jump && n > 1) as u64;
            }
        }
        state = out.next;
        let i = state.mode;

        let in_a = regions.as_ref().is_none_or(|r| in_compact_set(r, &state.x, i));
        if in_a {
            update_moments(&mut moments[i], &state.x);
            observed[i] += 1;
            let (attempt, refresh_due) = if air.is_some() {
                let due = iter >= next_air;
                (due, due)
            } else {
                (true, moments[i].n().is_multiple_of(acfg.ac2))
            };
            if attempt {
                if refresh_due {
                    while next_air <= iter {
                        next_air = air.as_mut().and_then(|a| a.next()).unwrap_or(u64::MAX);
                    }
                }
                let local_la = (out.move_type == MoveType::Local).then_some(out.log_alpha);
                let change = parameter_update(&mut moments[i], local_la, acfg, ac1, &bounds, refresh_due)
                    .map_err(|e| abort(iter, i, e))?;
                if let Some(change) = change {
                    let (kind, sigma, proposal) = match change {
                        ParamChange::Scaled(s) => (ParamEventKind::Scaled, s.clone(), s),
                        ParamChange::Refreshed(s) => {
                            let p = s.scaled(scale);
                            (ParamEventKind::Refreshed, s, p)
                        }
                    };
                    ctx.set_sigma(i, sigma);
                    ctx.set_local_proposal(i, &proposal);
                    if kind == ParamEventKind::Refreshed && n > 1 {
                        ctx.set_weights(weight_update(&observed, eps_w).map_err(|e| abort(iter, i, e))?);
                    }
                    ctx.refresh(&mut state);
                    rec.param_events.push(ParamEvent {
                        iter,
                        mode: i,
                        kind,
                        n_i: moments[i].n(),
                    });
                }
            }
        } else {
            rec.outside_compact += 1;
        }

        if iter > cfg.discard && (iter - cfg.discard - 1).is_multiple_of(cfg.record_stride) {
            rec.n_recorded += 1;
            rec.mode_occupancy[i] += 1;
            rec.sum_x.iter_mut().zip(&state.x).for_each(|(s, v)| *s += v);
            sink.push(&Sample {
                iter,
                mode: i,
                move_type: out.move_type,
                accepted: out.accepted,
                x: state.x.clone(),
            });
        }
    }
    rec.final_params = ctx.params().clone();
    Ok(rec)
}

/// Mean of the recorded points.
pub fn estimate_mean(record: &RunRecord) -> Vec<f64> {
    let n = record.n_recorded.max(1) as f64;
    record.sum_x.iter().map(|s| s / n).collect()
}

/// Euclidean distance between the estimated and the true mean.
pub fn rmse(record: &RunRecord, truth: &[f64]) -> f64 {
    estimate_mean(record)
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Acceptance rates; `None` where nothing was attempted.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcceptanceSummary {
    /// `jump[i][k]`: acceptance rate of jumps from `i` to `k`.
    pub jump: Vec<Vec<Option<f64>>>,
    /// Acceptance rate of all jumps leaving each mode.
    pub jump_from: Vec<Option<f64>>,
    pub jump_overall: Option<f64>,
    pub local: Vec<Option<f64>>,
    pub local_overall: Option<f64>,
}

fn rate(accepts: u64, attempts: u64) -> Option<f64> {
    (attempts > 0).then(|| accepts as f64 / attempts as f64)
}

pub fn acceptance_summary(record: &RunRecord) -> AcceptanceSummary {
    let n = record.n_modes;
    let jump = (0..n)
        .map(|i| (0..n).map(|k| rate(record.jump_accepts[i][k], record.jump_attempts[i][k])).collect())
        .collect();
    let row = |m: &Vec<Vec<u64>>, i: usize| m[i].iter().sum::<u64>();
    let jump_from = (0..n)
        .map(|i| rate(row(&record.jump_accepts, i), row(&record.jump_attempts, i)))
        .collect();
    let total = |m: &Vec<Vec<u64>>| m.iter().flatten().sum::<u64>();
    let local = (0..n)
        .map(|i| rate(record.local_accepts[i], record.local_attempts[i]))
        .collect();
    AcceptanceSummary {
        jump,
        jump_from,
        jump_overall: rate(total(&record.jump_accepts), total(&record.jump_attempts)),
        local,
        local_overall: rate(record.local_accepts.iter().sum(), record.local_attempts.iter().sum()),
    }
}
