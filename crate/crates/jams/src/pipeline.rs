//! The commands: mode search, burn-in, sampling and the replication bench.
//!
//! Replication `r` uses seed `seed + r` for every stage it runs, so outputs
//! do not depend on the number of workers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use jams_core::augmented_target::ModeSet;
use jams_core::burnin::{find_modes, run_burnin, BurninReport, ModeSearchReport};
use jams_core::sampler::{
    acceptance_summary, estimate_mean, rmse, run_chain_with_sink, AcceptanceSummary, NullSink, RunConfig, RunRecord,
};
use jams_core::targets::TargetDensity;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentSpec, JumpSpec};
use crate::error::CliError;
use crate::exec::RayonExecutor;
use crate::experiments::Target;
use crate::formats::{write_json, CsvSampleWriter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub min: u64,
    pub mean: f64,
    pub max: u64,
    pub total: u64,
}

impl EvalStats {
    pub fn of(evals: &[u64]) -> Self {
        let total: u64 = evals.iter().sum();
        Self {
            min: evals.iter().copied().min().unwrap_or(0),
            mean: if evals.is_empty() { 0.0 } else { total as f64 / evals.len() as f64 },
            max: evals.iter().copied().max().unwrap_or(0),
            total,
        }
    }
}

/// Contents of modes.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesFile {
    pub target_name: String,
    pub seed: u64,
    pub n_starts: usize,
    pub evals: EvalStats,
    pub search: ModeSearchReport,
}

impl ModesFile {
    pub fn modes(&self) -> &ModeSet {
        &self.search.modes
    }
}

pub fn search_modes(spec: &ExperimentSpec, target: &Target, seed: u64) -> Result<ModesFile, CliError> {
    let cfg = spec.mode_search_config();
    let search = find_modes(target, &cfg, seed, &RayonExecutor)?;
    Ok(ModesFile {
        target_name: target.name().to_string(),
        seed,
        n_starts: cfg.n_starts,
        evals: EvalStats::of(&search.evals_per_start),
        search,
    })
}

pub fn burn_in(spec: &ExperimentSpec, target: &Target, modes: &ModesFile, seed: u64) -> Result<BurninReport, CliError> {
    if modes.target_name != target.name() || modes.modes().dim() != target.dim() {
        return Err(CliError::Config(format!(
            "modes file is for target '{}' (dimension {}), not '{}' (dimension {})",
            modes.target_name,
            modes.modes().dim(),
            target.name(),
            target.dim()
        )));
    }
    Ok(run_burnin(target, modes.modes(), &spec.burnin_config(), seed, &RayonExecutor)?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub mode_search: u64,
    pub burnin: u64,
    pub main_chain: u64,
}

/// Contents of summary.json. Holds nothing that depends on the machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: usize,
    pub seed: u64,
    pub jump_kind: String,
    pub target_name: String,
    pub dim: usize,
    pub n_modes: usize,
    pub modes: Vec<Vec<f64>>,
    pub n_iters: u64,
    pub n_recorded: u64,
    pub acceptance: AcceptanceSummary,
    pub jump_attempts: Vec<Vec<u64>>,
    pub jump_accepts: Vec<Vec<u64>>,
    pub local_attempts: Vec<u64>,
    pub local_accepts: Vec<u64>,
    pub gated_jumps: u64,
    pub occupancy: Vec<u64>,
    pub occupancy_fraction: Vec<f64>,
    pub mean: Vec<f64>,
    pub rmse: Option<f64>,
    pub rmse_per_sqrt_d: Option<f64>,
    pub evals: EvalCounts,
    pub burnin_steps_per_mode: u64,
    pub param_updates: usize,
    pub outside_compact: u64,
    pub run: RunConfig,
    /// Resolved experiment config, without the output location.
    pub config: ExperimentSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mode_search_s: f64,
    pub burnin_s: f64,
    pub sampling_s: f64,
}

/// Where a replication's files go and which extra counts it carries.
pub struct ReplicationContext<'a> {
    pub spec: &'a ExperimentSpec,
    pub target: &'a Target,
    pub report: &'a BurninReport,
    pub replication: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub write_samples: bool,
    pub mode_search_evals: u64,
    pub timing: Timing,
}

pub fn summarize(ctx: &ReplicationContext<'_>, jump: JumpSpec, run: &RunConfig, rec: &RunRecord) -> ReplicationSummary {
    let d = rec.dim;
    let truth = ctx.target.true_mean();
    let err = truth.as_ref().map(|t| rmse(rec, t));
    let mut config = ctx.spec.clone();
    config.output_dir = None;
    let total = rec.n_recorded.max(1) as f64;
    ReplicationSummary {
        replication: ctx.replication,
        seed: ctx.seed,
        jump_kind: jump.label().to_string(),
        target_name: ctx.target.name().to_string(),
        dim: d,
        n_modes: rec.n_modes,
        modes: ctx.report.modes.locations().to_vec(),
        n_iters: rec.n_iters,
        n_recorded: rec.n_recorded,
        acceptance: acceptance_summary(rec),
        jump_attempts: rec.jump_attempts.clone(),
        jump_accepts: rec.jump_accepts.clone(),
        local_attempts: rec.local_attempts.clone(),
        local_accepts: rec.local_accepts.clone(),
        gated_jumps: rec.gated_jumps,
        occupancy: rec.mode_occupancy.clone(),
        occupancy_fraction: rec.mode_occupancy.iter().map(|&o| o as f64 / total).collect(),
        mean: estimate_mean(rec),
        rmse: err,
        rmse_per_sqrt_d: err.map(|e| e / (d as f64).sqrt()),
        evals: EvalCounts {
            mode_search: ctx.mode_search_evals,
            burnin: ctx.report.eval_budget,
            main_chain: rec.n_target_evals,
        },
        burnin_steps_per_mode: ctx.report.steps_per_mode,
        param_updates: rec.param_events.len(),
        outside_compact: rec.outside_compact,
        run: run.clone(),
        config,
    }
}

/// Runs one main chain and writes summary.json, timing.json and, when asked,
/// samples.csv into `ctx.dir`.
pub fn sample_replication(ctx: &ReplicationContext<'_>, jump: JumpSpec) -> Result<ReplicationSummary, CliError> {
    std::fs::create_dir_all(&ctx.dir).map_err(|e| CliError::io(&ctx.dir, e))?;
    let run = ctx.spec.run_config(jump, ctx.seed);
    let started = Instant::now();
    let rec = if ctx.write_samples {
        let mut w = CsvSampleWriter::create(&ctx.dir.join("samples.csv"), ctx.target.dim())?;
        let rec = run_chain_with_sink(ctx.target, ctx.report, &run, &mut w)?;
        w.finish()?;
        rec
    } else {
        run_chain_with_sink(ctx.target, ctx.report, &run, &mut NullSink)?
    };
    let timing = Timing {
        sampling_s: started.elapsed().as_secs_f64(),
        ..ctx.timing.clone()
    };
    let summary = summarize(ctx, jump, &run, &rec);
    write_json(&ctx.dir.join("summary.json"), &summary)?;
    write_json(&ctx.dir.join("timing.json"), &timing)?;
    Ok(summary)
}

pub fn replication_dir(out: &Path, r: usize) -> PathBuf {
    out.join(format!("rep_{r:02}"))
}

/// `find-modes`: writes modes.json.
pub fn cmd_find_modes(spec: &ExperimentSpec, out: &Path) -> Result<ModesFile, CliError> {
    let target = Target::build(&spec.target)?;
    let modes = search_modes(spec, &target, spec.seed)?;
    create_dir(out)?;
    write_json(&out.join("modes.json"), &modes)?;
    Ok(modes)
}

/// `burnin`: reads a modes file, writes burnin.json.
pub fn cmd_burnin(spec: &ExperimentSpec, modes_path: &Path, out: &Path) -> Result<BurninReport, CliError> {
    let target = Target::build(&spec.target)?;
    let modes: ModesFile = crate::formats::read_json(modes_path)?;
    let report = burn_in(spec, &target, &modes, spec.seed)?;
    create_dir(out)?;
    write_json(&out.join("burnin.json"), &report)?;
    Ok(report)
}

/// `sample`: one chain per replication from a burn-in report, with the
/// configured jump kind. Every replication writes samples.csv.
pub fn cmd_sample(spec: &ExperimentSpec, burnin_path: &Path, out: &Path) -> Result<Vec<ReplicationSummary>, CliError> {
    let target = Target::build(&spec.target)?;
    let report: BurninReport = crate::formats::read_json(burnin_path)?;
    report.validate_for(&target)?;
    let results: Vec<Result<ReplicationSummary, CliError>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let ctx = ReplicationContext {
                spec,
                target: &target,
                report: &report,
                replication: r,
                seed: spec.replication_seed(r),
                dir: replication_dir(out, r),
                write_samples: true,
                mode_search_evals: 0,
                timing: Timing::default(),
            };
            sample_replication(&ctx, spec.run.jump_kind)
        })
        .collect();
    collect_replications(results)
}

fn collect_replications<T>(results: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut first_err = None;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("replication failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        None => Ok(ok),
        Some(e) if total == 1 => Err(e),
        Some(_) => Err(CliError::PartialFailure {
            failed: total - ok.len(),
            total,
        }),
    }
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowHigh {
    pub lowest: f64,
    pub highest: f64,
}

impl LowHigh {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| {
            Some(match acc {
                None => LowHigh { lowest: v, highest: v },
                Some(LowHigh { lowest, highest }) => LowHigh {
                    lowest: lowest.min(v),
                    highest: highest.max(v),
                },
            })
        })
    }
}

/// One row of the Lowest/Highest table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRow {
    pub jump_kind: String,
    pub jump_acceptance: Option<LowHigh>,
    pub rmse_per_sqrt_d: Option<LowHigh>,
    /// Per mode, across replications.
    pub occupancy: Vec<Option<LowHigh>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub seed: u64,
    pub n_modes: Option<usize>,
    pub results: Vec<ReplicationSummary>,
    pub error: Option<String>,
}

/// Contents of bench.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub target_name: String,
    pub replications: usize,
    pub failures: usize,
    pub rows: Vec<KindRow>,
    pub per_replication: Vec<ReplicationOutcome>,
}

fn bench_replication(spec: &ExperimentSpec, target: &Target, out: &Path, r: usize) -> Result<Vec<ReplicationSummary>, CliError> {
    let seed = spec.replication_seed(r);
    let dir = replication_dir(out, r);
    create_dir(&dir)?;
    let t0 = Instant::now();
    let modes = search_modes(spec, target, seed)?;
    let mode_search_s = t0.elapsed().as_secs_f64();
    write_json(&dir.join("modes.json"), &modes)?;
    let t1 = Instant::now();
    let report = burn_in(spec, target, &modes, seed)?;
    let burnin_s = t1.elapsed().as_secs_f64();
    write_json(&dir.join("burnin.json"), &report)?;
    spec.bench
        .jump_kinds
        .iter()
        .map(|&jump| {
            let ctx = ReplicationContext {
                spec,
                target,
                report: &report,
                replication: r,
                seed,
                dir: dir.join(jump.label()),
                write_samples: spec.bench.write_samples,
                mode_search_evals: modes.evals.total,
                timing: Timing { mode_search_s, burnin_s, sampling_s: 0.0 },
            };
            sample_replication(&ctx, jump)
        })
        .collect()
}

/// `bench`: every replication runs mode search, burn-in and one chain per
/// configured jump kind. Writes bench.json, bench.txt and bench_long.csv.
pub fn cmd_bench(spec: &ExperimentSpec, out: &Path) -> Result<BenchReport, CliError> {
    let target = Target::build(&spec.target)?;
    create_dir(out)?;
    let outcomes: Vec<ReplicationOutcome> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let res = bench_replication(spec, &target, out, r);
            let seed = spec.replication_seed(r);
            match res {
                Ok(results) => ReplicationOutcome {
                    replication: r,
                    seed,
                    n_modes: results.first().map(|s| s.n_modes),
                    results,
                    error: None,
                },
                Err(e) => ReplicationOutcome {
                    replication: r,
                    seed,
                    n_modes: None,
                    results: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let report = aggregate(target.name(), spec, outcomes);
    write_json(&out.join("bench.json"), &report)?;
    let table = format_table(&report);
    std::fs::write(out.join("bench.txt"), &table).map_err(|e| CliError::io(&out.join("bench.txt"), e))?;
    let long = long_csv(&report);
    std::fs::write(out.join("bench_long.csv"), long).map_err(|e| CliError::io(&out.join("bench_long.csv"), e))?;
    print!("{table}");
    for o in report.per_replication.iter().filter(|o| o.error.is_some()) {
        eprintln!("replication {} (seed {}) failed: {}", o.replication, o.seed, o.error.as_deref().unwrap_or(""));
    }
    if report.failures > 0 {
        return Err(CliError::PartialFailure {
            failed: report.failures,
            total: report.replications,
        });
    }
    Ok(report)
}

pub fn aggregate(target_name: &str, spec: &ExperimentSpec, outcomes: Vec<ReplicationOutcome>) -> BenchReport {
    let rows = spec
        .bench
        .jump_kinds
        .iter()
        .map(|jump| {
            let label = jump.label();
            let runs: Vec<&ReplicationSummary> = outcomes
                .iter()
                .flat_map(|o| o.results.iter())
                .filter(|s| s.jump_kind == label)
                .collect();
            let n_modes = runs.iter().map(|s| s.n_modes).max().unwrap_or(0);
            KindRow {
                jump_kind: label.to_string(),
                jump_acceptance: LowHigh::of(runs.iter().filter_map(|s| s.acceptance.jump_overall)),
                rmse_per_sqrt_d: LowHigh::of(runs.iter().filter_map(|s| s.rmse_per_sqrt_d)),
                occupancy: (0..n_modes)
                    .map(|i| LowHigh::of(runs.iter().filter_map(|s| s.occupancy_fraction.get(i).copied())))
                    .collect(),
            }
        })
        .collect();
    BenchReport {
        target_name: target_name.to_string(),
        replications: outcomes.len(),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        rows,
        per_replication: outcomes,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Lowest/Highest jump acceptance per jump kind, then rmse/√d and occupancy.
pub fn format_table(report: &BenchReport) -> String {
    let mut s = format!(
        "{}: {} replications ({} failed)\n\n{:<15} {:>8} {:>8}   {:>12} {:>12}\n",
        report.target_name, report.replications, report.failures, "jump kind", "Lowest", "Highest", "rmse/sqrt(d)", "",
    );
    s += &format!("{:<15} {:>8} {:>8}   {:>12} {:>12}\n", "", "", "", "lowest", "highest");
    for row in &report.rows {
        s += &format!(
            "{:<15} {:>8} {:>8}   {:>12} {:>12}\n",
            row.jump_kind,
            cell(row.jump_acceptance.map(|r| r.lowest)),
            cell(row.jump_acceptance.map(|r| r.highest)),
            cell(row.rmse_per_sqrt_d.map(|r| r.lowest)),
            cell(row.rmse_per_sqrt_d.map(|r| r.highest)),
        );
    }
    s += "\noccupancy (lowest..highest per mode)\n";
    for row in &report.rows {
        let cells: Vec<String> = row
            .occupancy
            .iter()
            .map(|o| o.map_or_else(|| "-".into(), |o| format!("{:.3}..{:.3}", o.lowest, o.highest)))
            .collect();
        s += &format!("{:<15} {}\n", row.jump_kind, cells.join(" "));
    }
    s
}

/// `replication,seed,jump_kind,metric,from,to,value`; `from`/`to` are 1-based
/// modes or empty.
pub fn long_csv(report: &BenchReport) -> String {
    let mut s = String::from("replication,seed,jump_kind,metric,from,to,value\n");
    let mut row = |r: &ReplicationSummary, metric: &str, from: Option<usize>, to: Option<usize>, v: f64| {
        let idx = |i: Option<usize>| i.map_or(String::new(), |i| (i + 1).to_string());
        s += &format!("{},{},{},{metric},{},{},{v:?}\n", r.replication, r.seed, r.jump_kind, idx(from), idx(to));
    };
    for o in &report.per_replication {
        for r in &o.results {
            if let Some(v) = r.rmse_per_sqrt_d {
                row(r, "rmse_per_sqrt_d", None, None, v);
            }
            if let Some(v) = r.acceptance.jump_overall {
                row(r, "jump_acceptance", None, None, v);
            }
            for (i, line) in r.acceptance.jump.iter().enumerate() {
                for (k, v) in line.iter().enumerate() {
                    if let Some(v) = v {
                        row(r, "jump_acceptance", Some(i), Some(k), *v);
                    }
                }
            }
            for (i, v) in r.acceptance.local.iter().enumerate() {
                if let Some(v) = v {
                    row(r, "local_acceptance", Some(i), None, *v);
                }
            }
            for (i, v) in r.occupancy_fraction.iter().enumerate() {
                row(r, "occupancy", Some(i), None, *v);
            }
        }
    }
    s
}
