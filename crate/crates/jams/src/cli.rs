//! Command-line front end.
//!
//! Flags common to every command also read `JAMS_CONFIG`, `JAMS_SEED`,
//! `JAMS_WORKERS` and `JAMS_OUT` from the environment. Exit codes: 0 success,
//! 2 bad configuration or input, 3 numeric abort, 4 some replications failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ExperimentSpec, TargetSpec};
use crate::error::CliError;
use crate::exec::with_workers;
use crate::pipeline::{cmd_bench, cmd_burnin, cmd_find_modes, cmd_sample};

#[derive(Debug, Parser)]
#[command(name = "jams", version, about = "Jumping adaptive multimodal sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multi-start BFGS and mode merging; writes modes.json.
    FindModes(Common),
    /// Per-mode covariance burn-in; writes burnin.json.
    Burnin {
        #[command(flatten)]
        common: Common,
        /// Modes file; defaults to <out>/modes.json.
        #[arg(long)]
        modes: Option<PathBuf>,
    },
    /// Main chains from a burn-in report; writes rep_NN/samples.csv and summary.json.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Burn-in report; defaults to <out>/burnin.json.
        #[arg(long)]
        burnin: Option<PathBuf>,
    },
    /// Full pipeline per replication and every configured jump kind.
    Bench(Common),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum TargetArg {
    GaussianMixture,
    BananaT,
    Sensor,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, env = "JAMS_CONFIG", conflicts_with = "target")]
    config: Option<PathBuf>,
    #[arg(long, env = "JAMS_SEED")]
    seed: Option<u64>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, env = "JAMS_WORKERS")]
    workers: Option<usize>,
    /// Output directory; defaults to the config's output_dir, then `out`.
    #[arg(long, env = "JAMS_OUT")]
    out: Option<PathBuf>,
    /// Built-in target with all defaults, instead of a config.
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    /// Dimension for --target gaussian_mixture or banana_t.
    #[arg(long, requires = "target")]
    dim: Option<usize>,
    /// Sensor data file for --target sensor.
    #[arg(long, requires = "target")]
    data: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    /// Main-chain iterations.
    #[arg(long)]
    iters: Option<u64>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, CliError> {
        let mut spec = match (&self.config, self.target) {
            (Some(p), _) => ExperimentSpec::load(p)?,
            (None, Some(t)) => {
                let dim = self.dim.unwrap_or(10);
                let target = match t {
                    TargetArg::GaussianMixture => TargetSpec::GaussianMixture { dim },
                    TargetArg::BananaT => TargetSpec::BananaT { dim },
                    TargetArg::Sensor => TargetSpec::Sensor { data_path: self.data.clone() },
                };
                ExperimentSpec::defaults_for(target)
            }
            (None, None) => return Err(CliError::Config("pass --config or --target".into())),
        };
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(r) = self.replications {
            spec.replications = r;
        }
        if let Some(n) = self.iters {
            spec.run.n_iters = n;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn out_dir(&self, spec: &ExperimentSpec) -> PathBuf {
        self.out
            .clone()
            .or_else(|| spec.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    let (common, input) = match &cmd {
        Command::FindModes(c) | Command::Bench(c) => (c, None),
        Command::Burnin { common, modes } => (common, modes.clone()),
        Command::Sample { common, burnin } => (common, burnin.clone()),
    };
    let spec = common.spec()?;
    let out = common.out_dir(&spec);
    let input_or = |name: &str| input.clone().unwrap_or_else(|| out.join(name));
    with_workers(common.workers, || match &cmd {
        Command::FindModes(_) => {
            let m = cmd_find_modes(&spec, &out)?;
            println!(
                "{} modes from {} starts ({} converged); evaluations per start min {} mean {:.1} max {}",
                m.search.modes.len(),
                m.n_starts,
                m.search.n_converged,
                m.evals.min,
                m.evals.mean,
                m.evals.max
            );
            report_written(&out.join("modes.json"));
            Ok(())
        }
        Command::Burnin { .. } => {
            let r = cmd_burnin(&spec, &input_or("modes.json"), &out)?;
            println!(
                "{} rounds ({} covariance), {} steps per mode, converged: {}",
                r.rounds_used, r.covariance_rounds, r.steps_per_mode, r.converged
            );
            if !r.converged {
                eprintln!("warning: round limit reached before max b <= {}", spec.burnin.b_acc);
            }
            report_written(&out.join("burnin.json"));
            Ok(())
        }
        Command::Sample { .. } => {
            let s = cmd_sample(&spec, &input_or("burnin.json"), &out)?;
            for r in &s {
                println!(
                    "replication {} (seed {}): jump acceptance {}, occupancy {:?}",
                    r.replication,
                    r.seed,
                    r.acceptance.jump_overall.map_or("-".into(), |v| format!("{v:.4}")),
                    r.occupancy_fraction
                );
            }
            Ok(())
        }
        Command::Bench(_) => cmd_bench(&spec, &out).map(|_| ()),
    })
}

fn report_written(p: &Path) {
    println!("wrote {}", p.display());
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
