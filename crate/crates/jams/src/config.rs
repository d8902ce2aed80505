//! Experiment configuration files.
//!
//! A config is a TOML document. Every key is optional except `target.kind`;
//! missing keys take the defaults for the chosen target. The grammar, with the
//! defaults for `gaussian_mixture`:
//!
//! ```toml
//! seed = 0
//! replications = 20
//! output_dir = "out"          # optional; --out overrides
//!
//! [target]
//! kind = "gaussian_mixture"   # | "banana_t" | "sensor"
//! dim = 10                    # gaussian_mixture and banana_t
//! # data_path = "network.txt" # sensor only, relative to the config file
//!
//! [mode_search]
//! n_starts = 1500
//! start_box = [-2.0, 2.0]     # same interval on every coordinate
//! # bounds = [[-2.0, 2.0], …] # per coordinate; wins over start_box
//! q = 1.0
//! [mode_search.bfgs]
//! max_iters = 200
//!
//! [adaptation]                # shared by burn-in and the main chain
//! alpha = 0.7
//! beta = 1e-4
//! ac2 = 1000
//! alpha_opt = 0.234
//! eps_w_tilde = 0.01
//! air_enabled = false
//! compact_gating = false
//!
//! [burnin]
//! b_acc = 1.1
//! max_rounds = 30
//! first_round_len = 1000
//! q_kind = { family = "student_t", dof = 7.0 }
//! local_kind = { family = "normal" }
//!
//! [run]
//! epsilon = 0.1
//! n_iters = 500000
//! jump_kind = { kind = "gaussian" }  # | { kind = "deterministic", radius = … } | { kind = "t", dof = 7.0 }
//! local_kind = { family = "normal" }
//! record_stride = 1
//! discard = 0
//! # start_mode = 1            # 1-based; default is the highest mode
//!
//! [bench]
//! jump_kinds = [{ kind = "deterministic" }, { kind = "gaussian" }, { kind = "t", dof = 7.0 }]
//! write_samples = false
//! ```
//!
//! `banana_t` changes the defaults to 40000 starts in `[-2, 12]`; `sensor` to
//! 10000 starts in `[0, 1]` and `ac2 = 500`.

use std::path::{Path, PathBuf};

use jams_core::adaptation::AdaptationConfig;
use jams_core::augmented_target::EllipticalKind;
use jams_core::burnin::{BfgsConfig, BurninConfig, ModeSearchConfig};
use jams_core::kernels::JumpKind;
use jams_core::sampler::RunConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    GaussianMixture {
        dim: usize,
    },
    BananaT {
        dim: usize,
    },
    /// Without `data_path` the bundled network is used.
    Sensor {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_path: Option<PathBuf>,
    },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::GaussianMixture { dim } | TargetSpec::BananaT { dim } => *dim,
            TargetSpec::Sensor { .. } => 2 * jams_core::targets::N_UNKNOWN,
        }
    }
}

/// Jump proposal family as written in configs; resolved against the
/// dimension by [`JumpSpec::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSpec {
    /// `radius` defaults to the 0.999 quantile of `χ²_d`.
    Deterministic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Gaussian,
    T {
        #[serde(default = "default_dof")]
        dof: f64,
    },
}

fn default_dof() -> f64 {
    7.0
}

impl JumpSpec {
    pub fn resolve(self, dim: usize) -> JumpKind {
        match self {
            JumpSpec::Deterministic { radius: Some(r) } => JumpKind::Deterministic { radius: r },
            JumpSpec::Deterministic { radius: None } => JumpKind::deterministic(dim),
            JumpSpec::Gaussian => JumpKind::IndependentNormal,
            JumpSpec::T { dof } => JumpKind::IndependentT { dof },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            JumpSpec::Deterministic { .. } => "deterministic",
            JumpSpec::Gaussian => "gaussian",
            JumpSpec::T { .. } => "t",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSearchBlock {
    pub n_starts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_box: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
    pub q: f64,
    pub bfgs: BfgsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurninBlock {
    pub b_acc: f64,
    pub max_rounds: usize,
    pub first_round_len: u64,
    pub q_kind: EllipticalKind,
    pub local_kind: EllipticalKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub epsilon: f64,
    pub n_iters: u64,
    pub jump_kind: JumpSpec,
    pub local_kind: EllipticalKind,
    pub record_stride: u64,
    pub discard: u64,
    /// 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_mode: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchBlock {
    pub jump_kinds: Vec<JumpSpec>,
    /// Bench runs keep samples.csv only when set; 500k rows per chain add up.
    pub write_samples: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub target: TargetSpec,
    pub mode_search: ModeSearchBlock,
    pub adaptation: AdaptationConfig,
    pub burnin: BurninBlock,
    pub run: RunBlock,
    pub bench: BenchBlock,
}

impl ExperimentSpec {
    /// All defaults for a target.
    pub fn defaults_for(target: TargetSpec) -> Self {
        let (n_starts, start_box, ac2) = match target {
            TargetSpec::GaussianMixture { .. } => (1500, (-2.0, 2.0), 1000),
            TargetSpec::BananaT { .. } => (40_000, (-2.0, 12.0), 1000),
            TargetSpec::Sensor { .. } => (10_000, (0.0, 1.0), 500),
        };
        Self {
            seed: 0,
            replications: 20,
            output_dir: None,
            target,
            mode_search: ModeSearchBlock {
                n_starts,
                start_box: Some(start_box),
                bounds: None,
                q: 1.0,
                bfgs: BfgsConfig::default(),
            },
            adaptation: AdaptationConfig { ac2, ..AdaptationConfig::default() },
            burnin: BurninBlock {
                b_acc: 1.1,
                max_rounds: 30,
                first_round_len: 1000,
                q_kind: EllipticalKind::default(),
                local_kind: EllipticalKind::Normal,
            },
            run: RunBlock {
                epsilon: 0.1,
                n_iters: 500_000,
                jump_kind: JumpSpec::Gaussian,
                local_kind: EllipticalKind::Normal,
                record_stride: 1,
                discard: 0,
                start_mode: None,
            },
            bench: BenchBlock {
                jump_kinds: vec![
                    JumpSpec::Deterministic { radius: None },
                    JumpSpec::Gaussian,
                    JumpSpec::T { dof: 7.0 },
                ],
                write_samples: false,
            },
        }
    }

    /// Parses a config, filling missing keys from the target's defaults.
    /// Relative `data_path`s are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, CliError> {
        let user: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        let target_value = user
            .get("target")
            .cloned()
            .ok_or_else(|| CliError::Config("missing [target] block".into()))?;
        let target: TargetSpec = target_value
            .try_into()
            .map_err(|e| CliError::Config(format!("[target]: {e}")))?;
        let mut merged = toml::Table::try_from(Self::defaults_for(target))
            .map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut merged, user);
        let mut spec: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| CliError::Config(format!("{e}")))?;
        if let (TargetSpec::Sensor { data_path: Some(p) }, Some(base)) = (&mut spec.target, base_dir) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        let d = self.target.dim();
        if d == 0 {
            return bad("target dimension must be positive".into());
        }
        if let TargetSpec::Sensor { data_path: Some(p) } = &self.target {
            if !p.is_file() {
                return bad(format!("sensor data file {} does not exist", p.display()));
            }
        }
        if let Some(b) = &self.mode_search.bounds {
            if b.len() != d {
                return bad(format!("mode_search.bounds has {} intervals for dimension {d}", b.len()));
            }
        }
        if self.mode_search.bounds.is_none() && self.mode_search.start_box.is_none() {
            return bad("mode_search needs start_box or bounds".into());
        }
        if self.mode_search.start_bounds(d).iter().any(|&(lo, hi)| !(lo <= hi)) {
            return bad("mode_search bounds need lower <= upper".into());
        }
        if self.bench.jump_kinds.is_empty() {
            return bad("bench.jump_kinds is empty".into());
        }
        if let Some(m) = self.run.start_mode {
            if m == 0 {
                return bad("run.start_mode is 1-based".into());
            }
        }
        self.adaptation.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.run_config(self.run.jump_kind, 0)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn mode_search_config(&self) -> ModeSearchConfig {
        ModeSearchConfig {
            n_starts: self.mode_search.n_starts,
            bounds: self.mode_search.start_bounds(self.target.dim()),
            q: self.mode_search.q,
            bfgs: self.mode_search.bfgs.clone(),
        }
    }

    pub fn burnin_config(&self) -> BurninConfig {
        BurninConfig {
            b_acc: self.burnin.b_acc,
            max_rounds: self.burnin.max_rounds,
            first_round_len: self.burnin.first_round_len,
            q_kind: self.burnin.q_kind,
            local_kind: self.burnin.local_kind,
            adaptation: self.adaptation.clone(),
        }
    }

    pub fn run_config(&self, jump: JumpSpec, seed: u64) -> RunConfig {
        RunConfig {
            epsilon: self.run.epsilon,
            n_iters: self.run.n_iters,
            jump_kind: jump.resolve(self.target.dim()),
            local_kind: self.run.local_kind,
            adaptation: self.adaptation.clone(),
            seed,
            record_stride: self.run.record_stride,
            discard: self.run.discard,
            start_mode: self.run.start_mode.map(|m| m - 1),
        }
    }

    /// Seed of replication `r`.
    pub fn replication_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

impl ModeSearchBlock {
    pub fn start_bounds(&self, dim: usize) -> Vec<(f64, f64)> {
        match (&self.bounds, self.start_box) {
            (Some(b), _) => b.clone(),
            (None, Some(b)) => vec![b; dim],
            (None, None) => Vec::new(),
        }
    }
}

/// Recursively overlays `over` onto `base`; tables merge, anything else replaces.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !is_tagged(b) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Tagged enums (`kind`/`family` tables) are replaced whole, so the old
/// variant's fields do not leak into the new one.
fn is_tagged(t: &toml::Table) -> bool {
    t.contains_key("kind") || t.contains_key("family")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_table_defaults() {
        let s = ExperimentSpec::parse("[target]\nkind = \"sensor\"\n", None).unwrap();
        assert_eq!(s.adaptation.ac2, 500);
        assert_eq!(s.mode_search.n_starts, 10_000);
        assert_eq!(s.run.n_iters, 500_000);
        assert_eq!(s.mode_search_config().bounds, vec![(0.0, 1.0); 16]);
    }

    #[test]
    fn overrides_merge_into_blocks() {
        let text = "seed = 4\n[target]\nkind = \"banana_t\"\ndim = 10\n[run]\nn_iters = 10\njump_kind = { kind = \"t\" }\n[adaptation]\nac2 = 7\n";
        let s = ExperimentSpec::parse(text, None).unwrap();
        assert_eq!(s.run.n_iters, 10);
        assert_eq!(s.run.epsilon, 0.1);
        assert_eq!(s.run.jump_kind, JumpSpec::T { dof: 7.0 });
        assert_eq!(s.adaptation.ac2, 7);
        assert_eq!(s.adaptation.alpha, 0.7);
        assert_eq!(s.replication_seed(3), 7);
    }

    #[test]
    fn round_trip() {
        let mut s = ExperimentSpec::defaults_for(TargetSpec::GaussianMixture { dim: 3 });
        s.mode_search.bounds = Some(vec![(-1.0, 1.0), (0.0, 2.0), (5.0, 5.0)]);
        s.run.start_mode = Some(2);
        s.bench.jump_kinds = vec![JumpSpec::Deterministic { radius: Some(4.5) }];
        let again = ExperimentSpec::parse(&s.to_toml(), None).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "",
            "[target]\nkind = \"torus\"\n",
            "[target]\nkind = \"gaussian_mixture\"\ndim = 2\nreplicatons = 3\n",
            "replications = 0\n[target]\nkind = \"gaussian_mixture\"\ndim = 2\n",
            "[target]\nkind = \"gaussian_mixture\"\ndim = 2\n[run]\nepsilon = 1.5\n",
            "[target]\nkind = \"sensor\"\ndata_path = \"/nonexistent/net.txt\"\n",
        ] {
            assert!(matches!(ExperimentSpec::parse(text, None), Err(CliError::Config(_))), "{text}");
        }
    }
}
