use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::RunnerError;
use crate::optim::{AdamConfig, GridSpec, OptimizerConfig, OptimizerKind};
use crate::problems::{ProblemConfig, ProblemKind};

/// One experiment: a problem, an optimizer (or a chain of optimizers run
/// back to back), the seeds and where the artifacts go.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub discretization: ProblemConfig,
    pub stages: Vec<OptimizerConfig>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// When false, `wall_ms` is written as 0 so traces are byte-reproducible.
    pub record_timing: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOptimizer {
    kind: Option<String>,
    max_iters: Option<usize>,
    rcond: Option<f64>,
    grid: Option<GridSpec>,
    log_every: Option<usize>,
    gd_window: Option<usize>,
    rcond_fallbacks: Option<Vec<f64>>,
    full_search: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    problem: Option<String>,
    seeds: Option<Vec<u64>>,
    out: Option<PathBuf>,
    record_timing: Option<bool>,
    chain: Option<Vec<String>>,
    optimizer: RawOptimizer,
    adam: Option<AdamConfig>,
    discretization: Option<ProblemConfig>,
}

/// Parses `["adam:1000", "engd:500"]` into stages that share the settings of
/// `template` (rcond, grid, Adam schedule, cadence).
pub fn parse_chain(
    chain: &[String],
    template: &OptimizerConfig,
) -> Result<Vec<OptimizerConfig>, RunnerError> {
    chain
        .iter()
        .map(|item| {
            let (kind, iters) = match item.split_once(':') {
                Some((k, n)) => {
                    let n = n.trim().parse().map_err(|_| {
                        RunnerError::Config(format!("bad iteration count in `{item}`"))
                    })?;
                    (k, Some(n))
                }
                None => (item.as_str(), None),
            };
            let kind: OptimizerKind = kind.trim().parse().map_err(RunnerError::Config)?;
            Ok(OptimizerConfig {
                kind,
                max_iters: iters,
                ..template.clone()
            })
        })
        .collect()
}

impl ExperimentConfig {
    pub fn new(problem: ProblemKind, optimizer: OptimizerKind) -> Self {
        Self {
            problem,
            discretization: ProblemConfig::default(),
            stages: vec![OptimizerConfig::new(optimizer)],
            seeds: (0..10).collect(),
            out_dir: PathBuf::from("results"),
            record_timing: true,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RunnerError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))?;
        let problem = match raw.problem {
            Some(p) => p.parse().map_err(RunnerError::Config)?,
            None => ProblemKind::Poisson2D,
        };
        let o = raw.optimizer;
        let kind = match o.kind {
            Some(k) => k.parse().map_err(RunnerError::Config)?,
            None => OptimizerKind::Engd,
        };
        let mut template = OptimizerConfig::new(kind);
        template.max_iters = o.max_iters;
        template.grid = o.grid;
        template.log_every = o.log_every;
        if let Some(r) = o.rcond {
            template.rcond = r;
        }
        if let Some(r) = o.rcond_fallbacks {
            template.rcond_fallbacks = r;
        }
        if o.full_search {
            template.gd_window = None;
        } else if let Some(w) = o.gd_window {
            template.gd_window = Some(w);
        }
        if let Some(a) = raw.adam {
            template.adam = a;
        }
        let stages = match raw.chain {
            Some(chain) => parse_chain(&chain, &template)?,
            None => vec![template],
        };
        let mut cfg = Self {
            problem,
            discretization: raw.discretization.unwrap_or_default(),
            stages,
            ..Self::new(problem, kind)
        };
        if let Some(s) = raw.seeds {
            cfg.seeds = s;
        }
        if let Some(out) = raw.out {
            cfg.out_dir = out;
        }
        if let Some(t) = raw.record_timing {
            cfg.record_timing = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunnerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Replaces the stages by a single `kind` stage that keeps the shared
    /// settings of the first stage.
    pub fn with_optimizer(mut self, kind: OptimizerKind) -> Self {
        let template = self.stages.first().cloned().unwrap_or_default();
        self.stages = vec![OptimizerConfig { kind, ..template }];
        self
    }

    /// Sets the budget of the last stage.
    pub fn with_iters(mut self, iters: usize) -> Self {
        if let Some(last) = self.stages.last_mut() {
            last.max_iters = Some(iters);
        }
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = dir.into();
        self
    }

    pub fn with_timing(mut self, record: bool) -> Self {
        self.record_timing = record;
        self
    }

    /// Stage names joined by `+`, used in file names.
    pub fn label(&self) -> String {
        self.stages
            .iter()
            .map(|s| s.kind.name())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.seeds.is_empty() {
            return Err(RunnerError::Config("seed list is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(d) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(RunnerError::Config(format!("seed {d} listed twice")));
        }
        if self.stages.is_empty() {
            return Err(RunnerError::Config("no optimizer stage".into()));
        }
        for s in &self.stages {
            s.validate()?;
        }
        Ok(())
    }
}
