//! Multi-seed experiments, summary statistics and CSV artifacts.

mod config;
mod fields;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::network::NetworkError;
use crate::optim::{train_chain, OptimError, TrainOptions, TrainRecord, TrainRow};
use crate::problems::{ProblemError, ProblemInstance, ProblemKind};

pub use config::{parse_chain, ExperimentConfig};
pub use fields::{emit_field_csv, field_columns, write_field_csv, FieldColumn, FieldReport};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("output directory {path} is not writable: {source}")]
    Unwritable { path: PathBuf, source: io::Error },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed csv {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const TRACE_HEADER: [&str; 6] = [
    "iteration",
    "loss",
    "rel_l2",
    "rel_h1",
    "eta_star",
    "wall_ms",
];
pub const SUMMARY_HEADER: [&str; 9] = [
    "problem",
    "optimizer",
    "seeds",
    "l2_median",
    "l2_min",
    "l2_max",
    "h1_median",
    "h1_min",
    "h1_max",
];

/// Median, minimum and maximum of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// The median of an even-sized sample is the mean of the two middle values.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Some(Self {
            median,
            min: v[0],
            max: v[n - 1],
        })
    }
}

/// Final-error statistics of one (problem, optimizer) group of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub problem: String,
    pub optimizer: String,
    pub seeds: usize,
    pub l2: Stats,
    pub h1: Stats,
}

impl Summary {
    pub fn from_finals(problem: &str, optimizer: &str, finals: &[(f64, f64)]) -> Option<Self> {
        let l2: Vec<f64> = finals.iter().map(|f| f.0).collect();
        let h1: Vec<f64> = finals.iter().map(|f| f.1).collect();
        Some(Self {
            problem: problem.to_string(),
            optimizer: optimizer.to_string(),
            seeds: finals.len(),
            l2: Stats::of(&l2)?,
            h1: Stats::of(&h1)?,
        })
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.problem.clone(),
            self.optimizer.clone(),
            self.seeds.to_string(),
        ];
        for s in [self.l2, self.h1] {
            r.extend([s.median, s.min, s.max].map(fmt_f64));
        }
        r
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub record: TrainRecord,
    pub trace_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<SeedRun>,
    pub summary: Summary,
    pub summary_path: PathBuf,
}

/// Shortest round-trip notation, so equal values always print identically.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn run_stem(problem: ProblemKind, optimizer: &str, seed: u64) -> String {
    format!("{}_{}_seed{}", problem.name(), optimizer, seed)
}

fn ensure_writable(dir: &Path) -> Result<(), RunnerError> {
    let unwritable = |source| RunnerError::Unwritable {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".engd_write_probe");
    fs::write(&probe, b"").map_err(unwritable)?;
    fs::remove_file(&probe).map_err(unwritable)
}

pub fn write_trace(path: &Path, rows: &[TrainRow]) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let rec = [
            r.iteration.to_string(),
            fmt_f64(r.loss),
            fmt_f64(r.rel_l2),
            fmt_f64(r.rel_h1),
            fmt_f64(r.eta_star),
            fmt_f64(r.wall_ms),
        ];
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> RunnerError {
    RunnerError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_summary(path: &Path, summaries: &[Summary]) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(SUMMARY_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for s in summaries {
        w.write_record(s.record()).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Trains every seed (in parallel), writes one trace CSV and parameter
/// checkpoint per seed and the group summary. The output directory is
/// checked before any training starts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, RunnerError> {
    config.validate()?;
    ensure_writable(&config.out_dir)?;
    let problem = ProblemInstance::new(config.problem, &config.discretization)?;
    let label = config.label();
    let options = TrainOptions {
        record_timing: config.record_timing,
    };
    let runs = config
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedRun, RunnerError> {
            let record = train_chain(&problem, &config.stages, seed, &options)?;
            let stem = run_stem(config.problem, &label, seed);
            let trace_path = config.out_dir.join(format!("{stem}.csv"));
            write_trace(&trace_path, &record.rows)?;
            record
                .final_params
                .save(&config.out_dir.join(format!("{stem}.params")))?;
            if record.diverged {
                log::warn!(
                    "{stem}: training diverged after {} iterations",
                    record.iterations
                );
            }
            Ok(SeedRun {
                seed,
                record,
                trace_path,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let finals: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| (r.record.last().rel_l2, r.record.last().rel_h1))
        .collect();
    let summary = Summary::from_finals(config.problem.name(), &label, &finals)
        .ok_or_else(|| RunnerError::Config("no seeds".into()))?;
    let summary_path =
        config
            .out_dir
            .join(format!("{}_{}_summary.csv", config.problem.name(), label));
    write_summary(&summary_path, std::slice::from_ref(&summary))?;
    Ok(ExperimentResult {
        runs,
        summary,
        summary_path,
    })
}

/// Last logged row of a trace CSV.
pub fn read_final_row(path: &Path) -> Result<TrainRow, RunnerError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(RunnerError::Csv {
            path: path.to_path_buf(),
            message: "unexpected header".into(),
        });
    }
    let mut last = None;
    for rec in r.records() {
        last = Some(rec.map_err(|e| csv_err(path, e))?);
    }
    let rec = last.ok_or_else(|| RunnerError::Csv {
        path: path.to_path_buf(),
        message: "no rows".into(),
    })?;
    let num = |i: usize| -> Result<f64, RunnerError> {
        rec[i].parse().map_err(|_| RunnerError::Csv {
            path: path.to_path_buf(),
            message: format!("bad number `{}`", &rec[i]),
        })
    };
    Ok(TrainRow {
        iteration: num(0)? as usize,
        loss: num(1)?,
        rel_l2: num(2)?,
        rel_h1: num(3)?,
        eta_star: num(4)?,
        wall_ms: num(5)?,
    })
}

/// `(problem, optimizer, seed)` parsed from a trace file name.
pub fn parse_stem(stem: &str) -> Option<(String, String, u64)> {
    let (rest, seed) = stem.rsplit_once("_seed")?;
    let seed = seed.parse().ok()?;
    let (problem, optimizer) = rest.split_once('_')?;
    Some((problem.to_string(), optimizer.to_string(), seed))
}

/// Recomputes the summaries of every run group found in `dir` from the trace
/// CSVs alone and writes them to `dir/summary.csv`.
pub fn summarize(dir: &Path) -> Result<Vec<Summary>, RunnerError> {
    let mut traces: Vec<(String, String, u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            if let Some((p, o, s)) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(parse_stem)
            {
                traces.push((p, o, s, path));
            }
        }
    }
    traces.sort();
    let mut summaries = Vec::new();
    for group in traces.chunk_by(|a, b| a.0 == b.0 && a.1 == b.1) {
        let mut finals = Vec::new();
        for (_, _, _, path) in group {
            let row = read_final_row(path)?;
            finals.push((row.rel_l2, row.rel_h1));
        }
        if let Some(s) = Summary::from_finals(&group[0].0, &group[0].1, &finals) {
            summaries.push(s);
        }
    }
    write_summary(&dir.join("summary.csv"), &summaries)?;
    Ok(summaries)
}

#[cfg(test)]
mod tests;
