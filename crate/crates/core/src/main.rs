use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use engd::network::ParamVector;
use engd::optim::{OptimizerKind, NGD_RCOND};
use engd::problems::{ProblemConfig, ProblemInstance, ProblemKind};
use engd::runner::{
    emit_field_csv, parse_chain, parse_stem, run_experiment, summarize, ExperimentConfig,
    RunnerError,
};

#[derive(Parser)]
#[command(
    name = "engd",
    version,
    about = "Natural gradient training of PINNs and deep Ritz networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one optimizer over several seeds and write traces plus a summary.
    Run {
        #[arg(long)]
        problem: Option<ProblemKind>,
        /// `engd`, `hngd`, `gd`, `adam`, or a chain such as `adam:1000,engd:500`.
        #[arg(long)]
        optimizer: Option<String>,
        #[arg(long)]
        iters: Option<usize>,
        /// A seed count `K` (seeds 0..K) or a comma-separated list.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write 0 in the `wall_ms` column.
        #[arg(long)]
        no_timing: bool,
    },
    /// Recompute summary statistics from the trace CSVs in a directory.
    Summarize { dir: PathBuf },
    /// Sample residual and update directions of a checkpoint on the error grid.
    Fields {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Inferred from the checkpoint file name when omitted.
        #[arg(long)]
        problem: Option<ProblemKind>,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, RunnerError> {
    let bad = || RunnerError::Config(format!("bad seed list `{s}`"));
    if s.contains(',') {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        let k: u64 = s.trim().parse().map_err(|_| bad())?;
        Ok((0..k).collect())
    }
}

fn run(cmd: Command) -> Result<(), RunnerError> {
    match cmd {
        Command::Run {
            problem,
            optimizer,
            iters,
            seeds,
            out,
            config,
            no_timing,
        } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::new(
                    problem.unwrap_or(ProblemKind::Poisson2D),
                    OptimizerKind::Engd,
                ),
            };
            if let Some(p) = problem {
                cfg.problem = p;
            }
            if let Some(o) = optimizer {
                let items: Vec<String> = o.split(',').map(str::to_string).collect();
                if items.len() == 1 && !o.contains(':') {
                    cfg = cfg.with_optimizer(o.parse().map_err(RunnerError::Config)?);
                } else {
                    let template = cfg.stages[0].clone();
                    cfg.stages = parse_chain(&items, &template)?;
                }
            }
            if let Some(n) = iters {
                cfg = cfg.with_iters(n);
            }
            if let Some(s) = seeds {
                cfg = cfg.with_seeds(parse_seeds(&s)?);
            }
            if let Some(dir) = out {
                cfg = cfg.with_out_dir(dir);
            }
            if no_timing {
                cfg = cfg.with_timing(false);
            }
            let result = run_experiment(&cfg)?;
            let s = &result.summary;
            println!(
                "{} {} over {} seeds: L2 median {:e} (min {:e}, max {:e}); H1 median {:e} (min {:e}, max {:e})",
                s.problem, s.optimizer, s.seeds, s.l2.median, s.l2.min, s.l2.max, s.h1.median, s.h1.min, s.h1.max
            );
            println!("summary written to {}", result.summary_path.display());
        }
        Command::Summarize { dir } => {
            for s in summarize(&dir)? {
                println!(
                    "{:<10} {:<12} n={:<3} L2 {:e} [{:e}, {:e}]  H1 {:e} [{:e}, {:e}]",
                    s.problem,
                    s.optimizer,
                    s.seeds,
                    s.l2.median,
                    s.l2.min,
                    s.l2.max,
                    s.h1.median,
                    s.h1.min,
                    s.h1.max
                );
            }
        }
        Command::Fields {
            checkpoint,
            out,
            problem,
        } => {
            let stem = checkpoint
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("fields")
                .to_string();
            let kind = match problem {
                Some(p) => p,
                None => parse_stem(&stem)
                    .and_then(|(p, _, _)| p.parse().ok())
                    .ok_or_else(|| {
                        RunnerError::Config("cannot infer the problem; pass --problem".into())
                    })?,
            };
            let params = ParamVector::load(&checkpoint)?;
            let problem =
                ProblemInstance::with_arch(kind, &ProblemConfig::default(), params.arch())?;
            let report = emit_field_csv(
                &params,
                &problem,
                NGD_RCOND,
                &out,
                &format!("{stem}_fields"),
            )?;
            for c in &report.columns {
                println!(
                    "{:<22} scale {:e} zero {} cosine {:.4}",
                    c.name, c.scale, c.zero, c.cosine_to_reference
                );
            }
            println!("fields written to {}", report.path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
