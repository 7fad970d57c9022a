use std::time::Instant;

use super::{
    adam_step, gd_step, ngd_step, AdamState, NgdVariant, OptimError, OptimizerConfig, OptimizerKind,
};
use crate::network::{init_params, ParamVector};
use crate::problems::{Objective, ProblemInstance};

/// One logged state of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRow {
    pub iteration: usize,
    pub loss: f64,
    pub rel_l2: f64,
    pub rel_h1: f64,
    /// Accepted step size (line-search optimizers) or learning rate (Adam).
    pub eta_star: f64,
    /// Milliseconds since the start of the run.
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub rows: Vec<TrainRow>,
    pub final_params: ParamVector,
    /// A non-finite loss stopped the run early.
    pub diverged: bool,
    /// Steps where the line search kept the parameters.
    pub stalls: usize,
    pub iterations: usize,
}

impl TrainRecord {
    pub fn last(&self) -> &TrainRow {
        self.rows
            .last()
            .expect("a record always holds the initial state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// When false, every `wall_ms` is written as 0 so traces are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            record_timing: true,
        }
    }
}

/// Trains from `init_params(arch, seed)` with a single optimizer.
pub fn train(
    problem: &ProblemInstance,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<TrainRecord, OptimError> {
    train_chain(
        problem,
        std::slice::from_ref(config),
        seed,
        &TrainOptions::default(),
    )
}

/// Runs the stages one after another from `init_params(arch, seed)`.
/// Iteration numbers continue across stages.
pub fn train_chain(
    problem: &ProblemInstance,
    stages: &[OptimizerConfig],
    seed: u64,
    options: &TrainOptions,
) -> Result<TrainRecord, OptimError> {
    train_from(problem, stages, init_params(problem.arch, seed), options)
}

struct Recorder<'a> {
    problem: &'a ProblemInstance,
    start: Instant,
    timing: bool,
    rows: Vec<TrainRow>,
}

impl Recorder<'_> {
    fn push(
        &mut self,
        iteration: usize,
        loss: f64,
        eta: f64,
        params: &ParamVector,
    ) -> Result<(), OptimError> {
        let (rel_l2, rel_h1) = self.problem.relative_errors(params)?;
        let wall_ms = if self.timing {
            self.start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        self.rows.push(TrainRow {
            iteration,
            loss,
            rel_l2,
            rel_h1,
            eta_star: eta,
            wall_ms,
        });
        Ok(())
    }
}

pub fn train_from(
    problem: &ProblemInstance,
    stages: &[OptimizerConfig],
    params: ParamVector,
    options: &TrainOptions,
) -> Result<TrainRecord, OptimError> {
    for s in stages {
        s.validate()?;
    }
    let mut rec = Recorder {
        problem,
        start: Instant::now(),
        timing: options.record_timing,
        rows: Vec::new(),
    };
    let mut theta = params;
    let initial = problem.loss(&theta);
    if !initial.is_finite() {
        return Err(OptimError::LineSearchDiverged);
    }
    rec.push(0, initial, 0.0, &theta)?;
    let mut it = 0;
    let mut stalls = 0;
    let mut diverged = false;

    'stages: for cfg in stages {
        let n = cfg.iters(problem.kind);
        let every = cfg.log_every();
        let log_now = |k: usize| (k + 1).is_multiple_of(every) || k + 1 == n;
        match cfg.kind {
            OptimizerKind::Engd | OptimizerKind::Hngd | OptimizerKind::Gd => {
                let grid = cfg.line_search_grid()?;
                let variant = if cfg.kind == OptimizerKind::Engd {
                    NgdVariant::Energy
                } else {
                    NgdVariant::Hilbert
                };
                let mut last_index = 0;
                let rconds = cfg.rcond_schedule();
                for k in 0..n {
                    let (next, info) = if cfg.kind == OptimizerKind::Gd {
                        let window = cfg
                            .gd_window
                            .filter(|_| last_index > 0)
                            .map(|r| (last_index, r));
                        gd_step(problem, &theta, &grid, window)?
                    } else {
                        ngd_step(problem, &theta, variant, &rconds, &grid)?
                    };
                    it += 1;
                    if info.stalled {
                        stalls += 1;
                    }
                    if !info.loss.is_finite() {
                        diverged = true;
                        break 'stages;
                    }
                    last_index = info.grid_index;
                    theta = next;
                    if log_now(k) {
                        rec.push(it, info.loss, info.eta, &theta)?;
                    }
                }
            }
            OptimizerKind::Adam => {
                let mut state = AdamState::new(theta.len());
                let (_, mut grad) = problem.loss_and_grad(&theta)?;
                for k in 0..n {
                    let lr = cfg.adam.lr(k);
                    let Some(next) = adam_step(&mut state, &theta, &grad, k, &cfg.adam) else {
                        diverged = true;
                        break 'stages;
                    };
                    let (loss, g) = problem.loss_and_grad(&next)?;
                    it += 1;
                    if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                        diverged = true;
                        break 'stages;
                    }
                    theta = next;
                    grad = g;
                    if log_now(k) {
                        rec.push(it, loss, lr, &theta)?;
                    }
                }
            }
        }
    }
    Ok(TrainRecord {
        rows: rec.rows,
        final_params: theta,
        diverged,
        stalls,
        iterations: it,
    })
}
