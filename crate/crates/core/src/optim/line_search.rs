use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::network::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    UnitInterval,
    Extended,
}

/// Log-spaced grid `{lo · (hi/lo)^{k/(n−1)}}` plus the point 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchGrid {
    etas: Vec<f64>,
    scale: GridScale,
}

impl LineSearchGrid {
    /// Grid for natural-gradient steps: 0 and 40 points in `[1e-12, 1]`.
    pub fn unit_interval() -> Self {
        Self::from_spec(GridSpec {
            lo: 1e-12,
            hi: 1.0,
            n: 40,
        })
        .expect("valid default grid")
    }

    /// Grid for plain gradient steps: 0 and 50 points in `[1e-8, 10]`.
    pub fn extended() -> Self {
        Self::from_spec(GridSpec {
            lo: 1e-8,
            hi: 10.0,
            n: 50,
        })
        .expect("valid default grid")
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self, OptimError> {
        let GridSpec { lo, hi, n } = spec;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 || (n == 1 && lo != hi) {
            return Err(OptimError::InvalidConfig(format!(
                "line-search grid {lo}..{hi} with {n} points"
            )));
        }
        let mut etas = vec![0.0];
        if n == 1 {
            etas.push(lo);
        } else {
            let (a, b) = (lo.ln(), hi.ln());
            etas.extend((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()));
            etas[n] = hi;
            etas[1] = lo;
        }
        let scale = if hi <= 1.0 {
            GridScale::UnitInterval
        } else {
            GridScale::Extended
        };
        Ok(Self { etas, scale })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn scale(&self) -> GridScale {
        self.scale
    }

    pub fn max_eta(&self) -> f64 {
        *self.etas.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub eta: f64,
    pub loss: f64,
    /// Index of `eta` in the grid.
    pub index: usize,
    pub evaluations: usize,
}

/// Exhaustive search over `grid` for `θ − η·direction`.
pub fn line_search<F>(
    loss: F,
    theta: &ParamVector,
    direction: &[f64],
    grid: &LineSearchGrid,
) -> Result<(f64, f64), OptimError>
where
    F: FnMut(&ParamVector) -> f64,
{
    let out = search(loss, theta, direction, grid, None, None)?;
    Ok((out.eta, out.loss))
}

/// Line search with an optionally known loss at `η = 0` and an optional local
/// window `(center, radius)` of grid indices. A local search widens its
/// window while the minimum sits on a window edge, so it returns a local
/// minimiser over the grid.
pub fn search<F>(
    mut loss: F,
    theta: &ParamVector,
    direction: &[f64],
    grid: &LineSearchGrid,
    base_loss: Option<f64>,
    window: Option<(usize, usize)>,
) -> Result<LineSearchOutcome, OptimError>
where
    F: FnMut(&ParamVector) -> f64,
{
    if direction.iter().any(|d| !d.is_finite()) {
        return Err(OptimError::NonFiniteDirection);
    }
    let etas = &grid.etas;
    let last = etas.len() - 1;
    let mut values = vec![None; etas.len()];
    let mut evaluations = 0;
    let mut eval = |k: usize, values: &mut Vec<Option<f64>>| -> f64 {
        if let Some(v) = values[k] {
            return v;
        }
        let v = match (k, base_loss) {
            (0, Some(b)) => b,
            _ => {
                evaluations += 1;
                theta
                    .stepped(direction, etas[k])
                    .map(|t| loss(&t))
                    .unwrap_or(f64::NAN)
            }
        };
        let v = if v.is_finite() { v } else { f64::INFINITY };
        values[k] = Some(v);
        v
    };
    let better = |v: f64, k: usize, best: (f64, usize)| v < best.0 || (v == best.0 && k > best.1);

    let mut best = (eval(0, &mut values), 0);
    match window {
        None => {
            for k in 1..=last {
                let v = eval(k, &mut values);
                if better(v, k, best) {
                    best = (v, k);
                }
            }
        }
        Some((center, radius)) => {
            let center = center.clamp(1, last);
            let (mut lo, mut hi) = (
                center.saturating_sub(radius).max(1),
                (center + radius).min(last),
            );
            for k in lo..=hi {
                let v = eval(k, &mut values);
                if better(v, k, best) {
                    best = (v, k);
                }
            }
            loop {
                if best.1 == hi && hi < last {
                    hi += 1;
                    let v = eval(hi, &mut values);
                    if better(v, hi, best) {
                        best = (v, hi);
                    }
                } else if (best.1 == lo || best.1 == 0) && lo > 1 {
                    lo -= 1;
                    let v = eval(lo, &mut values);
                    if better(v, lo, best) {
                        best = (v, lo);
                    }
                } else {
                    break;
                }
            }
        }
    }
    if !best.0.is_finite() {
        return Err(OptimError::LineSearchDiverged);
    }
    Ok(LineSearchOutcome {
        eta: etas[best.1],
        loss: best.0,
        index: best.1,
        evaluations,
    })
}
