use std::path::{Path, PathBuf};

use super::{csv_err, fmt_f64, RunnerError};
use crate::network::{pushforward, NetEval, ParamVector};
use crate::optim::{ngd_direction, NgdVariant};
use crate::problems::{Objective, ProblemInstance};
use crate::quadrature::PointSet;

/// A sampled function rescaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldColumn {
    pub name: String,
    pub values: Vec<f64>,
    /// The divisor applied (max |value|, or 1 for the zero function).
    pub scale: f64,
    /// The function vanished on the grid and was left unscaled.
    pub zero: bool,
    /// Weighted cosine similarity with the first column.
    pub cosine_to_reference: f64,
}

#[derive(Debug, Clone)]
pub struct FieldReport {
    pub columns: Vec<FieldColumn>,
    pub path: PathBuf,
    pub meta_path: PathBuf,
}

impl FieldReport {
    pub fn column(&self, name: &str) -> Option<&FieldColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Rescales each function by its max |value| and measures its cosine with the
/// first one under the quadrature weights `weights`.
pub fn field_columns(weights: &[f64], raw: Vec<(String, Vec<f64>)>) -> Vec<FieldColumn> {
    let reference = raw.first().map(|r| r.1.clone()).unwrap_or_default();
    let ref_norm = weighted_dot(weights, &reference, &reference).sqrt();
    raw.into_iter()
        .map(|(name, values)| {
            let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let norm = weighted_dot(weights, &values, &values).sqrt();
            let cosine = if norm > 0.0 && ref_norm > 0.0 {
                weighted_dot(weights, &values, &reference) / (norm * ref_norm)
            } else {
                0.0
            };
            let zero = max == 0.0;
            let scale = if zero { 1.0 } else { max };
            FieldColumn {
                name,
                values: values.iter().map(|v| v / scale).collect(),
                scale,
                zero,
                cosine_to_reference: cosine,
            }
        })
        .collect()
}

/// Writes `path` with the point coordinates and every column, plus a
/// `*_meta.csv` sibling with scale, zero flag and cosine per column.
pub fn write_field_csv(
    path: &Path,
    points: &PointSet,
    columns: &[FieldColumn],
) -> Result<PathBuf, RunnerError> {
    let coord_names = if points.dim() == 1 {
        vec!["x"]
    } else {
        vec!["x0", "x1"]
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = coord_names.iter().map(|s| s.to_string()).collect();
    header.extend(columns.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, x) in points.iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        rec.extend(columns.iter().map(|c| fmt_f64(c.values[i])));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("fields");
    let meta_path = path.with_file_name(format!("{stem}_meta.csv"));
    let mut m = csv::Writer::from_path(&meta_path).map_err(|e| csv_err(&meta_path, e))?;
    m.write_record(["column", "scale", "zero", "cosine_to_residual"])
        .map_err(|e| csv_err(&meta_path, e))?;
    for c in columns {
        m.write_record([
            c.name.clone(),
            fmt_f64(c.scale),
            c.zero.to_string(),
            fmt_f64(c.cosine_to_reference),
        ])
        .map_err(|e| csv_err(&meta_path, e))?;
    }
    m.flush().map_err(|source| RunnerError::Io {
        path: meta_path.clone(),
        source,
    })?;
    Ok(meta_path)
}

/// Samples `u_θ − u*`, the pushforward of the energy natural gradient and the
/// pushforward of the plain gradient on the error grid of `problem` and
/// writes them to `out_dir/{name}.csv`.
pub fn emit_field_csv(
    params: &ParamVector,
    problem: &ProblemInstance,
    rcond: f64,
    out_dir: &Path,
    name: &str,
) -> Result<FieldReport, RunnerError> {
    std::fs::create_dir_all(out_dir).map_err(|source| RunnerError::Unwritable {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let points = &problem.eval.points;
    let mut eval = NetEval::new(params)?;
    let residual: Vec<f64> = points
        .iter()
        .map(|x| eval.value(x) - problem.exact(x).value)
        .collect();
    let natural = ngd_direction(problem, params, NgdVariant::Energy, rcond, None)?;
    let (_, grad) = problem.loss_and_grad(params)?;
    let columns = field_columns(
        &problem.eval.weights,
        vec![
            ("residual".to_string(), residual),
            (
                "engd_pushforward".to_string(),
                pushforward(params, &natural.psi, points)?,
            ),
            (
                "gradient_pushforward".to_string(),
                pushforward(params, &grad, points)?,
            ),
        ],
    );
    let path = out_dir.join(format!("{name}.csv"));
    let meta_path = write_field_csv(&path, points, &columns)?;
    Ok(FieldReport {
        columns,
        path,
        meta_path,
    })
}
