//! Accuracy scoring and parameter sweeps.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::pipeline::{run, PipelineConfig, Scene};

/// Mean absolute depth error in millimeters over pixels where `gt` is valid.
pub fn mae(pred: &ScalarField, gt: &ScalarField) -> Result<f64> {
    pred.require_dims(gt.dims())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y, g) in gt.iter_valid() {
        let p = pred.get(x, y).ok_or_else(|| {
            Error::InvalidInput(format!(
                "prediction has no value at ({x}, {y}) where ground truth does"
            ))
        })?;
        sum += (p - g).abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput(
            "ground truth has no valid pixel".into(),
        ));
    }
    Ok(1000.0 * sum / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// IGNNS path cost `c`.
    C,
    /// Boundary threshold `t`.
    T,
}

impl SweepParameter {
    fn apply(self, config: &PipelineConfig, value: f64) -> PipelineConfig {
        let mut out = *config;
        match self {
            SweepParameter::C => out.ignns.c = value,
            SweepParameter::T => out.boundary_threshold = value,
        }
        out
    }
}

/// Runs the pipeline once per value and scores it against `gt`.
///
/// Returns `(value, mae_mm)` in the order of `values`.
pub fn sweep(
    scene: &Scene,
    gt: &ScalarField,
    base: &PipelineConfig,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    values
        .par_iter()
        .map(|&value| {
            let config = parameter.apply(base, value);
            run(scene, &config)
                .and_then(|out| mae(&out.completion.depth, gt))
                .map(|m| (value, m))
                .map_err(|e| Error::Sweep {
                    value,
                    source: Box::new(e),
                })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[(f64, f64)], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "value,mae_mm")?;
    for (v, m) in rows {
        writeln!(out, "{v},{m}")?;
    }
    Ok(())
}
