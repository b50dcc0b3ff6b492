//! Removal of occluded-background LIDAR returns.
//!
//! A LIDAR mounted away from the camera sees background surfaces that the
//! camera cannot. Once projected into the image, those returns land just
//! below the foreground object that hides them. Every measured point acts as
//! the center of a lower semi-circle whose radius shrinks with depth; returns
//! inside it that are much farther than the center are dropped.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionFilterParams {
    /// Radius coefficient in pixel·meters; the radius around a center of
    /// depth `d` is `r_occ_coeff / d`.
    pub r_occ_coeff: f64,
    /// Minimum depth gap in meters for a return to count as occluded.
    pub t_occ: f64,
}

impl Default for OcclusionFilterParams {
    fn default() -> Self {
        Self {
            r_occ_coeff: 256.0,
            t_occ: 2.0,
        }
    }
}

impl OcclusionFilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_occ_coeff > 0.0) || !(self.t_occ > 0.0) {
            return Err(Error::InvalidInput(format!(
                "occlusion filter needs r_occ_coeff > 0 and t_occ > 0, got {} and {}",
                self.r_occ_coeff, self.t_occ
            )));
        }
        Ok(())
    }
}

/// Returns a copy of `depth` with occluded-background returns invalidated.
///
/// Every center is drawn from the input point set, so the result does not
/// depend on visiting order and removed points still occlude others.
pub fn remove_occluded_background(
    depth: &ScalarField,
    params: &OcclusionFilterParams,
) -> Result<ScalarField> {
    params.validate()?;
    for (x, y, d) in depth.iter_valid() {
        if d <= 0.0 {
            return Err(Error::NonPositiveDepth { x, y, value: d });
        }
    }
    let (w, h) = depth.dims();
    let centers: Vec<(usize, usize, f64)> = depth.iter_valid().collect();

    let removed: Vec<usize> = centers
        .par_iter()
        .flat_map_iter(|&(cx, cy, cd)| {
            let radius = params.r_occ_coeff / cd;
            let r2 = radius * radius;
            let max_dy = (radius.floor() as usize).min(h - 1 - cy);
            let mut hits = Vec::new();
            for dy in 0..=max_dy {
                let span2 = r2 - (dy * dy) as f64;
                if span2 < 0.0 {
                    break;
                }
                let span = span2.sqrt().floor() as usize;
                let y = cy + dy;
                let x0 = cx.saturating_sub(span);
                let x1 = (cx + span).min(w - 1);
                for x in x0..=x1 {
                    if dy == 0 && x == cx {
                        continue;
                    }
                    if let Some(d) = depth.get(x, y) {
                        if d - cd > params.t_occ {
                            hits.push(y * w + x);
                        }
                    }
                }
            }
            hits
        })
        .collect();

    let mut out = depth.clone();
    for i in removed {
        out.invalidate_index(i);
    }
    Ok(out)
}
