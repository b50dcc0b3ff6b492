//! End-to-end completion: optional occlusion filtering, IGNNS densification,
//! boundary detection with ground filtering, tensor construction and the
//! primal-dual solve.

use crate::badt::{build_adt, build_badt, AdtParams, TensorField};
use crate::boundary::{
    detect_boundaries, filter_boundaries, ground_labels, BoundaryMask, CameraIntrinsics,
    GroundParams,
};
use crate::error::{Error, Result};
use crate::grid::{Mask, ScalarField};
use crate::ignns::{ignns, IgnnsParams, NearestNeighborMap};
use crate::preproc::{remove_occluded_background, OcclusionFilterParams};
use crate::solver::{minimize, prepare_data, prepare_sparse_data, Completion, SolverParams};

/// One frame of input.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Grayscale image in `[0, 1]`, fully valid.
    pub image: ScalarField,
    /// Sparse depth in meters; invalid where nothing was measured.
    pub depth: ScalarField,
    /// Needed only for ground filtering.
    pub intrinsics: Option<CameraIntrinsics>,
}

/// First-order tensor used by the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// Binary tensors from depth boundaries.
    Badt,
    /// Continuous tensors from the image gradient (baseline).
    Adt(AdtParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// `None` skips occlusion filtering.
    pub occlusion: Option<OcclusionFilterParams>,
    pub ignns: IgnnsParams,
    /// Boundary threshold `t` in meters.
    pub boundary_threshold: f64,
    /// `None` keeps boundaries on the ground.
    pub ground: Option<GroundParams>,
    pub ransac_seed: u64,
    pub regularizer: Regularizer,
    pub solver: SolverParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            occlusion: None,
            ignns: IgnnsParams::default(),
            boundary_threshold: 2.0,
            ground: Some(GroundParams::default()),
            ransac_seed: 0,
            regularizer: Regularizer::Badt,
            solver: SolverParams::default(),
        }
    }
}

/// Every intermediate product of [`run`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Sparse depth after occlusion filtering (the input when it is off).
    pub sparse_depth: ScalarField,
    pub nearest: NearestNeighborMap,
    /// Piecewise-constant depth.
    pub dbar: ScalarField,
    /// Boundaries before ground filtering.
    pub raw_boundaries: BoundaryMask,
    /// Ground labels, when ground filtering ran.
    pub ground: Option<Mask>,
    /// Boundaries the tensor was built from.
    pub boundaries: BoundaryMask,
    pub completion: Completion,
}

/// Occlusion filtering followed by IGNNS.
pub fn densify(
    scene: &Scene,
    config: &PipelineConfig,
) -> Result<(ScalarField, NearestNeighborMap, ScalarField)> {
    let sparse = match &config.occlusion {
        Some(p) => remove_occluded_background(&scene.depth, p)?,
        None => scene.depth.clone(),
    };
    let (nn, dbar) = ignns(&scene.image, &sparse, &config.ignns)?;
    Ok((sparse, nn, dbar))
}

/// Boundary detection and, if configured, removal of flags on the ground.
pub fn boundaries(
    sparse: &ScalarField,
    nn: &NearestNeighborMap,
    dbar: &ScalarField,
    intrinsics: Option<&CameraIntrinsics>,
    config: &PipelineConfig,
) -> Result<(BoundaryMask, Option<Mask>, BoundaryMask)> {
    let raw = detect_boundaries(dbar, config.boundary_threshold)?;
    match &config.ground {
        None => Ok((raw.clone(), None, raw)),
        Some(params) => {
            let k = intrinsics.ok_or_else(|| {
                Error::InvalidInput("ground filtering needs camera intrinsics".into())
            })?;
            let ground = ground_labels(sparse, k, nn, params, config.ransac_seed)?;
            let filtered = filter_boundaries(&raw, &ground)?;
            Ok((raw, Some(ground), filtered))
        }
    }
}

pub fn tensor(image: &ScalarField, mask: &BoundaryMask, regularizer: &Regularizer) -> TensorField {
    match regularizer {
        Regularizer::Badt => build_badt(mask),
        Regularizer::Adt(params) => build_adt(image, params),
    }
}

/// Solver on the dense data term built from `dbar`.
pub fn solve(
    dbar: &ScalarField,
    tensor: &TensorField,
    params: &SolverParams,
    trace: bool,
) -> Result<Completion> {
    let data = prepare_data(dbar, params.weight_exponent)?;
    minimize(&data, tensor, params, trace)
}

pub fn run(scene: &Scene, config: &PipelineConfig) -> Result<PipelineOutput> {
    run_with_trace(scene, config, false)
}

pub fn run_with_trace(
    scene: &Scene,
    config: &PipelineConfig,
    trace: bool,
) -> Result<PipelineOutput> {
    check_scene(scene, config)?;
    let (sparse_depth, nearest, dbar) = densify(scene, config)?;
    let (raw_boundaries, ground, boundaries) = boundaries(
        &sparse_depth,
        &nearest,
        &dbar,
        scene.intrinsics.as_ref(),
        config,
    )?;
    let tensor = tensor(&scene.image, &boundaries, &config.regularizer);
    let completion = solve(&dbar, &tensor, &config.solver, trace)?;
    Ok(PipelineOutput {
        sparse_depth,
        nearest,
        dbar,
        raw_boundaries,
        ground,
        boundaries,
        completion,
    })
}

fn check_scene(scene: &Scene, config: &PipelineConfig) -> Result<()> {
    scene.depth.require_dims(scene.image.dims())?;
    if config.ground.is_some() && scene.intrinsics.is_none() {
        return Err(Error::InvalidInput(
            "ground filtering needs camera intrinsics; supply them or disable the filter".into(),
        ));
    }
    Ok(())
}

/// Energy traces of the same problem solved with the densified data term
/// and with the raw sparse one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub dense: Vec<f64>,
    pub sparse: Vec<f64>,
}

/// Both runs share the tensor and the inverse-depth scale, so the traces are
/// comparable.
pub fn convergence_report(scene: &Scene, config: &PipelineConfig) -> Result<ConvergenceReport> {
    check_scene(scene, config)?;
    let (sparse_depth, nearest, dbar) = densify(scene, config)?;
    let (_, _, mask) = boundaries(
        &sparse_depth,
        &nearest,
        &dbar,
        scene.intrinsics.as_ref(),
        config,
    )?;
    let tensor = tensor(&scene.image, &mask, &config.regularizer);
    let params = &config.solver;
    let dense_data = prepare_data(&dbar, params.weight_exponent)?;
    let sparse_data = prepare_sparse_data(
        &sparse_depth,
        params.weight_exponent,
        Some(dense_data.scale),
    )?;
    let dense = minimize(&dense_data, &tensor, params, true)?.energy_trace;
    let sparse = minimize(&sparse_data, &tensor, params, true)?.energy_trace;
    Ok(ConvergenceReport { dense, sparse })
}
