//! Depth completion of sparse LIDAR guided by a grayscale image.
//!
//! The pipeline densifies the sparse depth by image-guided nearest-neighbor
//! search ([`ignns`]), derives occlusion boundaries from the result
//! ([`boundary`]), turns them into binary diffusion tensors ([`badt`]) and
//! minimizes a tensor-weighted TGV energy over inverse depth ([`solver`]).
//! [`pipeline`] chains the stages; [`eval`] scores results.

// Range checks are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod badt;
pub mod boundary;
pub mod error;
pub mod eval;
pub mod grid;
pub mod ignns;
pub mod io;
pub mod pipeline;
pub mod pointcloud;
pub mod preproc;
pub mod solver;

pub use badt::{build_adt, build_badt, AdtParams, BadtCase, TensorField};
pub use boundary::{
    detect_boundaries, filter_boundaries, ground_labels, BoundaryMask, CameraIntrinsics,
    GroundParams,
};
pub use error::{Error, Result};
pub use grid::{
    divergence, forward_gradient, image_gradient, JacobianField, Mask, ScalarField, VectorField,
};
pub use ignns::{ignns, IgnnsParams, NearestNeighborMap};
pub use pipeline::{PipelineConfig, Regularizer, Scene};
pub use preproc::{remove_occluded_background, OcclusionFilterParams};
pub use solver::{energy, minimize, prepare_data, DataTerm, SolverParams, SolverState};
