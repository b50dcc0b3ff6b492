//! Occlusion boundaries from the piecewise-constant depth map, and removal of
//! false boundaries on the ground.
//!
//! A flag sits on the lower-index pixel of the forward-difference pair whose
//! depth jumps, which is the pixel whose forward derivative the solver must
//! stop penalizing.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Mask, ScalarField};
use crate::ignns::NearestNeighborMap;

/// Per-pixel occlusion-boundary flags.
///
/// `a` marks vertical boundaries (depth jumps between `(x, y)` and
/// `(x + 1, y)`), `b` marks horizontal ones (jumps between `(x, y)` and
/// `(x, y + 1)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMask {
    pub a: Mask,
    pub b: Mask,
}

impl BoundaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            a: Mask::new(width, height, false),
            b: Mask::new(width, height, false),
        }
    }

    pub fn new(a: Mask, b: Mask) -> Result<Self> {
        if a.dims() != b.dims() {
            return Err(Error::DimensionMismatch {
                expected: a.dims(),
                found: b.dims(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.a.dims()
    }

    /// `(A, B)` at a linear pixel index.
    pub fn flags(&self, i: usize) -> (bool, bool) {
        (self.a.as_slice()[i], self.b.as_slice()[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundParams {
    /// RANSAC iterations.
    pub n_ransac: usize,
    /// RANSAC inlier distance in meters.
    pub t_ransac: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            n_ransac: 1000,
            t_ransac: 0.2,
        }
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidInput(format!(
                "intrinsics need positive focal lengths, got fx={fx} fy={fy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Camera-frame point for pixel `(x, y)` at depth `d` (x right, y down, z forward).
    pub fn backproject(&self, x: f64, y: f64, d: f64) -> [f64; 3] {
        [(x - self.cx) * d / self.fx, (y - self.cy) * d / self.fy, d]
    }

    pub fn project(&self, p: [f64; 3]) -> [f64; 2] {
        [
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        ]
    }
}

/// Thresholds the forward differences of `dbar` at `t` meters.
pub fn detect_boundaries(dbar: &ScalarField, t: f64) -> Result<BoundaryMask> {
    dbar.require_fully_valid("piecewise-constant depth")?;
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "boundary threshold must be > 0, got {t}"
        )));
    }
    let (w, h) = dbar.dims();
    let d = dbar.values();
    let mut mask = BoundaryMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && (d[i + 1] - d[i]).abs() > t {
                mask.a.as_mut_slice()[i] = true;
            }
            if y + 1 < h && (d[i + w] - d[i]).abs() > t {
                mask.b.as_mut_slice()[i] = true;
            }
        }
    }
    Ok(mask)
}

/// A plane `normal · p + offset = 0` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Plane {
    fn through(p0: &Vector3<f64>, p1: &Vector3<f64>, p2: &Vector3<f64>) -> Option<Self> {
        let n = (p1 - p0).cross(&(p2 - p0));
        let scale = (p1 - p0).norm() * (p2 - p0).norm();
        let len = n.norm();
        if !(len > 1e-12 * scale) || len == 0.0 {
            return None;
        }
        let n = n / len;
        Some(Self {
            normal: [n.x, n.y, n.z],
            offset: -n.dot(p0),
        })
    }

    pub fn signed_distance(&self, p: [f64; 3]) -> f64 {
        self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] + self.offset
    }

    /// Flips the plane so its normal points up (negative camera Y), which
    /// makes points under the plane have negative signed distance.
    fn oriented_up(self) -> Self {
        if self.normal[1] > 0.0 {
            Self {
                normal: [-self.normal[0], -self.normal[1], -self.normal[2]],
                offset: -self.offset,
            }
        } else {
            self
        }
    }
}

/// Fits the dominant plane to `points` with RANSAC and refines it by least
/// squares on the winning inlier set.
pub fn fit_plane_ransac(points: &[[f64; 3]], params: &GroundParams, seed: u64) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::NotEnoughPoints {
            needed: 3,
            found: points.len(),
        });
    }
    if params.n_ransac == 0 || !(params.t_ransac > 0.0) {
        return Err(Error::InvalidInput(format!(
            "RANSAC needs n_ransac >= 1 and t_ransac > 0, got {} and {}",
            params.n_ransac, params.t_ransac
        )));
    }
    let pts: Vec<Vector3<f64>> = points
        .iter()
        .map(|p| Vector3::new(p[0], p[1], p[2]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let max_draws = params.n_ransac.saturating_mul(100).max(1000);
    let mut draws = 0;
    let mut iterations = 0;
    let mut best: Option<(usize, Plane)> = None;
    while iterations < params.n_ransac {
        if draws >= max_draws {
            break;
        }
        draws += 1;
        let idx = sample(&mut rng, pts.len(), 3);
        let Some(plane) =
            Plane::through(&pts[idx.index(0)], &pts[idx.index(1)], &pts[idx.index(2)])
        else {
            continue;
        };
        iterations += 1;
        let inliers = points
            .iter()
            .filter(|p| plane.signed_distance(**p).abs() <= params.t_ransac)
            .count();
        if best.is_none_or(|(n, _)| inliers > n) {
            best = Some((inliers, plane));
        }
    }
    let Some((_, sampled)) = best else {
        return Err(Error::Degenerate(
            "every RANSAC sample was collinear".into(),
        ));
    };

    let inliers: Vec<&Vector3<f64>> = pts
        .iter()
        .filter(|p| sampled.signed_distance([p.x, p.y, p.z]).abs() <= params.t_ransac)
        .collect();
    Ok(refit(&inliers).unwrap_or(sampled).oriented_up())
}

fn refit(inliers: &[&Vector3<f64>]) -> Option<Plane> {
    if inliers.len() < 3 {
        return None;
    }
    let centroid = inliers.iter().fold(Vector3::zeros(), |acc, p| acc + **p) / inliers.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in inliers {
        let d = **p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (smallest, middle, largest) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    // collinear inliers leave the normal undetermined
    if !(middle > 1e-12 * largest.max(f64::MIN_POSITIVE)) {
        return None;
    }
    debug_assert!(smallest <= middle);
    let n = eig.eigenvectors.column(order[0]).normalize();
    Some(Plane {
        normal: [n.x, n.y, n.z],
        offset: -n.dot(&centroid),
    })
}

/// Labels pixels as ground.
///
/// Measured points are back-projected, the dominant plane is found with
/// RANSAC, points in or under it (signed distance ≤ `t_ransac` along the
/// upward normal) are ground, and every pixel inherits the label of its
/// nearest seed.
pub fn ground_labels(
    depth: &ScalarField,
    intrinsics: &CameraIntrinsics,
    nn: &NearestNeighborMap,
    params: &GroundParams,
    seed: u64,
) -> Result<Mask> {
    if nn.dims() != depth.dims() {
        return Err(Error::DimensionMismatch {
            expected: depth.dims(),
            found: nn.dims(),
        });
    }
    ground_labels_from_seeds(depth, intrinsics, nn.seed_indices(), params, seed)
}

/// [`ground_labels`] with the nearest-seed assignment given as raw linear
/// indices, as stored in a seed-index sidecar.
pub fn ground_labels_from_seeds(
    depth: &ScalarField,
    intrinsics: &CameraIntrinsics,
    seed_indices: &[usize],
    params: &GroundParams,
    seed: u64,
) -> Result<Mask> {
    let (w, h) = depth.dims();
    if seed_indices.len() != w * h {
        return Err(Error::InvalidInput(format!(
            "{} seed indices for a {w}x{h} frame",
            seed_indices.len()
        )));
    }
    let mut pixels = Vec::new();
    let mut points = Vec::new();
    for (x, y, d) in depth.iter_valid() {
        if d <= 0.0 {
            return Err(Error::NonPositiveDepth { x, y, value: d });
        }
        pixels.push(y * w + x);
        points.push(intrinsics.backproject(x as f64, y as f64, d));
    }
    let plane = fit_plane_ransac(&points, params, seed)?;

    let mut measured = vec![None; w * h];
    for (&i, p) in pixels.iter().zip(&points) {
        measured[i] = Some(plane.signed_distance(*p) <= params.t_ransac);
    }
    let labels = seed_indices
        .iter()
        .map(|&s| {
            measured.get(s).copied().flatten().ok_or_else(|| {
                Error::InvalidInput(format!("seed index {s} does not point at a measured pixel"))
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    Mask::from_vec(w, h, labels)
}

/// Clears flags whose whole forward-difference pair lies on the ground.
pub fn filter_boundaries(mask: &BoundaryMask, ground: &Mask) -> Result<BoundaryMask> {
    if mask.dims() != ground.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            found: ground.dims(),
        });
    }
    let (w, h) = mask.dims();
    let g = ground.as_slice();
    let mut out = mask.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && g[i] && g[i + 1] {
                out.a.as_mut_slice()[i] = false;
            }
            if y + 1 < h && g[i] && g[i + w] {
                out.b.as_mut_slice()[i] = false;
            }
        }
    }
    Ok(out)
}
