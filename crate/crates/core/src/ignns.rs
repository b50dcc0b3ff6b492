//! Image-guided nearest-neighbor search.
//!
//! Each pixel is assigned the measured pixel reachable by the cheapest
//! 4-connected path, where every pixel on the path (both endpoints included)
//! costs `‖∇I‖² + c`. Paths that cross strong image edges are expensive, so
//! seeds rarely leak across object outlines. Filling each pixel with its
//! seed's depth yields a piecewise-constant depth map.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::{image_gradient, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgnnsParams {
    /// Cost of a unit of path length, in squared normalized intensity.
    pub c: f64,
}

impl Default for IgnnsParams {
    fn default() -> Self {
        Self { c: 0.01 }
    }
}

/// Per-pixel nearest seed and the cost of the cheapest path to it.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighborMap {
    width: usize,
    height: usize,
    seed_index: Vec<usize>,
    cost: Vec<f64>,
}

impl NearestNeighborMap {
    pub fn from_parts(
        width: usize,
        height: usize,
        seed_index: Vec<usize>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if seed_index.len() != n || cost.len() != n {
            return Err(Error::InvalidInput(format!(
                "nearest-neighbor map of {}/{} entries for a {width}x{height} grid",
                seed_index.len(),
                cost.len()
            )));
        }
        if let Some(&s) = seed_index.iter().find(|&&s| s >= n) {
            return Err(Error::InvalidInput(format!("seed index {s} out of range")));
        }
        Ok(Self {
            width,
            height,
            seed_index,
            cost,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Linear index (`y * width + x`) of the seed assigned to each pixel.
    pub fn seed_indices(&self) -> &[usize] {
        &self.seed_index
    }

    pub fn seed_of(&self, x: usize, y: usize) -> (usize, usize) {
        let s = self.seed_index[y * self.width + x];
        (s % self.width, s / self.width)
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    cost: f64,
    pixel: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // BinaryHeap is a max-heap: cheaper cost, then smaller pixel index, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.pixel.cmp(&self.pixel))
    }
}

/// Per-pixel cost `‖∇I‖² + c` charged for every pixel on a path.
pub fn node_costs(image: &ScalarField, params: &IgnnsParams) -> Vec<f64> {
    let g = image_gradient(image);
    g.x.values()
        .iter()
        .zip(g.y.values())
        .map(|(gx, gy)| gx * gx + gy * gy + params.c)
        .collect()
}

/// Runs the search and returns the nearest-seed map together with the
/// piecewise-constant depth map `d̄(i) = d(seed(i))`.
///
/// Among seeds reaching a pixel at equal cost, the smaller linear index wins.
pub fn ignns(
    image: &ScalarField,
    depth: &ScalarField,
    params: &IgnnsParams,
) -> Result<(NearestNeighborMap, ScalarField)> {
    if !(params.c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "IGNNS path cost c must be > 0, got {}",
            params.c
        )));
    }
    depth.require_dims(image.dims())?;
    image.require_fully_valid("image")?;
    let (w, h) = image.dims();
    let n = w * h;
    let node = node_costs(image, params);

    let mut cost = vec![f64::INFINITY; n];
    let mut seed = vec![usize::MAX; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();

    for (i, ok) in depth.valid_mask().iter().enumerate() {
        if *ok {
            cost[i] = node[i];
            seed[i] = i;
            heap.push(Frontier {
                cost: node[i],
                pixel: i,
            });
        }
    }
    if heap.is_empty() {
        return Err(Error::NoSeeds);
    }

    while let Some(Frontier { cost: c, pixel: i }) = heap.pop() {
        if settled[i] || c != cost[i] {
            continue;
        }
        settled[i] = true;
        let (x, y) = (i % w, i / w);
        let neighbors = [
            (y > 0).then(|| i - w),
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y + 1 < h).then(|| i + w),
        ];
        for j in neighbors.into_iter().flatten() {
            if settled[j] {
                continue;
            }
            let candidate = c + node[j];
            if candidate < cost[j] || (candidate == cost[j] && seed[i] < seed[j]) {
                let improved = candidate < cost[j];
                cost[j] = candidate;
                seed[j] = seed[i];
                if improved {
                    heap.push(Frontier {
                        cost: candidate,
                        pixel: j,
                    });
                }
            }
        }
    }

    let dense: Vec<f64> = seed
        .iter()
        .map(|&s| depth.get_index(s).expect("seed is a measured pixel"))
        .collect();
    let dbar = ScalarField::from_vec(w, h, dense)?;
    Ok((
        NearestNeighborMap {
            width: w,
            height: h,
            seed_index: seed,
            cost,
        },
        dbar,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse(w: usize, h: usize, points: &[(usize, usize, f64)]) -> ScalarField {
        let mut d = ScalarField::empty(w, h);
        for &(x, y, v) in points {
            d.set(x, y, v);
        }
        d
    }

    #[test]
    fn single_seed_fills_everything() {
        let img = ScalarField::filled(6, 4, 0.5);
        let d = sparse(6, 4, &[(2, 1, 7.5)]);
        let (nn, dbar) = ignns(&img, &d, &IgnnsParams::default()).unwrap();
        assert!(dbar.values().iter().all(|&v| v == 7.5));
        assert!(nn.seed_indices().iter().all(|&s| s == 6 + 2));
        // the seed pays its own node cost
        assert_eq!(nn.costs()[8], 0.01);
    }

    #[test]
    fn flat_image_gives_manhattan_voronoi() {
        let (w, h) = (7, 5);
        let img = ScalarField::filled(w, h, 0.2);
        let seeds = [(1usize, 1usize, 3.0), (5, 3, 9.0)];
        let d = sparse(w, h, &seeds);
        let (nn, dbar) = ignns(&img, &d, &IgnnsParams { c: 0.3 }).unwrap();
        for y in 0..h {
            for x in 0..w {
                let dist = |s: &(usize, usize, f64)| x.abs_diff(s.0) + y.abs_diff(s.1);
                let (d0, d1) = (dist(&seeds[0]), dist(&seeds[1]));
                // seed 0 has the smaller linear index, so it wins ties
                let expect = if d0 <= d1 { &seeds[0] } else { &seeds[1] };
                assert_eq!(nn.seed_of(x, y), (expect.0, expect.1), "pixel ({x},{y})");
                assert_eq!(dbar.get(x, y), Some(expect.2));
            }
        }
    }

    #[test]
    fn flat_image_assignment_is_independent_of_c() {
        let img = ScalarField::filled(9, 6, 0.0);
        let d = sparse(9, 6, &[(0, 0, 1.0), (8, 2, 2.0), (4, 5, 3.0)]);
        let (a, _) = ignns(&img, &d, &IgnnsParams { c: 0.001 }).unwrap();
        let (b, _) = ignns(&img, &d, &IgnnsParams { c: 5.0 }).unwrap();
        assert_eq!(a.seed_indices(), b.seed_indices());
    }

    #[test]
    fn bright_wall_blocks_the_nearer_seed() {
        // seed L at column 0, seed R at column 4, bright column at 2
        let (w, h) = (5, 5);
        let mut img = ScalarField::filled(w, h, 0.0);
        for y in 0..h {
            img.set(2, y, 1.0);
        }
        let d = sparse(w, h, &[(0, 2, 4.0), (4, 2, 12.0)]);
        let (_, dbar) = ignns(&img, &d, &IgnnsParams::default()).unwrap();
        for y in 0..h {
            for x in 0..2 {
                assert_eq!(dbar.get(x, y), Some(4.0));
                assert_eq!(dbar.get(x + 3, y), Some(12.0));
            }
        }
    }

    #[test]
    fn metric_consistency() {
        let (w, h) = (11, 9);
        let vals: Vec<f64> = (0..w * h).map(|i| ((i * 37 % 17) as f64) / 16.0).collect();
        let img = ScalarField::from_vec(w, h, vals).unwrap();
        let d = sparse(w, h, &[(1, 1, 2.0), (9, 7, 5.0), (5, 4, 8.0)]);
        let params = IgnnsParams::default();
        let (nn, dbar) = ignns(&img, &d, &params).unwrap();
        let node = node_costs(&img, &params);
        let cost = nn.costs();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                assert!(cost[i].is_finite());
                let mut nbrs = vec![];
                if x > 0 {
                    nbrs.push(i - 1)
                }
                if x + 1 < w {
                    nbrs.push(i + 1)
                }
                if y > 0 {
                    nbrs.push(i - w)
                }
                if y + 1 < h {
                    nbrs.push(i + w)
                }
                for j in nbrs {
                    assert!(cost[i] <= cost[j] + node[i] + 1e-12);
                }
                let v = dbar.get(x, y).unwrap();
                assert!([2.0, 5.0, 8.0].contains(&v));
            }
        }
    }

    #[test]
    fn errors() {
        let img = ScalarField::filled(3, 3, 0.0);
        assert!(matches!(
            ignns(&img, &ScalarField::empty(3, 3), &Default::default()),
            Err(Error::NoSeeds)
        ));
        assert!(matches!(
            ignns(&img, &ScalarField::empty(4, 3), &Default::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let d = sparse(3, 3, &[(0, 0, 1.0)]);
        assert!(ignns(&img, &d, &IgnnsParams { c: 0.0 }).is_err());
    }
}
