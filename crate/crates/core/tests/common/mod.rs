//! Scene builders and reference implementations shared by integration tests.

#![allow(dead_code)]

use badt_core::{CameraIntrinsics, ScalarField, TensorField};

/// 32×32, 5 m for `x < 16` and 20 m to the right.
pub fn two_region_depth() -> ScalarField {
    ScalarField::from_vec(
        32,
        32,
        (0..1024)
            .map(|i| if i % 32 < 16 { 5.0 } else { 20.0 })
            .collect(),
    )
    .unwrap()
}

/// Camera 1.5 m above a floor, looking slightly down, facing a wall at 8 m
/// (3 m tall, columns 20..44) in front of a back wall at 40 m.
pub struct RoomScene {
    pub width: usize,
    pub height: usize,
    pub k: CameraIntrinsics,
    pub camera_height: f64,
    pub image: ScalarField,
    /// True depth at every pixel.
    pub depth: ScalarField,
    /// Which surface each pixel sees.
    pub surface: Vec<Surface>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Floor,
    Wall,
    Back,
}

impl RoomScene {
    pub fn new() -> Self {
        let (width, height) = (64, 48);
        let k = CameraIntrinsics::new(50.0, 50.0, 32.0, 12.0).unwrap();
        let camera_height = 1.5;
        let (wall_z, wall_top, back_z) = (8.0, 3.0, 40.0);
        let mut depth = ScalarField::zeros(width, height);
        let mut image = ScalarField::zeros(width, height);
        let mut surface = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let ry = (y as f64 - k.cy) / k.fy;
                // depth where the pixel ray meets the floor, if it does
                let floor = (ry > 0.0).then(|| camera_height / ry);
                // rays through the wall rectangle (up to wall_top above the floor)
                let wall_y = ry * wall_z;
                let on_wall = (20..44).contains(&x)
                    && wall_y >= camera_height - wall_top
                    && wall_y <= camera_height;
                let (z, s) = if on_wall && floor.is_none_or(|f| f >= wall_z) {
                    (wall_z, Surface::Wall)
                } else {
                    match floor {
                        Some(f) if f < back_z => (f, Surface::Floor),
                        _ => (back_z, Surface::Back),
                    }
                };
                depth.set(x, y, z);
                image.set(
                    x,
                    y,
                    match s {
                        Surface::Floor => 0.3,
                        Surface::Wall => 0.85,
                        Surface::Back => 0.6,
                    },
                );
                surface.push(s);
            }
        }
        Self {
            width,
            height,
            k,
            camera_height,
            image,
            depth,
            surface,
        }
    }

    /// Height of the true surface point at a pixel above the floor.
    pub fn height_above_floor(&self, x: usize, y: usize) -> f64 {
        let p = self
            .k
            .backproject(x as f64, y as f64, self.depth.get(x, y).unwrap());
        self.camera_height - p[1]
    }

    /// Depth kept on a regular lattice: every `step_y`-th row starting at
    /// `offset_y`, every `step_x`-th column.
    pub fn sampled(&self, step_x: usize, step_y: usize, offset_y: usize) -> ScalarField {
        let mut d = ScalarField::empty(self.width, self.height);
        for y in (offset_y..self.height).step_by(step_y) {
            for x in (0..self.width).step_by(step_x) {
                d.set(x, y, self.depth.get(x, y).unwrap());
            }
        }
        d
    }
}

/// Independent minimizer of the discrete energy
///
/// `Σ λd/2 · w (u − g)² + λs ‖G(∇u − v)‖ + λa ‖∇v‖`
///
/// by accelerated projected gradient on a smoothed surrogate, with the
/// norms replaced by `sqrt(|·|² + ε²)` and `ε` driven towards zero. The
/// iterate is projected onto `u ≥ 0`.
pub struct GradientOracle<'a> {
    pub width: usize,
    pub height: usize,
    pub g: &'a [f64],
    pub w: &'a [f64],
    pub tensor: &'a TensorField,
    pub lambda_s: f64,
    pub lambda_a: f64,
    pub lambda_d: f64,
}

impl GradientOracle<'_> {
    /// Smoothed energy and its gradient at `x = (u, v₁, v₂)`.
    pub fn energy_and_gradient(&self, xs: &[f64], eps: f64, grad: &mut [f64]) -> f64 {
        let (w, h) = (self.width, self.height);
        let n = w * h;
        let (u, rest) = xs.split_at(n);
        let (v1, v2) = rest.split_at(n);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let eps2 = eps * eps;
        let mut e = 0.0;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let right = x + 1 < w;
                let down = y + 1 < h;

                let du = u[i] - self.g[i];
                e += 0.5 * self.lambda_d * self.w[i] * du * du;
                grad[i] += self.lambda_d * self.w[i] * du;

                let ux = if right { u[i + 1] - u[i] } else { 0.0 };
                let uy = if down { u[i + w] - u[i] } else { 0.0 };
                let r = [ux - v1[i], uy - v2[i]];
                let (a, b, d) = self.tensor.at(i);
                let z = [a * r[0] + b * r[1], b * r[0] + d * r[1]];
                let nz = (z[0] * z[0] + z[1] * z[1] + eps2).sqrt();
                e += self.lambda_s * nz;
                let s = [
                    self.lambda_s * (a * z[0] + b * z[1]) / nz,
                    self.lambda_s * (b * z[0] + d * z[1]) / nz,
                ];
                if right {
                    grad[i + 1] += s[0];
                    grad[i] -= s[0];
                }
                if down {
                    grad[i + w] += s[1];
                    grad[i] -= s[1];
                }
                grad[n + i] -= s[0];
                grad[2 * n + i] -= s[1];

                let jac = [
                    if right { v1[i + 1] - v1[i] } else { 0.0 },
                    if down { v1[i + w] - v1[i] } else { 0.0 },
                    if right { v2[i + 1] - v2[i] } else { 0.0 },
                    if down { v2[i + w] - v2[i] } else { 0.0 },
                ];
                let nj = (jac.iter().map(|c| c * c).sum::<f64>() + eps2).sqrt();
                e += self.lambda_a * nj;
                let rr = jac.map(|c| self.lambda_a * c / nj);
                if right {
                    grad[n + i + 1] += rr[0];
                    grad[n + i] -= rr[0];
                    grad[2 * n + i + 1] += rr[2];
                    grad[2 * n + i] -= rr[2];
                }
                if down {
                    grad[n + i + w] += rr[1];
                    grad[n + i] -= rr[1];
                    grad[2 * n + i + w] += rr[3];
                    grad[2 * n + i] -= rr[3];
                }
            }
        }
        e
    }

    /// Runs FISTA with adaptive restart from `u0` (and `v = 0`) through a
    /// decreasing sequence of smoothing levels; returns `(u, v₁, v₂)`
    /// concatenated.
    pub fn minimize(&self, u0: &[f64], eps_levels: &[f64], max_iter: usize, tol: f64) -> Vec<f64> {
        let n = self.width * self.height;
        let mut x = vec![0.0; 3 * n];
        x[..n].copy_from_slice(u0);
        let w_max = self.w.iter().cloned().fold(0.0, f64::max);
        let mut grad = vec![0.0; 3 * n];
        for &eps in eps_levels {
            // ‖[∇, −I]‖² ≤ 9 for the first-order term, ‖∇‖² ≤ 8 for the second
            let lip = self.lambda_d * w_max + (9.0 * self.lambda_s + 8.0 * self.lambda_a) / eps;
            let mut y = x.clone();
            let mut t = 1.0f64;
            for _ in 0..max_iter {
                self.energy_and_gradient(&y, eps, &mut grad);
                let mut next: Vec<f64> =
                    y.iter().zip(&grad).map(|(yi, gi)| yi - gi / lip).collect();
                next[..n].iter_mut().for_each(|u| *u = u.max(0.0));
                let restart: f64 = y
                    .iter()
                    .zip(&next)
                    .zip(&x)
                    .map(|((yi, ni), xi)| (yi - ni) * (ni - xi))
                    .sum();
                let change = next
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if restart > 0.0 {
                    t = 1.0;
                }
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                y = next
                    .iter()
                    .zip(&x)
                    .map(|(ni, xi)| ni + beta * (ni - xi))
                    .collect();
                x = next;
                t = t_next;
                if change < tol {
                    break;
                }
            }
        }
        x
    }
}
