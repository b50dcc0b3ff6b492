//! Diffusion tensor fields weighting the first-order TGV term.
//!
//! The binary tensor (B-ADT) is identity away from occlusion boundaries and
//! drops the derivative across a boundary on it. The continuous tensor (ADT)
//! is kept for the image-driven baseline.

use crate::boundary::BoundaryMask;
use crate::grid::{image_gradient, ScalarField};

/// Which binary tensor a pixel carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BadtCase {
    /// No boundary: `[[1, 0], [0, 1]]`.
    Identity,
    /// Vertical boundary only: `[[0, 0], [0, 1]]`.
    KillX,
    /// Horizontal boundary only: `[[1, 0], [0, 0]]`.
    KillY,
    /// Both: the zero matrix.
    Zero,
}

impl BadtCase {
    pub fn from_flags(a: bool, b: bool) -> Self {
        match (a, b) {
            (false, false) => BadtCase::Identity,
            (true, false) => BadtCase::KillX,
            (false, true) => BadtCase::KillY,
            (true, true) => BadtCase::Zero,
        }
    }

    /// `(g_xx, g_xy, g_yy)`.
    pub fn entries(self) -> (f64, f64, f64) {
        match self {
            BadtCase::Identity => (1.0, 0.0, 1.0),
            BadtCase::KillX => (0.0, 0.0, 1.0),
            BadtCase::KillY => (1.0, 0.0, 0.0),
            BadtCase::Zero => (0.0, 0.0, 0.0),
        }
    }

    #[inline]
    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        match self {
            BadtCase::Identity => v,
            BadtCase::KillX => [0.0, v[1]],
            BadtCase::KillY => [v[0], 0.0],
            BadtCase::Zero => [0.0, 0.0],
        }
    }
}

/// Per-pixel symmetric 2×2 tensors stored as `(g_xx, g_xy, g_yy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    width: usize,
    height: usize,
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: Vec<f64>,
    cases: Option<Vec<BadtCase>>,
}

impl TensorField {
    pub fn identity(width: usize, height: usize) -> Self {
        Self::from_cases(width, height, vec![BadtCase::Identity; width * height])
    }

    fn from_cases(width: usize, height: usize, cases: Vec<BadtCase>) -> Self {
        let n = cases.len();
        let (mut xx, mut xy, mut yy) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for c in &cases {
            let (a, b, d) = c.entries();
            xx.push(a);
            xy.push(b);
            yy.push(d);
        }
        Self {
            width,
            height,
            xx,
            xy,
            yy,
            cases: Some(cases),
        }
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

    /// `(g_xx, g_xy, g_yy)` at a linear index.
    pub fn at(&self, i: usize) -> (f64, f64, f64) {
        (self.xx[i], self.xy[i], self.yy[i])
    }

    /// Binary case tags, present only for fields built from a boundary mask.
    pub fn cases(&self) -> Option<&[BadtCase]> {
        self.cases.as_deref()
    }

    /// `G v` at a linear index.
    #[inline]
    pub fn apply(&self, i: usize, v: [f64; 2]) -> [f64; 2] {
        match &self.cases {
            Some(cases) => cases[i].apply(v),
            None => [
                self.xx[i] * v[0] + self.xy[i] * v[1],
                self.xy[i] * v[0] + self.yy[i] * v[1],
            ],
        }
    }

    /// Eigenvalues (ascending) of the tensor at a linear index.
    pub fn eigenvalues(&self, i: usize) -> [f64; 2] {
        let (a, b, d) = self.at(i);
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - r, mean + r]
    }
}

/// Binary tensors from boundary flags.
pub fn build_badt(mask: &BoundaryMask) -> TensorField {
    let (w, h) = mask.dims();
    let cases = mask
        .a
        .as_slice()
        .iter()
        .zip(mask.b.as_slice())
        .map(|(&a, &b)| BadtCase::from_flags(a, b))
        .collect();
    TensorField::from_cases(w, h, cases)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdtParams {
    /// Magnitude coefficient in `exp(-a |∇I|^b)`.
    pub a: f64,
    /// Sharpness exponent in `exp(-a |∇I|^b)`.
    pub b: f64,
}

impl Default for AdtParams {
    fn default() -> Self {
        Self { a: 10.0, b: 0.5 }
    }
}

impl AdtParams {
    /// `exp(-a|g|^b) n nᵀ + n⊥ n⊥ᵀ` for image gradient `g`, identity where `g = 0`.
    pub fn tensor_for_gradient(&self, g: [f64; 2]) -> (f64, f64, f64) {
        self.tensor_with_perp_sign(g, 1.0)
    }

    /// Same tensor built with `n⊥ = sign · (-n_y, n_x)`; the result does not
    /// depend on the sign since `n⊥` enters quadratically.
    pub fn tensor_with_perp_sign(&self, g: [f64; 2], sign: f64) -> (f64, f64, f64) {
        let norm = g[0].hypot(g[1]);
        if norm == 0.0 {
            return (1.0, 0.0, 1.0);
        }
        let n = [g[0] / norm, g[1] / norm];
        let perp = [-sign * n[1], sign * n[0]];
        let e = (-self.a * norm.powf(self.b)).exp();
        (
            e * n[0] * n[0] + perp[0] * perp[0],
            e * n[0] * n[1] + perp[0] * perp[1],
            e * n[1] * n[1] + perp[1] * perp[1],
        )
    }
}

/// Continuous anisotropic tensors from the image gradient.
pub fn build_adt(image: &ScalarField, params: &AdtParams) -> TensorField {
    let g = image_gradient(image);
    let (w, h) = image.dims();
    let n = w * h;
    let (mut xx, mut xy, mut yy) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let (a, b, d) = params.tensor_for_gradient(g.at(i));
        xx.push(a);
        xy.push(b);
        yy.push(d);
    }
    TensorField {
        width: w,
        height: h,
        xx,
        xy,
        yy,
        cases: None,
    }
}
