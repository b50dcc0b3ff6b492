//! Discrete fields on a pixel grid and the difference operators used by the
//! rest of the crate.
//!
//! Pixels are addressed as `(x, y)` with `x` the column and `y` the row;
//! storage is row-major, so the linear index of `(x, y)` is `y * width + x`.

use crate::error::{Error, Result};

/// Value stored at pixels that carry no data.
pub const INVALID: f64 = f64::NAN;

/// A real-valued field with a per-pixel validity mask.
///
/// Invalid pixels hold [`INVALID`] and must not be read as data. Equality
/// compares validity and the valid values only.
#[derive(Debug, Clone)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ScalarField {
    /// A fully valid field filled with `value`.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            width,
            height,
            values: vec![value; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// A field where no pixel is valid.
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        Self {
            width,
            height,
            values: vec![INVALID; width * height],
            valid: vec![false; width * height],
        }
    }

    /// A fully valid field from row-major values.
    pub fn from_vec(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("grid must be at least 1x1".into()));
        }
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at pixel ({}, {})",
                i % width,
                i / width
            )));
        }
        let valid = vec![true; values.len()];
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// Builds a field from optional per-pixel values; `None` marks invalid.
    pub fn from_options(width: usize, height: usize, values: Vec<Option<f64>>) -> Result<Self> {
        let mut field = Self::empty(width, height);
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        for (i, v) in values.into_iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite value at pixel ({}, {})",
                        i % width,
                        i / width
                    )));
                }
                field.values[i] = v;
                field.valid[i] = true;
            }
        }
        Ok(field)
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    /// The value at `(x, y)` if the pixel is valid.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = self.index(x, y);
        self.valid[i].then_some(self.values[i])
    }

    pub fn get_index(&self, i: usize) -> Option<f64> {
        self.valid[i].then_some(self.values[i])
    }

    /// Sets a finite value and marks the pixel valid.
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        let i = self.index(x, y);
        self.set_index(i, value);
    }

    pub fn set_index(&mut self, i: usize, value: f64) {
        assert!(value.is_finite(), "field values must be finite");
        self.values[i] = value;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.invalidate_index(i);
    }

    pub fn invalidate_index(&mut self, i: usize) {
        self.values[i] = INVALID;
        self.valid[i] = false;
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[self.index(x, y)]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    /// Raw row-major values, with [`INVALID`] at invalid pixels.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the raw values of a fully valid field.
    ///
    /// Panics if the field has invalid pixels, since writes through this
    /// slice cannot maintain the mask.
    pub fn values_mut(&mut self) -> &mut [f64] {
        assert!(
            self.is_fully_valid(),
            "values_mut on a partially valid field"
        );
        &mut self.values
    }

    pub fn is_fully_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Iterates `(x, y, value)` over valid pixels in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.width;
        self.values
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, &ok))| ok)
            .map(move |(i, (&v, _))| (i % w, i / w, v))
    }

    /// Applies `f` to every valid value; invalid pixels stay invalid.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut out = self.clone();
        for (v, &ok) in out.values.iter_mut().zip(&self.valid) {
            if ok {
                *v = f(*v);
                assert!(v.is_finite(), "map produced a non-finite value");
            }
        }
        out
    }

    pub(crate) fn require_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }

    pub(crate) fn require_fully_valid(&self, what: &str) -> Result<()> {
        if let Some(i) = self.valid.iter().position(|&v| !v) {
            return Err(Error::InvalidInput(format!(
                "{what} must be fully valid; pixel ({}, {}) is not",
                i % self.width,
                i / self.width
            )));
        }
        Ok(())
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.dims() == other.dims()
            && self.valid == other.valid
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.valid)
                .all(|((a, b), &ok)| !ok || a == b)
    }
}

/// A per-pixel boolean field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} flags for a {width}x{height} grid",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
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

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Two fully valid channels sharing dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            x: ScalarField::zeros(width, height),
            y: ScalarField::zeros(width, height),
        }
    }

    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        y.require_dims(x.dims())?;
        x.require_fully_valid("vector x-channel")?;
        y.require_fully_valid("vector y-channel")?;
        Ok(Self { x, y })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.x.dims()
    }

    pub fn at(&self, i: usize) -> [f64; 2] {
        [self.x.values()[i], self.y.values()[i]]
    }
}

/// The four partial derivatives of a vector field:
/// `xx = ∂vx/∂x`, `xy = ∂vx/∂y`, `yx = ∂vy/∂x`, `yy = ∂vy/∂y`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianField {
    pub xx: ScalarField,
    pub xy: ScalarField,
    pub yx: ScalarField,
    pub yy: ScalarField,
}

impl JacobianField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            xx: ScalarField::zeros(width, height),
            xy: ScalarField::zeros(width, height),
            yx: ScalarField::zeros(width, height),
            yy: ScalarField::zeros(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.xx.dims()
    }

    pub fn at(&self, i: usize) -> [f64; 4] {
        [
            self.xx.values()[i],
            self.xy.values()[i],
            self.yx.values()[i],
            self.yy.values()[i],
        ]
    }
}

/// Forward differences with a zero derivative on the last column / row.
pub fn forward_gradient(f: &ScalarField) -> VectorField {
    assert!(
        f.is_fully_valid(),
        "forward_gradient needs a fully valid field"
    );
    let (w, h) = f.dims();
    let mut out = VectorField::zeros(w, h);
    forward_gradient_slices(w, h, f.values(), out.x.values_mut(), out.y.values_mut());
    out
}

/// Negative adjoint of [`forward_gradient`] (backward differences).
pub fn divergence(p: &VectorField) -> ScalarField {
    let (w, h) = p.dims();
    let mut out = ScalarField::zeros(w, h);
    divergence_slices(w, h, p.x.values(), p.y.values(), out.values_mut());
    out
}

/// Central differences inside the image, one-sided differences on the border.
pub fn image_gradient(image: &ScalarField) -> VectorField {
    assert!(
        image.is_fully_valid(),
        "image_gradient needs a fully valid image"
    );
    let (w, h) = image.dims();
    let f = image.values();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = central(w, x, |k| f[y * w + k]);
            gy[i] = central(h, y, |k| f[k * w + x]);
        }
    }
    VectorField {
        x: ScalarField::from_vec(w, h, gx).expect("finite gradient"),
        y: ScalarField::from_vec(w, h, gy).expect("finite gradient"),
    }
}

fn central(n: usize, k: usize, at: impl Fn(usize) -> f64) -> f64 {
    if n < 2 {
        0.0
    } else if k == 0 {
        at(1) - at(0)
    } else if k == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        (at(k + 1) - at(k - 1)) * 0.5
    }
}

#[inline]
pub(crate) fn dx_forward(f: &[f64], w: usize, x: usize, i: usize) -> f64 {
    if x + 1 < w {
        f[i + 1] - f[i]
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn dy_forward(f: &[f64], w: usize, h: usize, y: usize, i: usize) -> f64 {
    if y + 1 < h {
        f[i + w] - f[i]
    } else {
        0.0
    }
}

/// Backward-difference divergence at one pixel, matching [`dx_forward`] and
/// [`dy_forward`] so that `<∇f, p> = -<f, div p>` holds exactly.
#[inline]
pub(crate) fn div_at(
    px: &[f64],
    py: &[f64],
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    i: usize,
) -> f64 {
    let mut d = 0.0;
    if x + 1 < w {
        d += px[i];
    }
    if x > 0 {
        d -= px[i - 1];
    }
    if y + 1 < h {
        d += py[i];
    }
    if y > 0 {
        d -= py[i - w];
    }
    d
}

pub(crate) fn forward_gradient_slices(
    w: usize,
    h: usize,
    f: &[f64],
    gx: &mut [f64],
    gy: &mut [f64],
) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = dx_forward(f, w, x, i);
            gy[i] = dy_forward(f, w, h, y, i);
        }
    }
}

pub(crate) fn divergence_slices(w: usize, h: usize, px: &[f64], py: &[f64], out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            out[i] = div_at(px, py, w, h, x, y, i);
        }
    }
}
