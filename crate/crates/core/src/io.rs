//! File formats: depth and image PNGs, boundary-mask PNGs, seed-index
//! sidecars, intrinsics text files and energy traces.
//!
//! Depth PNGs are 16-bit grayscale with `meters = value / 256` and `0`
//! meaning "no measurement".

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::boundary::{BoundaryMask, CameraIntrinsics};
use crate::error::{Error, Result};
use crate::grid::{Mask, ScalarField};

pub const DEPTH_SCALE: f64 = 256.0;

/// Fig.-style palette: white, blue, red, green for none, A, B, A and B.
pub const MASK_COLORS: [[u8; 3]; 4] = [[255, 255, 255], [0, 0, 255], [255, 0, 0], [0, 255, 0]];

fn open_image(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn save_image(img: DynamicImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a grayscale or color image, converted to luma in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sixteen_bit = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let values: Vec<f64> = if sixteen_bit {
        img.into_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect()
    } else {
        img.into_luma8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect()
    };
    ScalarField::from_vec(w, h, values)
}

pub fn save_image_gray8(image: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = image.dims();
    let raw: Vec<u8> = image
        .values()
        .iter()
        .zip(image.valid_mask())
        .map(|(&v, &ok)| {
            if ok {
                (v.clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, raw).expect("buffer size");
    save_image(DynamicImage::ImageLuma8(buf), path.as_ref())
}

/// Loads a 16-bit depth PNG; zero pixels are invalid.
pub fn load_depth(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let img = match open_image(path)? {
        DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::InvalidInput(format!(
                "{}: expected a 16-bit grayscale depth PNG, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img
        .into_raw()
        .into_iter()
        .map(|v| (v != 0).then(|| v as f64 / DEPTH_SCALE))
        .collect();
    ScalarField::from_options(w, h, values)
}

/// Writes valid depths as `round(d * 256)` clamped to `[1, 65535]`, invalid as 0.
pub fn save_depth(depth: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = depth.dims();
    let raw: Vec<u16> = depth
        .values()
        .iter()
        .zip(depth.valid_mask())
        .map(|(&d, &ok)| {
            if ok {
                (d * DEPTH_SCALE).round().clamp(1.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    let buf = ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, raw).expect("buffer size");
    save_image(DynamicImage::ImageLuma16(buf), path.as_ref())
}

pub fn save_boundary_mask(mask: &BoundaryMask, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = mask.dims();
    let mut raw = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let (a, b) = mask.flags(i);
        raw.extend_from_slice(&MASK_COLORS[a as usize + 2 * b as usize]);
    }
    let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(w as u32, h as u32, raw).expect("buffer size");
    save_image(DynamicImage::ImageRgb8(buf), path.as_ref())
}

pub fn load_boundary_mask(path: impl AsRef<Path>) -> Result<BoundaryMask> {
    let path = path.as_ref();
    let img = open_image(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut a = Mask::new(w, h, false);
    let mut b = Mask::new(w, h, false);
    for (x, y, px) in img.enumerate_pixels() {
        let code = MASK_COLORS.iter().position(|c| *c == px.0).ok_or_else(|| {
            Error::InvalidInput(format!(
                "{}: pixel ({x}, {y}) has color {:?}, not a boundary-mask color",
                path.display(),
                px.0
            ))
        })?;
        a.set(x as usize, y as usize, code & 1 == 1);
        b.set(x as usize, y as usize, code & 2 == 2);
    }
    BoundaryMask::new(a, b)
}

/// Writes seed indices as little-endian `u32`, row-major.
pub fn save_seed_indices(seeds: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(seeds.len() * 4);
    for &s in seeds {
        let s = u32::try_from(s)
            .map_err(|_| Error::InvalidInput(format!("seed index {s} exceeds u32")))?;
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_seed_indices(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::InvalidInput(format!(
            "{}: {} bytes is not a whole number of u32 indices",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect())
}

/// Reads `fx fy cx cy`, or a row-major 3×3 camera matrix.
pub fn load_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() {
                continue;
            }
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no + 1,
                message: format!("not a number: {tok:?}"),
            })?;
            values.push(v);
        }
    }
    let (fx, fy, cx, cy) = match values.as_slice() {
        [fx, fy, cx, cy] => (*fx, *fy, *cx, *cy),
        [fx, _, cx, _, fy, cy, _, _, _] => (*fx, *fy, *cx, *cy),
        other => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!(
                    "expected 4 values (fx fy cx cy) or 9 (3x3 matrix), found {}",
                    other.len()
                ),
            })
        }
    };
    CameraIntrinsics::new(fx, fy, cx, cy)
}

/// One energy value per line.
pub fn save_trace(trace: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for e in trace {
        writeln!(out, "{e}").map_err(|err| Error::io(path, err))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
