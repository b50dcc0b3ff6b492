//! Back-projection of depth maps and ASCII PLY output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::boundary::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    /// Camera-frame points in meters (x right, y down, z forward).
    pub points: Vec<[f64; 3]>,
    /// Optional gray level in `[0, 1]` per point.
    pub intensity: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn backproject(
    depth: &ScalarField,
    k: &CameraIntrinsics,
    image: Option<&ScalarField>,
) -> Result<PointCloud> {
    if let Some(img) = image {
        img.require_dims(depth.dims())?;
    }
    let mut points = Vec::with_capacity(depth.valid_count());
    let mut intensity = image.map(|_| Vec::with_capacity(depth.valid_count()));
    for (x, y, d) in depth.iter_valid() {
        if !(d > 0.0) {
            return Err(Error::NonPositiveDepth { x, y, value: d });
        }
        points.push(k.backproject(x as f64, y as f64, d));
        if let (Some(out), Some(img)) = (intensity.as_mut(), image) {
            out.push(img.get(x, y).unwrap_or(0.0));
        }
    }
    Ok(PointCloud { points, intensity })
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_ply_to(cloud, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_ply_to<W: Write>(cloud: &PointCloud, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", cloud.points.len())?;
    writeln!(out, "property float x")?;
    writeln!(out, "property float y")?;
    writeln!(out, "property float z")?;
    if cloud.intensity.is_some() {
        writeln!(out, "property uchar gray")?;
    }
    writeln!(out, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        // `{}` prints the shortest representation that parses back exactly
        write!(out, "{} {} {}", p[0], p[1], p[2])?;
        if let Some(gray) = &cloud.intensity {
            write!(out, " {}", (gray[i].clamp(0.0, 1.0) * 255.0).round() as u8)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads the ASCII PLY subset written by [`write_ply`].
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let mut count = None;
    let mut has_gray = false;
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["ply"] | ["format", "ascii", "1.0"] | ["comment", ..] => {}
            ["element", "vertex", c] => {
                count = Some(
                    c.parse::<usize>()
                        .map_err(|_| parse_err(n + 1, format!("bad vertex count {c:?}")))?,
                )
            }
            ["property", _, "gray"] => has_gray = true,
            ["property", ..] => {}
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(n + 1, format!("unexpected header line {line:?}"))),
        }
    }
    if !header_done {
        return Err(parse_err(0, "missing end_header".into()));
    }
    let count = count.ok_or_else(|| parse_err(0, "missing vertex element".into()))?;
    let mut cloud = PointCloud {
        points: Vec::with_capacity(count),
        intensity: has_gray.then(Vec::new),
    };
    for (n, line) in lines.take(count) {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(n + 1, format!("not a number: {t:?}")))
            })
            .collect::<Result<_>>()?;
        let expected = if has_gray { 4 } else { 3 };
        if vals.len() != expected {
            return Err(parse_err(
                n + 1,
                format!("expected {expected} values, found {}", vals.len()),
            ));
        }
        cloud.points.push([vals[0], vals[1], vals[2]]);
        if let Some(g) = cloud.intensity.as_mut() {
            g.push(vals[3] / 255.0);
        }
    }
    if cloud.points.len() != count {
        return Err(parse_err(
            0,
            format!("expected {count} vertices, found {}", cloud.points.len()),
        ));
    }
    Ok(cloud)
}
