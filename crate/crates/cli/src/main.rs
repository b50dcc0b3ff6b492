//! `badt`: depth completion from a grayscale image and sparse LIDAR depth.

mod config;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use badt_core::boundary::ground_labels_from_seeds;
use badt_core::eval::{mae, sweep, write_sweep_csv, SweepParameter};
use badt_core::io::{
    load_boundary_mask, load_depth, load_image, load_intrinsics, load_seed_indices,
    save_boundary_mask, save_depth, save_seed_indices, save_trace,
};
use badt_core::pipeline::{self, PipelineConfig, Scene};
use badt_core::pointcloud::{backproject, write_ply};
use badt_core::{
    detect_boundaries, filter_boundaries, ignns, remove_occluded_background, BoundaryMask,
    ScalarField,
};
use clap::{Parser, Subcommand, ValueEnum};

use config::{HyperArgs, Switches};

#[derive(Debug, Parser)]
#[command(
    name = "badt",
    version,
    about = "Depth completion with binary anisotropic diffusion tensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Remove background points occluded by nearer ones.
    Preproc {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Densify sparse depth into a piecewise-constant map.
    Ignns {
        /// Guide image PNG, 8- or 16-bit, gray or color.
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        /// Piecewise-constant depth PNG.
        #[arg(long)]
        out: PathBuf,
        /// Nearest-seed index sidecar (little-endian u32 per pixel).
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Detect occlusion boundaries, optionally dropping those on the ground.
    Boundaries {
        /// Piecewise-constant depth PNG.
        #[arg(long)]
        dbar: PathBuf,
        /// Boundary-mask PNG.
        #[arg(long)]
        out: PathBuf,
        /// Sparse depth the densified map came from (ground filter only).
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Seed sidecar written by `ignns` (ground filter only).
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        #[arg(long)]
        no_ground_filter: bool,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Full pipeline, or its tail when intermediate files are given.
    Complete {
        /// Guide image PNG, 8- or 16-bit, gray or color.
        #[arg(long)]
        image: PathBuf,
        /// Sparse depth PNG; not needed with both --dbar and --mask.
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Dense depth PNG to write.
        #[arg(long)]
        out: PathBuf,
        /// `fx fy cx cy` or a 3x3 camera matrix; enables ground filtering.
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        /// Start from this piecewise-constant depth instead of running IGNNS.
        #[arg(long)]
        dbar: Option<PathBuf>,
        /// Start from this boundary mask (requires --dbar).
        #[arg(long, requires = "dbar")]
        mask: Option<PathBuf>,
        /// Seed sidecar for ground filtering with --dbar.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Write the energy after each iteration, one value per line.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Run the occlusion filter first.
        #[arg(long)]
        preproc: bool,
        /// Keep boundaries on the ground.
        #[arg(long)]
        no_ground_filter: bool,
        /// Use the image-driven anisotropic tensor instead of boundary tensors.
        #[arg(long)]
        adt: bool,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Back-project a depth map to an ASCII PLY point cloud.
    Pointcloud {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        /// Adds a gray value per point.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean absolute error in millimeters over valid ground-truth pixels.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// MAE for a range of values of one parameter, as CSV.
    Sweep {
        /// Guide image PNG, 8- or 16-bit, gray or color.
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        preproc: bool,
        #[arg(long)]
        no_ground_filter: bool,
        #[arg(long)]
        adt: bool,
        #[command(flatten)]
        hyper: HyperArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    C,
    T,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Dimension(String),
    Input(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Dimension(_) => 4,
            CliError::Input(_) => 5,
            CliError::Numeric(_) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "file error: {m}"),
            CliError::Dimension(m) => write!(f, "dimension mismatch: {m}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<badt_core::Error> for CliError {
    fn from(e: badt_core::Error) -> Self {
        use badt_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } | E::Image { .. } => CliError::Io(msg),
            E::DimensionMismatch { .. } => CliError::Dimension(msg),
            E::NonFinite { .. } => CliError::Numeric(msg),
            E::Sweep { value, source } => match CliError::from(*source) {
                CliError::Config(m) => CliError::Config(format!("sweep value {value}: {m}")),
                CliError::Io(m) => CliError::Io(format!("sweep value {value}: {m}")),
                CliError::Dimension(m) => CliError::Dimension(format!("sweep value {value}: {m}")),
                CliError::Input(m) => CliError::Input(format!("sweep value {value}: {m}")),
                CliError::Numeric(m) => CliError::Numeric(format!("sweep value {value}: {m}")),
            },
            _ => CliError::Input(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("badt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn warn(msg: &str) {
    eprintln!("badt: warning: {msg}");
}

/// Drops ground filtering, with a warning, when there is no camera model.
fn without_ground_if_uncalibrated(config: &mut PipelineConfig, has_intrinsics: bool) {
    if config.ground.is_some() && !has_intrinsics {
        warn("no --intrinsics given; skipping ground filtering");
        config.ground = None;
    }
}

/// Boundaries from a piecewise-constant map, ground-filtered from the
/// sparse depth and seed sidecar when configured.
fn boundaries_from_files(
    dbar: &ScalarField,
    depth: Option<&Path>,
    seeds: Option<&Path>,
    intrinsics: Option<&Path>,
    config: &PipelineConfig,
) -> Result<BoundaryMask, CliError> {
    let raw = detect_boundaries(dbar, config.boundary_threshold)?;
    let (Some(params), Some(k)) = (&config.ground, intrinsics) else {
        return Ok(raw);
    };
    let (Some(depth), Some(seeds)) = (depth, seeds) else {
        return Err(CliError::Config(
            "ground filtering needs --depth and --seeds alongside --intrinsics (or pass --no-ground-filter)".into(),
        ));
    };
    let k = load_intrinsics(k)?;
    let depth = load_depth(depth)?;
    if depth.dims() != dbar.dims() {
        return Err(CliError::Dimension(format!(
            "sparse depth is {:?}, piecewise-constant depth is {:?}",
            depth.dims(),
            dbar.dims()
        )));
    }
    let seeds = load_seed_indices(seeds)?;
    let ground = ground_labels_from_seeds(&depth, &k, &seeds, params, config.ransac_seed)?;
    Ok(filter_boundaries(&raw, &ground)?)
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required here")))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Preproc { depth, out, hyper } => {
            let (config, _) = hyper.resolve(Switches {
                preproc: true,
                ..Switches::default()
            })?;
            let params = config.occlusion.expect("preproc switch is set");
            let depth = load_depth(&depth)?;
            let filtered = remove_occluded_background(&depth, &params)?;
            save_depth(&filtered, &out)?;
            eprintln!(
                "badt: kept {} of {} points",
                filtered.valid_count(),
                depth.valid_count()
            );
        }
        Command::Ignns {
            image,
            depth,
            out,
            seeds,
            hyper,
        } => {
            let (config, _) = hyper.resolve(Switches::default())?;
            let image = load_image(&image)?;
            let depth = load_depth(&depth)?;
            let (nn, dbar) = ignns(&image, &depth, &config.ignns)?;
            save_depth(&dbar, &out)?;
            if let Some(path) = seeds {
                save_seed_indices(nn.seed_indices(), &path)?;
            }
        }
        Command::Boundaries {
            dbar,
            out,
            depth,
            seeds,
            intrinsics,
            no_ground_filter,
            hyper,
        } => {
            let (mut config, _) = hyper.resolve(Switches {
                no_ground_filter,
                ..Switches::default()
            })?;
            without_ground_if_uncalibrated(&mut config, intrinsics.is_some());
            let dbar = load_depth(&dbar)?;
            let mask = boundaries_from_files(
                &dbar,
                depth.as_deref(),
                seeds.as_deref(),
                intrinsics.as_deref(),
                &config,
            )?;
            save_boundary_mask(&mask, &out)?;
        }
        Command::Complete {
            image,
            depth,
            out,
            intrinsics,
            dbar,
            mask,
            seeds,
            trace,
            preproc,
            no_ground_filter,
            adt,
            hyper,
        } => {
            let (mut config, _) = hyper.resolve(Switches {
                preproc,
                no_ground_filter,
                adt,
            })?;
            without_ground_if_uncalibrated(&mut config, intrinsics.is_some());
            let image = load_image(&image)?;
            let want_trace = trace.is_some();
            let completion = match (dbar, mask) {
                (None, _) => {
                    let scene = Scene {
                        image,
                        depth: load_depth(require(&depth, "depth")?)?,
                        intrinsics: intrinsics.as_deref().map(load_intrinsics).transpose()?,
                    };
                    pipeline::run_with_trace(&scene, &config, want_trace)?.completion
                }
                (Some(dbar), mask) => {
                    if config.occlusion.is_some() {
                        warn("--preproc has no effect when starting from --dbar");
                    }
                    let dbar = load_depth(&dbar)?;
                    if dbar.dims() != image.dims() {
                        return Err(CliError::Dimension(format!(
                            "image is {:?}, piecewise-constant depth is {:?}",
                            image.dims(),
                            dbar.dims()
                        )));
                    }
                    let mask = match mask {
                        Some(path) => load_boundary_mask(&path)?,
                        None => boundaries_from_files(
                            &dbar,
                            depth.as_deref(),
                            seeds.as_deref(),
                            intrinsics.as_deref(),
                            &config,
                        )?,
                    };
                    if mask.dims() != dbar.dims() {
                        return Err(CliError::Dimension(format!(
                            "boundary mask is {:?}, piecewise-constant depth is {:?}",
                            mask.dims(),
                            dbar.dims()
                        )));
                    }
                    let tensor = pipeline::tensor(&image, &mask, &config.regularizer);
                    pipeline::solve(&dbar, &tensor, &config.solver, want_trace)?
                }
            };
            save_depth(&completion.depth, &out)?;
            if let Some(path) = trace {
                save_trace(&completion.energy_trace, &path)?;
            }
        }
        Command::Pointcloud {
            depth,
            intrinsics,
            image,
            out,
        } => {
            let depth = load_depth(&depth)?;
            let k = load_intrinsics(&intrinsics)?;
            let image = image.as_deref().map(load_image).transpose()?;
            let cloud = backproject(&depth, &k, image.as_ref())?;
            write_ply(&cloud, &out)?;
        }
        Command::Eval { pred, gt } => {
            let pred = load_depth(&pred)?;
            let gt = load_depth(&gt)?;
            println!("{:.3}", mae(&pred, &gt)?);
        }
        Command::Sweep {
            image,
            depth,
            gt,
            intrinsics,
            param,
            values,
            out,
            preproc,
            no_ground_filter,
            adt,
            hyper,
        } => {
            let (mut config, _) = hyper.resolve(Switches {
                preproc,
                no_ground_filter,
                adt,
            })?;
            without_ground_if_uncalibrated(&mut config, intrinsics.is_some());
            let scene = Scene {
                image: load_image(&image)?,
                depth: load_depth(&depth)?,
                intrinsics: intrinsics.as_deref().map(load_intrinsics).transpose()?,
            };
            let gt = load_depth(&gt)?;
            let parameter = match param {
                SweepParam::C => SweepParameter::C,
                SweepParam::T => SweepParameter::T,
            };
            let rows = sweep(&scene, &gt, &config, parameter, &values)?;
            match out {
                Some(path) => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&rows, &mut buf).expect("writing to memory");
                    fs::write(&path, buf)
                        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    write_sweep_csv(&rows, &mut lock)
                        .and_then(|_| lock.flush())
                        .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
                }
            }
        }
    }
    Ok(())
}
