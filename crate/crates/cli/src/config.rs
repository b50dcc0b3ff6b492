//! Hyper-parameters from flags and an optional `key=value` file.
//!
//! Keys are the long flag names without the leading dashes (`lambda-s=0.3`).
//! A flag on the command line wins over the same key in the file, and the
//! file wins over the built-in default.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use badt_core::pipeline::{PipelineConfig, Regularizer};
use badt_core::{AdtParams, GroundParams, IgnnsParams, OcclusionFilterParams, SolverParams};
use clap::Args;

use crate::CliError;

const KEYS: &[&str] = &[
    "c",
    "t",
    "lambda-s",
    "lambda-a",
    "lambda-d",
    "tau-p",
    "tau-q",
    "tau-u",
    "tau-v",
    "iterations",
    "weight-exponent",
    "n-ransac",
    "t-ransac",
    "ransac-seed",
    "r-occ-coeff",
    "t-occ",
    "adt-a",
    "adt-b",
    "preproc",
    "no-ground-filter",
    "adt",
];

#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// Plain-text key=value file; command-line flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// IGNNS path cost added to the squared image gradient [default: 0.01].
    #[arg(long)]
    pub c: Option<f64>,
    /// Boundary threshold in meters [default: 2.0].
    #[arg(long)]
    pub t: Option<f64>,
    /// First-order TGV weight [default: 0.2].
    #[arg(long)]
    pub lambda_s: Option<f64>,
    /// Second-order TGV weight [default: 1.6].
    #[arg(long)]
    pub lambda_a: Option<f64>,
    /// Data weight [default: 0.2].
    #[arg(long)]
    pub lambda_d: Option<f64>,
    /// Dual step for p [default: 1/sqrt(8)].
    #[arg(long)]
    pub tau_p: Option<f64>,
    /// Dual step for q [default: 1/sqrt(8)].
    #[arg(long)]
    pub tau_q: Option<f64>,
    /// Primal step for u [default: 1/sqrt(12)].
    #[arg(long)]
    pub tau_u: Option<f64>,
    /// Primal step for v [default: 1/sqrt(12)].
    #[arg(long)]
    pub tau_v: Option<f64>,
    /// Solver iterations [default: 200].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Data weight exponent, w = dbar^k [default: 1].
    #[arg(long)]
    pub weight_exponent: Option<f64>,
    /// RANSAC iterations [default: 1000].
    #[arg(long)]
    pub n_ransac: Option<usize>,
    /// RANSAC inlier distance and ground height in meters [default: 0.2].
    #[arg(long)]
    pub t_ransac: Option<f64>,
    /// RANSAC random seed [default: 0].
    #[arg(long)]
    pub ransac_seed: Option<u64>,
    /// Occlusion-filter radius coefficient, r = coeff / d [default: 256].
    #[arg(long)]
    pub r_occ_coeff: Option<f64>,
    /// Occlusion-filter depth gap in meters [default: 2.0].
    #[arg(long)]
    pub t_occ: Option<f64>,
    /// ADT magnitude coefficient [default: 10].
    #[arg(long)]
    pub adt_a: Option<f64>,
    /// ADT sharpness exponent [default: 0.5].
    #[arg(long)]
    pub adt_b: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Switches {
    pub preproc: bool,
    pub no_ground_filter: bool,
    pub adt: bool,
}

pub fn read_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected key=value",
                path.display(),
                n + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                n + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct Resolver {
    file: HashMap<String, String>,
}

impl Resolver {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Config(format!("config key {key}: cannot parse {raw:?}"))),
            None => Ok(default),
        }
    }

    fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        self.get(None, key, false)
    }
}

impl HyperArgs {
    /// Full configuration after merging flags, file and defaults.
    pub fn resolve(&self, switches: Switches) -> Result<(PipelineConfig, Switches), CliError> {
        let file = match &self.config {
            Some(path) => read_config_file(path)?,
            None => HashMap::new(),
        };
        let r = Resolver { file };
        let d = PipelineConfig::default();
        let s = SolverParams::default();
        let g = GroundParams::default();
        let o = OcclusionFilterParams::default();
        let a = AdtParams::default();

        let switches = Switches {
            preproc: r.switch(switches.preproc, "preproc")?,
            no_ground_filter: r.switch(switches.no_ground_filter, "no-ground-filter")?,
            adt: r.switch(switches.adt, "adt")?,
        };
        let occlusion = OcclusionFilterParams {
            r_occ_coeff: r.get(self.r_occ_coeff, "r-occ-coeff", o.r_occ_coeff)?,
            t_occ: r.get(self.t_occ, "t-occ", o.t_occ)?,
        };
        let ground = GroundParams {
            n_ransac: r.get(self.n_ransac, "n-ransac", g.n_ransac)?,
            t_ransac: r.get(self.t_ransac, "t-ransac", g.t_ransac)?,
        };
        let adt = AdtParams {
            a: r.get(self.adt_a, "adt-a", a.a)?,
            b: r.get(self.adt_b, "adt-b", a.b)?,
        };
        let config = PipelineConfig {
            occlusion: switches.preproc.then_some(occlusion),
            ignns: IgnnsParams {
                c: r.get(self.c, "c", d.ignns.c)?,
            },
            boundary_threshold: r.get(self.t, "t", d.boundary_threshold)?,
            ground: (!switches.no_ground_filter).then_some(ground),
            ransac_seed: r.get(self.ransac_seed, "ransac-seed", d.ransac_seed)?,
            regularizer: if switches.adt {
                Regularizer::Adt(adt)
            } else {
                Regularizer::Badt
            },
            solver: SolverParams {
                lambda_s: r.get(self.lambda_s, "lambda-s", s.lambda_s)?,
                lambda_a: r.get(self.lambda_a, "lambda-a", s.lambda_a)?,
                lambda_d: r.get(self.lambda_d, "lambda-d", s.lambda_d)?,
                tau_p: r.get(self.tau_p, "tau-p", s.tau_p)?,
                tau_q: r.get(self.tau_q, "tau-q", s.tau_q)?,
                tau_u: r.get(self.tau_u, "tau-u", s.tau_u)?,
                tau_v: r.get(self.tau_v, "tau-v", s.tau_v)?,
                iterations: r.get(self.iterations, "iterations", s.iterations)?,
                weight_exponent: r.get(
                    self.weight_exponent,
                    "weight-exponent",
                    s.weight_exponent,
                )?,
            },
        };
        Ok((config, switches))
    }
}
