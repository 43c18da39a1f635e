//! Command-line flags, the TOML configuration file and their resolution.
//!
//! Precedence is flag, then configuration file, then preset, then built-in
//! default. List-valued settings (`rho`, `beta`, `n`) hold a single entry
//! for the commands that need one value.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nalgebra::DMatrix;
use reachtube::fit::{FitConfig, Geometry, LogdetMode};
use reachtube::simulate::{BenchmarkConfig, PAPER_GAMMA, PAPER_MU_TILDE};
use reachtube::{PNorm, PerturbationModel, SizeProxy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Uniform initial box and disturbances.
    #[value(name = "paper-sec6a")]
    PaperSec6a,
    /// Gaussian ingredients, with the shifted test distribution.
    #[value(name = "paper-sec6b")]
    PaperSec6b,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryArg {
    Ball,
    EllipsoidFixed,
    EllipsoidLogdet,
    Zonotope,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Penalty weight(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Confidence parameter(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    /// Half-width of the box perturbation set.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryArg>,
    /// Ball norm: 1, 2 or inf.
    #[arg(long)]
    pub p: Option<PNorm>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Every tunable setting. The same names are used as TOML keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    /// Custom benchmark system; replaces the preset's.
    pub benchmark: Option<BenchmarkConfig>,
    /// Custom shifted test distribution for `ood`.
    pub shifted: Option<BenchmarkConfig>,
    pub n: Option<Vec<usize>>,
    pub nu: Option<Vec<usize>>,
    pub horizon: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub repeats: Option<usize>,
    pub experiments: Option<usize>,
    pub geometry: Option<GeometryArg>,
    pub p: Option<PNorm>,
    pub rho: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub proxy: Option<SizeProxy>,
    /// Zonotope generator count for default generators.
    pub order: Option<usize>,
    /// Row-major shape (ellipsoid) or generator (zonotope) matrices: one
    /// for every step or a single one reused.
    pub shapes: Option<Vec<Vec<Vec<f64>>>>,
    pub tie_break: Option<bool>,
    pub tol: Option<f64>,
    pub tol_active: Option<f64>,
    pub mu_tilde: Option<f64>,
    pub radius: Option<f64>,
}

macro_rules! overlay {
    ($top:expr, $base:expr; $($f:ident),* $(,)?) => {
        Options { $($f: $top.$f.or($base.$f),)* }
    };
}

impl Options {
    pub fn from_common(c: &Common) -> Self {
        Self {
            seed: c.seed,
            rho: c.rho.clone(),
            beta: c.beta.clone(),
            gamma: c.gamma,
            geometry: c.geometry,
            p: c.p,
            preset: c.preset,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].matches('\n').count() as u64 + 1);
            CliError::Parse {
                path: path.into(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    /// `self` wins wherever it is set.
    pub fn over(self, base: Options) -> Options {
        overlay!(self, base;
            preset, seed, benchmark, shifted, n, nu, horizon, n_train, n_test, repeats,
            experiments, geometry, p, rho, beta, gamma, proxy, order, shapes, tie_break, tol,
            tol_active, mu_tilde, radius)
    }

    /// Flags over the configuration file named by `--config`, if any.
    pub fn resolve(flags: Options, common: &Common) -> Result<Options> {
        match &common.config {
            Some(path) => Ok(flags.over(Options::load(path)?)),
            None => Ok(flags),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn rho(&self) -> Result<f64> {
        single("rho", self.rho.as_deref(), 1.0)
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.rho.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0])
    }

    pub fn beta(&self) -> Result<f64> {
        let b = single("beta", self.beta.as_deref(), 1e-3)?;
        check_beta(b)?;
        Ok(b)
    }

    pub fn betas(&self) -> Result<Vec<f64>> {
        let bs = self.beta.clone().unwrap_or_else(|| vec![1e-3]);
        bs.iter().try_for_each(|b| check_beta(*b))?;
        Ok(bs)
    }

    pub fn tol_active(&self) -> Result<f64> {
        let t = self.tol_active.unwrap_or(reachtube::certify::DEFAULT_TOL_ACTIVE);
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("tol_active = {t} must be nonnegative")));
        }
        Ok(t)
    }

    pub fn positive(&self, name: &str, v: Option<usize>, default: usize) -> Result<usize> {
        let v = v.unwrap_or(default);
        if v == 0 {
            return Err(CliError::Usage(format!("{name} must be at least 1")));
        }
        Ok(v)
    }

    /// The benchmark system: custom, preset (default `paper-sec6a`), then
    /// seed and horizon overrides.
    pub fn system(&self) -> BenchmarkConfig {
        let base = self.benchmark.clone().unwrap_or_else(|| match self.preset {
            Some(Preset::PaperSec6b) => BenchmarkConfig::paper_sec6b(0),
            _ => BenchmarkConfig::paper_sec6a(0),
        });
        self.adjust(base)
    }

    pub fn shifted_system(&self) -> Result<BenchmarkConfig> {
        let base = match (&self.shifted, self.preset) {
            (Some(s), _) => s.clone(),
            (None, Some(Preset::PaperSec6b)) => BenchmarkConfig::paper_sec6b_shifted(0),
            _ => {
                return Err(CliError::Usage(
                    "no shifted distribution: use --preset paper-sec6b or a [shifted] table".into(),
                ))
            }
        };
        Ok(self.adjust(base))
    }

    fn adjust(&self, mut cfg: BenchmarkConfig) -> BenchmarkConfig {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        cfg
    }

    /// Box perturbation of half-width `gamma`; presets default to the
    /// benchmark value and everything else to no perturbation.
    pub fn perturbation(&self, dim: usize) -> Result<PerturbationModel> {
        let gamma = self
            .gamma
            .unwrap_or(if self.preset.is_some() { PAPER_GAMMA } else { 0.0 });
        if gamma == 0.0 {
            return Ok(PerturbationModel::none());
        }
        Ok(PerturbationModel::uniform_box(dim, gamma)?)
    }

    pub fn mu_tilde(&self) -> Result<f64> {
        match (self.mu_tilde, self.preset) {
            (Some(m), _) => Ok(m),
            (None, Some(Preset::PaperSec6b)) => Ok(PAPER_MU_TILDE),
            _ => Err(CliError::Usage("mu_tilde is required without --preset paper-sec6b".into())),
        }
    }

    pub fn fit_config(&self, rho: f64, dim: usize) -> Result<FitConfig> {
        let shapes = self
            .shapes
            .iter()
            .flatten()
            .map(|rows| matrix(rows))
            .collect::<Result<Vec<_>>>()?;
        let geometry = match self.geometry.unwrap_or(GeometryArg::Ball) {
            GeometryArg::Ball => Geometry::Ball {
                p: self.p.unwrap_or(PNorm::L2),
            },
            GeometryArg::EllipsoidFixed => Geometry::EllipsoidFixed { shapes },
            GeometryArg::EllipsoidLogdet => Geometry::EllipsoidLogdet {
                mode: LogdetMode::Diagonal,
            },
            GeometryArg::Zonotope => Geometry::Zonotope {
                generators: shapes,
                order: self.order,
            },
        };
        let mut cfg = FitConfig::new(geometry, rho).with_perturbation(self.perturbation(dim)?);
        if let Some(proxy) = self.proxy {
            cfg = cfg.with_proxy(proxy);
        }
        if let Some(on) = self.tie_break {
            cfg = cfg.with_tie_break(on);
        }
        if let Some(tol) = self.tol {
            cfg = cfg.with_tol(tol);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn single<T: Copy + std::fmt::Display>(name: &str, v: Option<&[T]>, default: T) -> Result<T> {
    match v {
        None => Ok(default),
        Some([x]) => Ok(*x),
        Some(list) => Err(CliError::Usage(format!(
            "this command takes a single {name}, got {} values",
            list.len()
        ))),
    }
}

fn check_beta(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("beta = {b} must lie in (0, 1)")))
    }
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Usage("shape matrices must be nonempty and rectangular".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
