//! Run configuration: a single human-editable TOML file.
//!
//! Unknown keys are rejected and every constraint is validated before any
//! computation starts. The seed resolution order is: the
//! `RWMH_CERTIFY_SEED` environment variable, then the `--seed` flag, then
//! the `[pipeline] seed` key, then the default.
//!
//! ```toml
//! [target]
//! preset = "standard-normal"   # standard-normal | gaussian-mixture | logistic | poisson
//! dim = 1                      # standard-normal
//! # a = 0.5                    # gaussian-mixture
//! # dataset = "data.csv"       # logistic / poisson (CSV: y,x1..xp)
//! # eta = 0.99                 # curvature constant override
//! # prior-lambda1 = 1.0        # poisson: isotropic Gaussian prior strength
//!
//! [proposal]
//! family = "gaussian"          # gaussian | laplace
//! scale = 1.0
//!
//! [pipeline]
//! seed = 123456789
//! mc-samples = 100000
//! # eps-alpha = 0.2            # cone aperture override
//! # k = 0.3333333333           # cone depth override
//! # candidates = [[0.0], [2.0]]
//! # spectral = { m = 1.0, l = 1.0 }
//!
//! [grid]
//! lo = [-8.0]
//! hi = [8.0]
//! cells = [161]
//!
//! [output]
//! dir = "out"
//! ```

use crate::error::{Error, Result};
use crate::geometry::ConeParams;
use crate::oracle::Grid;
use crate::proposal::RadialProposal;
use crate::rates::SpectralTargetInfo;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetConfig,
    pub proposal: ProposalConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "preset")]
pub enum TargetConfig {
    StandardNormal {
        dim: usize,
        #[serde(default)]
        eta: Option<f64>,
    },
    GaussianMixture {
        a: f64,
    },
    Logistic {
        dataset: PathBuf,
        #[serde(default)]
        eta: Option<f64>,
    },
    Poisson {
        dataset: PathBuf,
        #[serde(default, rename = "prior-lambda1")]
        prior_lambda1: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ProposalConfig {
    pub family: ProposalFamilyConfig,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalFamilyConfig {
    Gaussian,
    Laplace,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default)]
    pub eps_alpha: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub candidates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub spectral: Option<SpectralConfig>,
    #[serde(default = "default_true")]
    pub log_concavity: bool,
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default = "default_directions")]
    pub n_directions: usize,
    #[serde(default = "default_chain_steps")]
    pub chain_steps: usize,
    #[serde(default)]
    pub chain_initial: Option<Vec<f64>>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_minor_x")]
    pub minor_x_points: usize,
    #[serde(default = "default_minor_sets")]
    pub minor_sets: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub m: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

fn default_seed() -> u64 {
    123_456_789
}
fn default_mc() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}
fn default_directions() -> usize {
    64
}
fn default_chain_steps() -> usize {
    100_000
}
fn default_record_every() -> usize {
    1
}
fn default_minor_x() -> usize {
    50
}
fn default_minor_sets() -> usize {
    200
}

impl Default for PipelineConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty pipeline config")
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.proposal.scale > 0.0) || !self.proposal.scale.is_finite() {
            return Err(Error::Config(format!(
                "proposal.scale must be positive and finite, got {}",
                self.proposal.scale
            )));
        }
        if let Some(eps_alpha) = self.pipeline.eps_alpha {
            if !(eps_alpha > 0.0 && eps_alpha < 1.0 / 3.0) {
                return Err(Error::Config(format!(
                    "pipeline.eps-alpha = {eps_alpha} violates the cone constraint \
                     0 < eps_alpha < min(eps_alpha_tilde, 1/3)"
                )));
            }
        }
        if let Some(k) = self.pipeline.k {
            if !(k > 0.0 && k <= 1.0 / 3.0) {
                return Err(Error::Config(format!(
                    "pipeline.k = {k} violates the cone constraint 0 < K <= 1/3"
                )));
            }
        }
        match &self.target {
            TargetConfig::StandardNormal { dim, eta } => {
                if *dim == 0 {
                    return Err(Error::Config("target.dim must be at least 1".into()));
                }
                if let Some(eta) = eta {
                    if !(*eta > 0.0) {
                        return Err(Error::Config("target.eta must be positive".into()));
                    }
                }
            }
            TargetConfig::GaussianMixture { a } => {
                if !(*a > 0.0) {
                    return Err(Error::Config("target.a must be positive".into()));
                }
            }
            TargetConfig::Logistic { eta, .. } => {
                if let Some(eta) = eta {
                    if !(*eta > 0.0 && *eta < 1.0) {
                        return Err(Error::Config("target.eta must lie in (0, 1)".into()));
                    }
                }
            }
            TargetConfig::Poisson { prior_lambda1, .. } => {
                if let Some(l1) = prior_lambda1 {
                    if !(*l1 > 0.0) {
                        return Err(Error::Config("target.prior-lambda1 must be positive".into()));
                    }
                }
            }
        }
        if let Some(grid) = &self.grid {
            let d = grid.lo.len();
            if d == 0 || d > 2 || grid.hi.len() != d || grid.cells.len() != d {
                return Err(Error::Config(
                    "grid.lo/hi/cells must share length 1 or 2".into(),
                ));
            }
        }
        if let Some(sc) = &self.pipeline.spectral {
            if !(sc.m > 0.0 && sc.l > 0.0) {
                return Err(Error::Config("pipeline.spectral needs m > 0 and l > 0".into()));
            }
        }
        Ok(())
    }

    pub fn proposal_for(&self, dim: usize) -> Result<RadialProposal> {
        match self.proposal.family {
            ProposalFamilyConfig::Gaussian => RadialProposal::gaussian(dim, self.proposal.scale),
            ProposalFamilyConfig::Laplace => RadialProposal::laplace(dim, self.proposal.scale),
        }
    }

    /// Cone parameters honoring the overrides.
    pub fn cone_params(&self, eta: f64) -> Result<ConeParams> {
        let defaults = ConeParams::for_curvature(eta)?;
        let k = self.pipeline.k.unwrap_or(defaults.k);
        let eps_alpha = self.pipeline.eps_alpha.unwrap_or(defaults.eps_alpha);
        ConeParams::new(k, eps_alpha, defaults.alpha)
    }

    pub fn spectral_info(&self) -> Option<SpectralTargetInfo> {
        self.pipeline
            .spectral
            .map(|s| SpectralTargetInfo { m: s.m, l: s.l })
    }

    /// Oracle grid: configured, or the default extent of eight effective
    /// scales with 161 (1-D) or 61 x 61 (2-D) cells.
    pub fn grid_for(&self, dim: usize, sigma_eff: f64) -> Result<Grid> {
        if let Some(g) = &self.grid {
            if g.lo.len() != dim {
                return Err(Error::Config(format!(
                    "grid dimension {} does not match target dimension {dim}",
                    g.lo.len()
                )));
            }
            return match dim {
                1 => Grid::one_dim(g.lo[0], g.hi[0], g.cells[0]),
                2 => Grid::two_dim(
                    [g.lo[0], g.lo[1]],
                    [g.hi[0], g.hi[1]],
                    [g.cells[0], g.cells[1]],
                ),
                _ => Err(Error::OracleDimension { dim }),
            };
        }
        let extent = 8.0 * sigma_eff;
        match dim {
            1 => Grid::one_dim(-extent, extent, 161),
            2 => Grid::two_dim([-extent, -extent], [extent, extent], [61, 61]),
            _ => Err(Error::OracleDimension { dim }),
        }
    }

    /// Effective seed: environment variable, then explicit override, then
    /// the config value.
    pub fn effective_seed(&self, cli_seed: Option<u64>) -> u64 {
        if let Ok(v) = std::env::var("RWMH_CERTIFY_SEED") {
            if let Ok(seed) = v.trim().parse() {
                return seed;
            }
        }
        cli_seed.unwrap_or(self.pipeline.seed)
    }
}
