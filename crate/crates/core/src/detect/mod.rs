//! Symbol detection: scheduled slicing, the IM recursion with optional MNL
//! acceleration, and regularized sphere decoding seeded by IM.

pub mod im;
pub mod slicing;
pub mod sphere;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{SymbolVector, C64};
use crate::linkmap::EffectiveChannel;

pub use im::{fixed_point, im_detect, im_mnl_detect, mnl_accelerate, ImTrace, Iteration};
pub use slicing::{slice_hard, slice_soft};
pub use sphere::{ml_oracle, reg_sphere_decode, regularized_metric, SdOutcome, ML_ORACLE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SliceMode {
    #[default]
    Hard,
    Soft,
}

impl SliceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SliceMode::Hard => "hard",
            SliceMode::Soft => "soft",
        }
    }
}

fn default_lambda() -> f64 {
    1.0
}

fn default_eta() -> usize {
    10
}

fn default_mnl_epsilon() -> f64 {
    1e-10
}

fn default_sd_max_nodes() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default)]
    pub mode: SliceMode,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_eta")]
    pub eta: usize,
    #[serde(default)]
    pub mnl_enabled: bool,
    #[serde(default = "default_mnl_epsilon")]
    pub mnl_epsilon: f64,
    #[serde(default)]
    pub sd_enabled: bool,
    /// Ridge weight; the per-sample noise variance when absent.
    #[serde(default)]
    pub sd_rho: Option<f64>,
    #[serde(default = "default_sd_max_nodes")]
    pub sd_max_nodes: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            mode: SliceMode::Hard,
            lambda: default_lambda(),
            eta: default_eta(),
            mnl_enabled: false,
            mnl_epsilon: default_mnl_epsilon(),
            sd_enabled: false,
            sd_rho: None,
            sd_max_nodes: default_sd_max_nodes(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta == 0 {
            return Err(Error::InvalidParameter("eta must be at least 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.mnl_epsilon.is_finite() && self.mnl_epsilon >= 0.0) {
            return Err(Error::InvalidParameter("mnl_epsilon must be >= 0".into()));
        }
        if let Some(rho) = self.sd_rho {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sd_rho must be >= 0, got {rho}"
                )));
            }
        }
        if self.sd_max_nodes == 0 {
            return Err(Error::InvalidParameter(
                "sd_max_nodes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Short name used in result files, e.g. `im-soft+mnl+sd`.
    pub fn label(&self) -> String {
        let mut s = format!("im-{}", self.mode.as_str());
        if self.mnl_enabled {
            s.push_str("+mnl");
        }
        if self.sd_enabled {
            s.push_str("+sd");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutcome {
    pub symbols: SymbolVector,
    pub iterations_used: usize,
    pub sd_nodes_visited: u64,
    pub residual: f64,
    /// The sphere search hit its node budget.
    pub truncated: bool,
}

/// Everything a detector sees for one frame.
#[derive(Debug, Clone, Copy)]
pub struct DetectionInput<'a> {
    /// Observation-domain samples.
    pub obs: &'a [C64],
    /// Matched-filter-domain symbols, guard removed.
    pub z: &'a [C64],
    pub eff: &'a EffectiveChannel,
    /// Complex noise variance per observation sample.
    pub noise_var: f64,
}

pub trait Detector: Send + Sync {
    fn label(&self) -> String;
    fn detect(&self, input: &DetectionInput<'_>) -> Result<DetectorOutcome>;
}

impl Detector for DetectorConfig {
    fn label(&self) -> String {
        DetectorConfig::label(self)
    }

    /// With the sphere search enabled, an IM run that diverges only loses
    /// its role as initial radius: the search then starts unbounded, which
    /// reaches the same minimizer.
    fn detect(&self, input: &DetectionInput<'_>) -> Result<DetectorOutcome> {
        let im = im::run_im(input.z, input.eff, self, self.mnl_enabled, false);
        if !self.sd_enabled {
            return Ok(im?.0);
        }
        let mut outcome = match im {
            Ok((outcome, _)) => outcome,
            Err(Error::Divergence { iteration, .. }) => DetectorOutcome {
                symbols: SymbolVector::data(Vec::new()),
                iterations_used: iteration,
                sd_nodes_visited: 0,
                residual: f64::INFINITY,
                truncated: false,
            },
            Err(e) => return Err(e),
        };
        let init = (!outcome.symbols.is_empty()).then_some(outcome.symbols.values.as_slice());
        let rho = self.sd_rho.unwrap_or(input.noise_var);
        let sd = reg_sphere_decode(input.obs, input.eff, rho, self.sd_max_nodes, init)?;
        outcome.symbols = SymbolVector::data(sd.symbols);
        outcome.sd_nodes_visited = sd.nodes;
        outcome.truncated = sd.truncated;
        Ok(outcome)
    }
}
