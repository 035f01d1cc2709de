//! Scenario files: JSON with unknown keys rejected.
//!
//! ```json
//! {
//!   "id": "fig3_short_ds",
//!   "frame": { "n_data": 56, "l_guard": 8, "delta_f": 45000.0, "time_cp": 0 },
//!   "fdcp_enabled": true,
//!   "shaping": { "beta": 0.25, "sps": 10, "span": 16 },
//!   "channel": { "type": "tdl", "profile": "tdl_a", "delay_spread": "short",
//!                "v_max": 27.78, "fc": 6e9 },
//!   "adjacent_frames": "time",
//!   "detector": { "mode": "soft", "lambda": 0.8, "eta": 50 },
//!   "alphas": [0.9], "ebn0_db": [0, 2, 4, 6], "trials": 10000, "master_seed": 1
//! }
//! ```
//!
//! `detector` takes one object or a list. `profile` is `tdl_a` for the
//! built-in table or a path relative to the scenario file. `delay_spread` is
//! seconds or one of `very_short`, `short`, `nominal`, `long`, `very_long`.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{delay_spread_preset, Path, PathSet, TdlProfile};
use crate::detect::DetectorConfig;
use crate::error::{Error, Result};
use crate::frame::{FrameSpec, C64};
use crate::linkmap::{AdjacentFrames, LinkChain};
use crate::shaping::ShapingSpec;

fn default_delta_f() -> f64 {
    45e3
}

fn default_true() -> bool {
    true
}

fn default_profile() -> String {
    "tdl_a".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub n_data: usize,
    #[serde(default)]
    pub l_guard: usize,
    #[serde(default = "default_delta_f")]
    pub delta_f: f64,
    /// Time-domain cyclic prefix in symbol-rate samples.
    #[serde(default)]
    pub time_cp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingConfig {
    pub beta: f64,
    pub sps: usize,
    pub span: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpread {
    Seconds(f64),
    Preset(String),
}

impl DelaySpread {
    pub fn seconds(&self) -> Result<f64> {
        let s = match self {
            DelaySpread::Seconds(s) => *s,
            DelaySpread::Preset(name) => delay_spread_preset(name)
                .ok_or_else(|| Error::Config(format!("unknown delay-spread preset `{name}`")))?,
        };
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Config(format!(
                "delay spread must be positive, got {s}"
            )));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    /// `[re, im]`.
    pub gain: [f64; 2],
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub doppler: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelConfig {
    Awgn {},
    Tdl {
        #[serde(default = "default_profile")]
        profile: String,
        delay_spread: DelaySpread,
        /// Maximum speed in m/s.
        v_max: f64,
        /// Carrier frequency in Hz.
        fc: f64,
    },
    /// A fixed, deterministic path set.
    Paths {
        paths: Vec<PathConfig>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AdjacentConfig {
    #[default]
    None,
    Time,
    Frequency,
}

impl From<AdjacentConfig> for AdjacentFrames {
    fn from(a: AdjacentConfig) -> Self {
        match a {
            AdjacentConfig::None => AdjacentFrames::None,
            AdjacentConfig::Time => AdjacentFrames::Time,
            AdjacentConfig::Frequency => AdjacentFrames::Frequency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DetectorList {
    One(DetectorConfig),
    Many(Vec<DetectorConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub frame: FrameConfig,
    #[serde(default = "default_true")]
    pub fdcp_enabled: bool,
    #[serde(default)]
    pub shaping: Option<ShapingConfig>,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub adjacent_frames: AdjacentConfig,
    pub detector: DetectorList,
    pub alphas: Vec<f64>,
    pub ebn0_db: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Directory that relative profile paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Channel with its profile loaded.
#[derive(Debug, Clone)]
pub enum ChannelModel {
    Awgn,
    Tdl {
        profile: TdlProfile,
        delay_spread: f64,
        v_max: f64,
        fc: f64,
    },
    Fixed(PathSet),
}

impl ChannelModel {
    /// True when every trial sees the same channel.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, ChannelModel::Tdl { .. })
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str, base_dir: Option<&FsPath>) -> Result<Self> {
        let mut cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        cfg.base_dir = base_dir.map(FsPath::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let dir = path.parent().map(FsPath::to_path_buf).unwrap_or_default();
        Self::from_json(&text, Some(&dir)).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn detectors(&self) -> Vec<DetectorConfig> {
        match &self.detector {
            DetectorList::One(d) => vec![d.clone()],
            DetectorList::Many(v) => v.clone(),
        }
    }

    pub fn l_guard(&self) -> usize {
        if self.fdcp_enabled {
            self.frame.l_guard
        } else {
            0
        }
    }

    pub fn frame_spec(&self, alpha: f64) -> Result<FrameSpec> {
        FrameSpec::new(self.frame.n_data, self.l_guard(), alpha, self.frame.delta_f)
    }

    pub fn shaping_spec(&self) -> Result<Option<ShapingSpec>> {
        self.shaping
            .as_ref()
            .map(|s| ShapingSpec::new(s.beta, s.sps, s.span))
            .transpose()
    }

    pub fn link_chain(&self, alpha: f64) -> Result<LinkChain> {
        LinkChain::new(
            self.frame_spec(alpha)?,
            self.shaping_spec()?,
            self.frame.time_cp,
            self.adjacent_frames.into(),
        )
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        match &self.channel {
            ChannelConfig::Awgn {} => Ok(ChannelModel::Awgn),
            ChannelConfig::Tdl {
                profile,
                delay_spread,
                v_max,
                fc,
            } => {
                let profile = if profile.eq_ignore_ascii_case("tdl_a")
                    || profile.eq_ignore_ascii_case("tdl-a")
                {
                    TdlProfile::tdl_a()
                } else {
                    let p = FsPath::new(profile);
                    let full = match (&self.base_dir, p.is_relative()) {
                        (Some(dir), true) => dir.join(p),
                        _ => p.to_path_buf(),
                    };
                    TdlProfile::from_file(&full)?
                };
                if !(v_max.is_finite() && *v_max >= 0.0) {
                    return Err(Error::Config(format!(
                        "v_max must be >= 0 m/s, got {v_max}"
                    )));
                }
                if !(fc.is_finite() && *fc > 0.0) {
                    return Err(Error::Config(format!("fc must be positive, got {fc}")));
                }
                Ok(ChannelModel::Tdl {
                    profile,
                    delay_spread: delay_spread.seconds()?,
                    v_max: *v_max,
                    fc: *fc,
                })
            }
            ChannelConfig::Paths { paths } => {
                if paths.is_empty() {
                    return Err(Error::Config("path channel needs at least one path".into()));
                }
                let ps = PathSet::new(
                    paths
                        .iter()
                        .map(|p| Path {
                            gain: C64::new(p.gain[0], p.gain[1]),
                            delay: p.delay,
                            doppler: p.doppler,
                        })
                        .collect(),
                )
                .map_err(|e| Error::Config(e.to_string()))?;
                Ok(ChannelModel::Fixed(ps))
            }
        }
    }

    /// Checks everything that can be checked without running a trial.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) | Error::Io { .. } => e,
            other => Error::Config(other.to_string()),
        };
        if self.id.trim().is_empty() {
            return Err(Error::Config("id must not be empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("alphas must not be empty".into()));
        }
        if self.ebn0_db.is_empty() || self.ebn0_db.iter().any(|e| !e.is_finite()) {
            return Err(Error::Config(
                "ebn0_db must be a non-empty list of finite values".into(),
            ));
        }
        for &alpha in &self.alphas {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::Config(format!("alpha {alpha} outside (0, 1]")));
            }
            self.link_chain(alpha).map_err(cfg_err)?;
        }
        let detectors = self.detectors();
        if detectors.is_empty() {
            return Err(Error::Config("at least one detector is required".into()));
        }
        for d in &detectors {
            d.validate().map_err(cfg_err)?;
        }
        self.channel_model().map_err(cfg_err)?;
        Ok(())
    }
}
