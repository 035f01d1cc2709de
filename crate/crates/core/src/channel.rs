//! AWGN calibrated to Eb/N0 and delay-Doppler multipath with TDL tap
//! statistics.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::frame::{SampleVector, C64};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

const TDL_A: &str = include_str!("../profiles/tdl_a.txt");

/// One propagation path: complex gain, delay in seconds, Doppler shift in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: C64,
    pub delay: f64,
    pub doppler: f64,
}

/// A channel realization. Paths are kept sorted by delay.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(mut paths: Vec<Path>) -> Result<Self> {
        for p in &paths {
            if !(p.delay.is_finite() && p.delay >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "path delay {} is not >= 0",
                    p.delay
                )));
            }
            if !p.doppler.is_finite() || !p.gain.re.is_finite() || !p.gain.im.is_finite() {
                return Err(Error::InvalidParameter("non-finite path parameter".into()));
            }
        }
        paths.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        Ok(PathSet { paths })
    }

    /// Single unit path with no delay or Doppler.
    pub fn identity() -> Self {
        PathSet {
            paths: vec![Path {
                gain: C64::new(1.0, 0.0),
                delay: 0.0,
                doppler: 0.0,
            }],
        }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Integer sample offsets of each path at `rate`.
    pub fn sample_delays(&self, rate: f64) -> Vec<usize> {
        self.paths
            .iter()
            .map(|p| (p.delay * rate).round() as usize)
            .collect()
    }

    pub fn max_sample_delay(&self, rate: f64) -> usize {
        self.sample_delays(rate).into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdlTap {
    pub normalized_delay: f64,
    pub power_db: f64,
    pub rayleigh: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdlProfile {
    pub name: String,
    pub taps: Vec<TdlTap>,
}

impl TdlProfile {
    /// The built-in 23-tap TDL-A profile.
    pub fn tdl_a() -> Self {
        Self::parse("TDL-A", TDL_A).expect("built-in TDL-A table parses")
    }

    /// Parses whitespace-delimited `normalized_delay power_db [rayleigh|los]`
    /// lines; `#` starts a comment.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut taps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Config(format!("{name}:{}: {msg}", lineno + 1));
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(bad("expected `normalized_delay power_db [rayleigh|los]`"));
            }
            let normalized_delay: f64 = fields[0].parse().map_err(|_| bad("bad delay"))?;
            let power_db: f64 = fields[1].parse().map_err(|_| bad("bad power"))?;
            if !(normalized_delay.is_finite() && normalized_delay >= 0.0) || !power_db.is_finite() {
                return Err(bad("delay must be finite and >= 0, power finite"));
            }
            let rayleigh = match fields.get(2).map(|s| s.to_ascii_lowercase()) {
                None => true,
                Some(s) if s == "rayleigh" => true,
                Some(s) if s == "los" => false,
                Some(_) => return Err(bad("fading must be `rayleigh` or `los`")),
            };
            taps.push(TdlTap {
                normalized_delay,
                power_db,
                rayleigh,
            });
        }
        if taps.is_empty() {
            return Err(Error::Config(format!("{name}: profile has no taps")));
        }
        Ok(TdlProfile {
            name: name.to_string(),
            taps,
        })
    }

    pub fn from_file(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&path.display().to_string(), &text)
    }
}

/// Named delay-spread values (seconds).
pub fn delay_spread_preset(name: &str) -> Option<f64> {
    let ns = match name {
        "very_short" => 10.0,
        "short" => 30.0,
        "nominal" => 100.0,
        "long" => 300.0,
        "very_long" => 1000.0,
        _ => return None,
    };
    Some(ns * 1e-9)
}

/// Maximum Doppler shift `fc * v / c`.
pub fn doppler_max(fc: f64, v_max: f64) -> f64 {
    fc * v_max / SPEED_OF_LIGHT
}

pub fn kmh_to_ms(v: f64) -> f64 {
    v / 3.6
}

/// Draws one realization: delays scaled by `delay_spread`, Rayleigh gains with
/// the tap powers renormalized to unit sum, Doppler `nu_max * cos(theta)`.
pub fn tdl_realize(
    profile: &TdlProfile,
    delay_spread: f64,
    v_max: f64,
    fc: f64,
    seed: u64,
) -> Result<PathSet> {
    if !(delay_spread.is_finite() && delay_spread > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delay spread must be positive, got {delay_spread}"
        )));
    }
    if !(fc.is_finite() && fc > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "carrier must be positive, got {fc}"
        )));
    }
    if !(v_max.is_finite() && v_max >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "speed must be >= 0, got {v_max}"
        )));
    }
    let nu_max = doppler_max(fc, v_max);
    let linear: Vec<f64> = profile
        .taps
        .iter()
        .map(|t| 10f64.powf(t.power_db / 10.0))
        .collect();
    let total: f64 = linear.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = profile
        .taps
        .iter()
        .zip(&linear)
        .map(|(tap, p)| {
            let amp = (p / total).sqrt();
            let gain = if tap.rayleigh {
                complex_normal(&mut rng) * amp
            } else {
                C64::from_polar(amp, rng.random_range(0.0..2.0 * PI))
            };
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            Path {
                gain,
                delay: tap.normalized_delay * delay_spread,
                doppler: nu_max * theta.cos(),
            }
        })
        .collect();
    PathSet::new(paths)
}

/// `y[n] = sum_i h_i exp(j 2 pi nu_i (n - d_i) / rate) x[n - d_i]` with
/// `d_i = round(tau_i * rate)`. The output is `max d_i` samples longer.
pub fn apply_paths(x: &SampleVector, ps: &PathSet) -> SampleVector {
    apply_paths_from(x, ps, 0)
}

/// As [`apply_paths`] for a segment whose first sample sits at absolute
/// index `origin` of a longer stream; Doppler phases use absolute time.
pub fn apply_paths_from(x: &SampleVector, ps: &PathSet, origin: usize) -> SampleVector {
    let delays = ps.sample_delays(x.rate);
    let extra = delays.iter().copied().max().unwrap_or(0);
    let mut out = vec![C64::new(0.0, 0.0); x.len() + extra];
    let dt = x.period();
    for (p, &d) in ps.paths().iter().zip(&delays) {
        let step = C64::from_polar(1.0, 2.0 * PI * p.doppler * dt);
        let mut rot = p.gain;
        // Recompute the rotator periodically to keep rounding drift away.
        for (m, xv) in x.values.iter().enumerate() {
            if m % 256 == 0 {
                let t = (origin + m) as f64 * dt;
                rot = p.gain * C64::from_polar(1.0, 2.0 * PI * p.doppler * t);
            }
            out[m + d] += rot * xv;
            rot *= step;
        }
    }
    SampleVector {
        values: out,
        rate: x.rate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub ebn0_db: f64,
    /// Transmitted energy per information bit, in sample units.
    pub eb: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Complex noise variance per sample, `eb * 10^(-ebn0/10)`.
    pub fn variance(&self) -> f64 {
        noise_variance(self.eb, self.ebn0_db)
    }
}

pub fn noise_variance(eb: f64, ebn0_db: f64) -> f64 {
    eb * 10f64.powf(-ebn0_db / 10.0)
}

/// Energy per information bit: all transmitted energy over `b * n_data`.
pub fn measure_eb(x: &SampleVector, n_data: usize, b: usize) -> Result<f64> {
    let bits = n_data * b;
    if bits == 0 {
        return Err(Error::InvalidParameter(
            "n_data * bits_per_symbol must be positive".into(),
        ));
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot measure Eb of an empty frame".into(),
        ));
    }
    Ok(x.energy() / bits as f64)
}

fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * FRAC_1_SQRT_2
}

/// `len` samples of circular complex Gaussian noise with unit variance.
pub fn unit_noise(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| complex_normal(&mut rng)).collect()
}

pub fn apply_awgn(x: &SampleVector, ns: &NoiseSpec) -> SampleVector {
    let sigma = ns.variance().sqrt();
    if sigma == 0.0 {
        return x.clone();
    }
    let noise = unit_noise(x.len(), ns.seed);
    SampleVector {
        values: x
            .values
            .iter()
            .zip(noise)
            .map(|(v, w)| v + w * sigma)
            .collect(),
        rate: x.rate,
    }
}
