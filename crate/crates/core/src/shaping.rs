//! Root-raised-cosine pulse shaping and the matching receive filter.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::frame::{SampleVector, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingSpec {
    pub beta: f64,
    pub sps: usize,
    /// Filter span in symbols; must be even so the peak sits on a tap.
    pub span: usize,
}

impl ShapingSpec {
    pub fn new(beta: f64, sps: usize, span: usize) -> Result<Self> {
        let spec = ShapingSpec { beta, sps, span };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "roll-off must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.sps == 0 {
            return Err(Error::InvalidParameter("sps must be positive".into()));
        }
        if self.span == 0 || !self.span.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "span must be a positive even number of symbols, got {}",
                self.span
            )));
        }
        Ok(())
    }

    pub fn n_taps(&self) -> usize {
        self.span * self.sps + 1
    }

    /// Combined transmit + receive group delay in samples.
    pub fn delay(&self) -> usize {
        self.span * self.sps
    }
}

/// RRC impulse response at `t` symbol periods, before normalization.
fn rrc_point(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (4.0 * beta * t.abs() - 1.0).abs() < 1e-12 {
        let a = PI / (4.0 * beta);
        return beta * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Symmetric unit-energy RRC taps, `span * sps + 1` long, peak in the middle.
pub fn rrc_taps(spec: &ShapingSpec) -> Vec<f64> {
    let n = spec.n_taps();
    let mid = (n / 2) as isize;
    let half: Vec<f64> = (0..=mid)
        .map(|i| rrc_point(i as f64 / spec.sps as f64, spec.beta))
        .collect();
    // Build from one half so the symmetry is exact.
    let mut taps: Vec<f64> = (0..n as isize)
        .map(|i| half[(i - mid).unsigned_abs()])
        .collect();
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    let scale = energy.sqrt().recip();
    for t in &mut taps {
        *t *= scale;
    }
    taps
}

/// Zero-stuffs by `sps` and filters with the RRC taps. The full convolution
/// is kept: the output is `len * sps + span * sps` samples long.
pub fn shape_up(x: &SampleVector, spec: &ShapingSpec) -> SampleVector {
    SampleVector {
        values: upsample_filter(&x.values, &rrc_taps(spec), spec.sps),
        rate: x.rate * spec.sps as f64,
    }
}

pub(crate) fn upsample_filter(x: &[C64], taps: &[f64], sps: usize) -> Vec<C64> {
    let out_len = x.len() * sps + taps.len() - 1;
    let mut out = vec![C64::new(0.0, 0.0); out_len];
    for (n, xv) in x.iter().enumerate() {
        let base = n * sps;
        for (o, t) in out[base..base + taps.len()].iter_mut().zip(taps) {
            *o += xv * t;
        }
    }
    out
}

/// Matched filter, group-delay compensation and decimation. Output sample
/// `n` is the filter output at `span * sps + n * sps`.
pub fn shape_down(y: &SampleVector, spec: &ShapingSpec, n_expected: usize) -> Result<SampleVector> {
    let taps = rrc_taps(spec);
    let sps = spec.sps;
    let delay = taps.len() - 1;
    if n_expected > 0 {
        let needed = delay + (n_expected - 1) * sps + 1;
        if y.len() < needed {
            return Err(Error::shape("shaped sample vector", needed, y.len()));
        }
    }
    let values = (0..n_expected)
        .map(|n| matched_sample(&y.values, &taps, delay + n * sps))
        .collect();
    Ok(SampleVector {
        values,
        rate: y.rate / sps as f64,
    })
}

/// `sum_j taps[j] * y[m - j]` over the valid range of `y`.
pub(crate) fn matched_sample(y: &[C64], taps: &[f64], m: usize) -> C64 {
    let j_lo = (m + 1).saturating_sub(y.len());
    let j_hi = taps.len().min(m + 1);
    let mut acc = C64::new(0.0, 0.0);
    for j in j_lo..j_hi {
        acc += y[m - j] * taps[j];
    }
    acc
}
