//! Frame construction: 4-QAM mapping, SEFDM modulation and demodulation,
//! the subcarrier Gram matrix, and the frequency-domain cyclic prefix (FDCP).
//!
//! A frame carries `n_data` data subcarriers plus an `l_guard`-long FDCP,
//! `n_total = n_data + l_guard` subcarriers in all, packed at spacing
//! `alpha * delta_f`. The modulator produces `n_total` time samples at the
//! sample period `ts = 1 / (n_total * delta_f)`:
//!
//! ```text
//! x[n] = 1/sqrt(N) * sum_k S[k] exp(j 2 pi alpha n k / N),   n in [0, N)
//! ```
//!
//! With `alpha = 1` this is the unitary inverse DFT, so plain OFDM is the
//! special case of the same code path.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Per-axis amplitude of unit-energy 4-QAM.
pub const QAM4_AMPLITUDE: f64 = FRAC_1_SQRT_2;

/// The only constellation order in scope.
pub const BITS_PER_SYMBOL: usize = 2;

/// Structural frame parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub n_data: usize,
    pub l_guard: usize,
    pub alpha: f64,
    /// Uncompressed subcarrier grid spacing in Hz. SEFDM subcarriers sit at
    /// `alpha * delta_f`.
    pub delta_f: f64,
    pub bits_per_symbol: usize,
}

impl FrameSpec {
    pub fn new(n_data: usize, l_guard: usize, alpha: f64, delta_f: f64) -> Result<Self> {
        let spec = FrameSpec {
            n_data,
            l_guard,
            alpha,
            delta_f,
            bits_per_symbol: BITS_PER_SYMBOL,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_data == 0 {
            return Err(Error::InvalidParameter("n_data must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.delta_f.is_finite() && self.delta_f > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_f must be positive, got {}",
                self.delta_f
            )));
        }
        if self.bits_per_symbol != BITS_PER_SYMBOL {
            return Err(Error::UnsupportedOrder(self.bits_per_symbol));
        }
        Ok(())
    }

    /// `N = n_data + l_guard`.
    pub fn n_total(&self) -> usize {
        self.n_data + self.l_guard
    }

    /// Sample period `1 / (N * delta_f)` in seconds.
    pub fn ts(&self) -> f64 {
        1.0 / (self.n_total() as f64 * self.delta_f)
    }

    /// Symbol-rate sample rate in Hz.
    pub fn sample_rate(&self) -> f64 {
        self.n_total() as f64 * self.delta_f
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn bits_per_frame(&self) -> usize {
        self.n_data * self.bits_per_symbol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolDomain {
    /// `n_data` data symbols.
    Data,
    /// `n_total` symbols: FDCP followed by the data.
    Extended,
}

/// Frequency-domain complex symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    pub values: Vec<C64>,
    pub domain: SymbolDomain,
}

impl SymbolVector {
    pub fn new(values: Vec<C64>, domain: SymbolDomain) -> Result<Self> {
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidParameter(
                "symbol vector has non-finite entries".into(),
            ));
        }
        Ok(SymbolVector { values, domain })
    }

    pub fn data(values: Vec<C64>) -> Self {
        SymbolVector {
            values,
            domain: SymbolDomain::Data,
        }
    }

    pub fn extended(values: Vec<C64>) -> Self {
        SymbolVector {
            values,
            domain: SymbolDomain::Extended,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Complex baseband samples with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    pub values: Vec<C64>,
    pub rate: f64,
}

impl SampleVector {
    pub fn new(values: Vec<C64>, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {rate}"
            )));
        }
        Ok(SampleVector { values, rate })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate
    }
}

fn gray_axis(bit: u8) -> f64 {
    if bit == 0 {
        QAM4_AMPLITUDE
    } else {
        -QAM4_AMPLITUDE
    }
}

/// Gray-coded unit-energy 4-QAM. The first bit of each pair drives the real
/// axis, the second the imaginary axis; bit 0 maps to the positive level.
pub fn qam_map(bits: &[u8], bits_per_symbol: usize) -> Result<SymbolVector> {
    if bits_per_symbol != BITS_PER_SYMBOL {
        return Err(Error::UnsupportedOrder(bits_per_symbol));
    }
    if !bits.len().is_multiple_of(bits_per_symbol) {
        return Err(Error::shape(
            "bit sequence (multiple of bits/symbol)",
            bits.len().next_multiple_of(bits_per_symbol),
            bits.len(),
        ));
    }
    let values = bits
        .chunks_exact(2)
        .map(|pair| C64::new(gray_axis(pair[0]), gray_axis(pair[1])))
        .collect();
    Ok(SymbolVector::data(values))
}

/// Per-axis sign slicing followed by Gray de-mapping. A value of exactly zero
/// decides bit 0.
pub fn qam_demap(symbols: &[C64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        bits.push(u8::from(s.re < 0.0));
        bits.push(u8::from(s.im < 0.0));
    }
    bits
}

/// Precomputed SEFDM synthesis matrix.
///
/// `len` time samples by `n_sub` subcarriers with entries
/// `exp(j 2 pi alpha n (k + offset) / len) / sqrt(len)`. The plain modulator
/// has `len = N` and `offset = 0`; frequency-multiplexed neighbours use an
/// oversampled grid (`len = factor * N`) with the frame shifted by whole
/// frames of bins.
#[derive(Debug, Clone)]
pub struct SefdmBasis {
    matrix: DMatrix<C64>,
}

impl SefdmBasis {
    pub fn new(spec: &FrameSpec) -> Self {
        Self::oversampled(spec, 1, 0)
    }

    pub fn oversampled(spec: &FrameSpec, factor: usize, bin_offset: isize) -> Self {
        let n_sub = spec.n_total();
        let len = n_sub * factor;
        let scale = 1.0 / (len as f64).sqrt();
        let matrix = DMatrix::from_fn(len, n_sub, |n, k| {
            let phase =
                2.0 * PI * spec.alpha * (n as f64) * (k as f64 + bin_offset as f64) / len as f64;
            C64::from_polar(scale, phase)
        });
        SefdmBasis { matrix }
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn n_sub(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn synthesize(&self, symbols: &[C64]) -> Vec<C64> {
        let (rows, cols) = self.matrix.shape();
        let mut out = vec![C64::new(0.0, 0.0); rows];
        for (k, s) in symbols.iter().enumerate().take(cols) {
            if *s == C64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.column(k);
            for (o, m) in out.iter_mut().zip(col.iter()) {
                *o += m * s;
            }
        }
        out
    }

    pub fn analyze(&self, samples: &[C64]) -> Vec<C64> {
        (0..self.matrix.ncols())
            .map(|k| {
                self.matrix
                    .column(k)
                    .iter()
                    .zip(samples)
                    .map(|(m, y)| m.conj() * y)
                    .sum()
            })
            .collect()
    }
}

/// SEFDM modulation of an FDCP-extended symbol vector.
pub fn sefdm_modulate(s: &SymbolVector, spec: &FrameSpec) -> Result<SampleVector> {
    if s.len() != spec.n_total() {
        return Err(Error::shape(
            "extended symbol vector",
            spec.n_total(),
            s.len(),
        ));
    }
    let basis = SefdmBasis::new(spec);
    SampleVector::new(basis.synthesize(&s.values), spec.sample_rate())
}

/// Matched-filter demodulation `z = M^H y / sqrt(N)`. Exact inverse of
/// [`sefdm_modulate`] when `alpha = 1`; otherwise `demod(mod(S)) = C S` with
/// `C` the [`gram_matrix`].
pub fn sefdm_demodulate(y: &SampleVector, spec: &FrameSpec) -> Result<SymbolVector> {
    if y.len() != spec.n_total() {
        return Err(Error::shape("sample vector", spec.n_total(), y.len()));
    }
    let basis = SefdmBasis::new(spec);
    Ok(SymbolVector::extended(basis.analyze(&y.values)))
}

/// Gram matrix `C[k,l] = (1/N) sum_n exp(j 2 pi alpha n (l - k) / N)`, i.e. `M^H M / N`,
/// evaluated through its geometric-series closed form.
pub fn gram_matrix(spec: &FrameSpec) -> DMatrix<C64> {
    let n = spec.n_total();
    let nf = n as f64;
    let one = C64::new(1.0, 0.0);
    DMatrix::from_fn(n, n, |k, l| {
        if k == l {
            return one;
        }
        let diff = l as f64 - k as f64;
        let num = one - C64::from_polar(1.0, 2.0 * PI * spec.alpha * diff);
        let den = one - C64::from_polar(1.0, 2.0 * PI * spec.alpha * diff / nf);
        num / den / nf
    })
}

/// Prepends an `l_guard`-long cyclic copy of the data tail. Guards longer than
/// the data wrap around the data cyclically.
pub fn fdcp_add(s: &SymbolVector, l_guard: usize) -> SymbolVector {
    let n_data = s.len();
    if n_data == 0 {
        return SymbolVector::extended(Vec::new());
    }
    let values = (0..n_data + l_guard)
        .map(|i| {
            let idx = (i + n_data * l_guard.div_ceil(n_data) - l_guard) % n_data;
            s.values[idx]
        })
        .collect();
    SymbolVector::extended(values)
}

/// Drops the first `l_guard` entries of an extended vector.
pub fn fdcp_remove(s: &SymbolVector, l_guard: usize) -> Result<SymbolVector> {
    if s.len() < l_guard + 1 {
        return Err(Error::shape(
            "extended symbol vector (> l_guard)",
            l_guard + 1,
            s.len(),
        ));
    }
    Ok(SymbolVector::data(s.values[l_guard..].to_vec()))
}

/// Time-domain cyclic prefix: prepends the last `cp` samples.
pub fn time_cp_add(x: &[C64], cp: usize) -> Vec<C64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n + cp);
    for i in 0..cp {
        out.push(x[(n * cp.div_ceil(n) + i - cp) % n]);
    }
    out.extend_from_slice(x);
    out
}
