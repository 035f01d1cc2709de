//! The transmit/receive chain around the channel, its probed linear operator
//! for perfect-CSI detection, and the two single-tap equalizers.
//!
//! A [`LinkChain`] fixes everything between data symbols and the receiver's
//! observation vector: FDCP, SEFDM modulation, optional time-domain CP,
//! optional RRC shaping, and whether the frame has neighbours. Neighbours are
//! either consecutive frames in time or frames stacked in frequency on a
//! grid oversampled by [`FREQUENCY_OVERSAMPLING`], one frame width below and
//! above the frame of interest.
//!
//! Observations live in one of two domains:
//! - without frequency neighbours, the `K * N` symbol-rate time samples of the
//!   own frame after CP removal (`K = 1`);
//! - with frequency neighbours, the own band demodulated and stripped of its
//!   guard, which is all the receiver keeps.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::channel::{apply_paths_from, measure_eb, PathSet};
use crate::error::{Error, Result};
use crate::frame::{fdcp_add, time_cp_add, FrameSpec, SampleVector, SefdmBasis, SymbolVector, C64};
use crate::shaping::{matched_sample, rrc_taps, upsample_filter, ShapingSpec};

/// Oversampling of the composite grid holding three frequency-stacked frames.
pub const FREQUENCY_OVERSAMPLING: usize = 3;

/// Floor below which a per-bin or per-sample gain counts as singular.
pub const EQUALIZER_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjacentFrames {
    #[default]
    None,
    /// One frame before and one after, back to back in time.
    Time,
    /// One frame in the band below and one in the band above.
    Frequency,
}

/// Data symbols of the two neighbouring frames (lower/earlier first).
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbours {
    pub before: Vec<C64>,
    pub after: Vec<C64>,
}

/// Probed operator from data symbols to observations.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    /// `n_obs x N_d`, observation domain.
    pub matrix_obs: DMatrix<C64>,
    /// `N_d x N_d`, demodulated and guard-removed.
    pub matrix_mf: DMatrix<C64>,
    /// Mean magnitude of the diagonal of `matrix_mf`.
    pub diag_scale: f64,
}

impl EffectiveChannel {
    pub fn from_matrices(matrix_obs: DMatrix<C64>, matrix_mf: DMatrix<C64>) -> Result<Self> {
        let n = matrix_mf.nrows();
        if matrix_mf.ncols() != n || matrix_obs.ncols() != n {
            return Err(Error::shape(
                "effective channel columns",
                n,
                matrix_obs.ncols(),
            ));
        }
        if matrix_obs
            .iter()
            .chain(matrix_mf.iter())
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidParameter(
                "effective channel has non-finite entries".into(),
            ));
        }
        let diag_scale = if n == 0 {
            0.0
        } else {
            matrix_mf.diagonal().iter().map(|v| v.norm()).sum::<f64>() / n as f64
        };
        if diag_scale.is_nan() || diag_scale <= 0.0 {
            return Err(Error::InvalidParameter(
                "effective channel has a vanishing diagonal".into(),
            ));
        }
        Ok(EffectiveChannel {
            matrix_obs,
            matrix_mf,
            diag_scale,
        })
    }

    pub fn n_data(&self) -> usize {
        self.matrix_mf.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.matrix_obs.nrows()
    }
}

/// Shaped transmit samples. `samples[0]` sits at absolute stream index
/// `origin`.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub samples: SampleVector,
    pub origin: usize,
    /// Energy per information bit of the frame of interest alone.
    pub eb: f64,
}

#[derive(Debug, Clone)]
pub struct LinkChain {
    frame: FrameSpec,
    shaping: Option<ShapingSpec>,
    time_cp: usize,
    adjacent: AdjacentFrames,
    taps: Vec<f64>,
    sps: usize,
    own: SefdmBasis,
    before: Option<SefdmBasis>,
    after: Option<SefdmBasis>,
}

impl LinkChain {
    pub fn new(
        frame: FrameSpec,
        shaping: Option<ShapingSpec>,
        time_cp: usize,
        adjacent: AdjacentFrames,
    ) -> Result<Self> {
        frame.validate()?;
        if let Some(s) = &shaping {
            s.validate()?;
        }
        let (taps, sps) = match &shaping {
            Some(s) => (rrc_taps(s), s.sps),
            None => (vec![1.0], 1),
        };
        let n = frame.n_total() as isize;
        let (own, before, after) = match adjacent {
            AdjacentFrames::Frequency => {
                let k = FREQUENCY_OVERSAMPLING;
                (
                    SefdmBasis::oversampled(&frame, k, 0),
                    Some(SefdmBasis::oversampled(&frame, k, -n)),
                    Some(SefdmBasis::oversampled(&frame, k, n)),
                )
            }
            _ => (SefdmBasis::new(&frame), None, None),
        };
        Ok(LinkChain {
            frame,
            shaping,
            time_cp,
            adjacent,
            taps,
            sps,
            own,
            before,
            after,
        })
    }

    pub fn frame(&self) -> &FrameSpec {
        &self.frame
    }

    pub fn shaping(&self) -> Option<&ShapingSpec> {
        self.shaping.as_ref()
    }

    pub fn adjacent(&self) -> AdjacentFrames {
        self.adjacent
    }

    fn oversampling(&self) -> usize {
        match self.adjacent {
            AdjacentFrames::Frequency => FREQUENCY_OVERSAMPLING,
            _ => 1,
        }
    }

    /// Symbol-rate samples per frame including the time CP.
    pub fn frame_len(&self) -> usize {
        self.oversampling() * (self.frame.n_total() + self.time_cp)
    }

    fn own_start(&self) -> usize {
        match self.adjacent {
            AdjacentFrames::Time => self.frame_len(),
            _ => 0,
        }
    }

    /// Sample rate on the channel (after shaping).
    pub fn channel_rate(&self) -> f64 {
        self.frame.sample_rate() * (self.oversampling() * self.sps) as f64
    }

    /// Symbol-rate sample rate.
    pub fn symbol_rate(&self) -> f64 {
        self.frame.sample_rate() * self.oversampling() as f64
    }

    pub fn n_obs(&self) -> usize {
        match self.adjacent {
            AdjacentFrames::Frequency => self.frame.n_data,
            _ => self.frame.n_total(),
        }
    }

    fn check_data(&self, data: &[C64]) -> Result<()> {
        if data.len() != self.frame.n_data {
            return Err(Error::shape("data symbols", self.frame.n_data, data.len()));
        }
        Ok(())
    }

    fn frame_samples(&self, data: &[C64], basis: &SefdmBasis) -> Vec<C64> {
        let ext = fdcp_add(&SymbolVector::data(data.to_vec()), self.frame.l_guard);
        let x = basis.synthesize(&ext.values);
        time_cp_add(&x, self.oversampling() * self.time_cp)
    }

    fn shape(&self, sym: &[C64]) -> Vec<C64> {
        upsample_filter(sym, &self.taps, self.sps)
    }

    /// Builds the shaped transmit stream. Neighbour data is ignored when the
    /// chain has no neighbours; without neighbour data only the own frame is
    /// emitted, at its place in the stream.
    pub fn transmit(&self, own: &[C64], neighbours: Option<&Neighbours>) -> Result<Transmission> {
        self.check_data(own)?;
        let own_shaped = self.shape(&self.frame_samples(own, &self.own));
        let rate = self.channel_rate();
        let eb = measure_eb(
            &SampleVector::new(own_shaped.clone(), rate)?,
            self.frame.n_data,
            self.frame.bits_per_symbol,
        )?;
        let own_origin = self.own_start() * self.sps;
        let nb = match (self.adjacent, neighbours) {
            (AdjacentFrames::None, _) | (_, None) => {
                return Ok(Transmission {
                    samples: SampleVector::new(own_shaped, rate)?,
                    origin: own_origin,
                    eb,
                })
            }
            (_, Some(nb)) => nb,
        };
        self.check_data(&nb.before)?;
        self.check_data(&nb.after)?;
        let values = match self.adjacent {
            AdjacentFrames::Time => {
                let step = self.frame_len() * self.sps;
                let mut out = vec![C64::new(0.0, 0.0); 3 * step + self.taps.len() - 1];
                let segments = [
                    self.shape(&self.frame_samples(&nb.before, &self.own)),
                    own_shaped,
                    self.shape(&self.frame_samples(&nb.after, &self.own)),
                ];
                for (slot, seg) in segments.iter().enumerate() {
                    for (o, v) in out[slot * step..].iter_mut().zip(seg) {
                        *o += v;
                    }
                }
                out
            }
            AdjacentFrames::Frequency => {
                let before = self
                    .before
                    .as_ref()
                    .expect("frequency chain has neighbour bases");
                let after = self
                    .after
                    .as_ref()
                    .expect("frequency chain has neighbour bases");
                let lower = self.shape(&self.frame_samples(&nb.before, before));
                let upper = self.shape(&self.frame_samples(&nb.after, after));
                own_shaped
                    .iter()
                    .zip(&lower)
                    .zip(&upper)
                    .map(|((a, b), c)| a + b + c)
                    .collect()
            }
            AdjacentFrames::None => unreachable!(),
        };
        Ok(Transmission {
            samples: SampleVector::new(values, rate)?,
            origin: 0,
            eb,
        })
    }

    /// Matched filter, decimation, CP removal and (with frequency neighbours)
    /// own-band demodulation. `y[0]` sits at absolute index `origin`, which
    /// must not lie after the start of the own frame.
    pub fn receive(&self, y: &[C64], origin: usize) -> Vec<C64> {
        let delay = self.taps.len() - 1;
        let first = self.own_start() + self.oversampling() * self.time_cp;
        let last = self.own_start() + self.frame_len();
        let r: Vec<C64> = (first..last)
            .map(|j| matched_sample(y, &self.taps, delay + j * self.sps - origin))
            .collect();
        match self.adjacent {
            AdjacentFrames::Frequency => self.own.analyze(&r)[self.frame.l_guard..].to_vec(),
            _ => r,
        }
    }

    /// Maps an observation to the matched-filter domain (`N_d` entries).
    pub fn matched(&self, obs: &[C64]) -> Vec<C64> {
        match self.adjacent {
            AdjacentFrames::Frequency => obs.to_vec(),
            _ => self.own.analyze(obs)[self.frame.l_guard..].to_vec(),
        }
    }

    /// Noise-free observation through the full chain.
    pub fn observe(
        &self,
        own: &[C64],
        neighbours: Option<&Neighbours>,
        ps: &PathSet,
    ) -> Result<Vec<C64>> {
        let tx = self.transmit(own, neighbours)?;
        let y = apply_paths_from(&tx.samples, ps, tx.origin);
        Ok(self.receive(&y.values, tx.origin))
    }

    /// Perfect-CSI operator: column `k` is the noise-free chain applied to
    /// the unit data vector `e_k`.
    pub fn probe(&self, ps: &PathSet) -> Result<EffectiveChannel> {
        let n_d = self.frame.n_data;
        let n_obs = self.n_obs();
        let mut matrix_obs = DMatrix::zeros(n_obs, n_d);
        let mut matrix_mf = DMatrix::zeros(n_d, n_d);
        let mut e = vec![C64::new(0.0, 0.0); n_d];
        for k in 0..n_d {
            e[k] = C64::new(1.0, 0.0);
            let obs = self.observe(&e, None, ps)?;
            let mf = self.matched(&obs);
            matrix_obs.column_mut(k).copy_from_slice(&obs);
            matrix_mf.column_mut(k).copy_from_slice(&mf);
            e[k] = C64::new(0.0, 0.0);
        }
        EffectiveChannel::from_matrices(matrix_obs, matrix_mf)
    }
}

/// Per-bin gains `H[k] = sum_i h_i exp(-j 2 pi k d_i / n)` of a delay-only
/// channel, with `d_i` the path delays in samples at `rate`.
pub fn delay_bin_gains(ps: &PathSet, n: usize, rate: f64) -> Vec<C64> {
    let delays = ps.sample_delays(rate);
    (0..n)
        .map(|k| {
            ps.paths()
                .iter()
                .zip(&delays)
                .map(|(p, &d)| p.gain * C64::from_polar(1.0, -2.0 * PI * (k * d) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// `R[k] = Y[k] / H[k]`.
pub fn equalize_delay_single_tap(y: &SymbolVector, h: &[C64]) -> Result<SymbolVector> {
    if h.len() != y.len() {
        return Err(Error::shape("per-bin gains", y.len(), h.len()));
    }
    let mut out = Vec::with_capacity(y.len());
    for (index, (yv, hv)) in y.values.iter().zip(h).enumerate() {
        let magnitude = hv.norm();
        if magnitude <= EQUALIZER_EPSILON {
            return Err(Error::SingularBin { index, magnitude });
        }
        out.push(yv / hv);
    }
    Ok(SymbolVector {
        values: out,
        domain: y.domain,
    })
}

/// Time gains `h~[n] = sum_i h_i exp(j 2 pi nu_i n / rate)` of a Doppler-only
/// channel.
pub fn doppler_time_gains(ps: &PathSet, len: usize, rate: f64) -> Vec<C64> {
    (0..len)
        .map(|n| {
            ps.paths()
                .iter()
                .map(|p| p.gain * C64::from_polar(1.0, 2.0 * PI * p.doppler * n as f64 / rate))
                .sum()
        })
        .collect()
}

/// `out[n] = y[n] / h~[n]` for a channel whose paths all have zero delay.
pub fn equalize_doppler_time_division(y: &SampleVector, ps: &PathSet) -> Result<SampleVector> {
    if ps.paths().iter().any(|p| p.delay != 0.0) {
        return Err(Error::InvalidParameter(
            "time-division equalization needs a channel without delay spread".into(),
        ));
    }
    let gains = doppler_time_gains(ps, y.len(), y.rate);
    let mut out = Vec::with_capacity(y.len());
    for (index, (yv, g)) in y.values.iter().zip(&gains).enumerate() {
        let magnitude = g.norm();
        if magnitude <= EQUALIZER_EPSILON {
            return Err(Error::SingularSample { index, magnitude });
        }
        out.push(yv / g);
    }
    SampleVector::new(out, y.rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Path;
    use crate::frame::{gram_matrix, qam_demap, qam_map, sefdm_demodulate, sefdm_modulate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qpsk(rng: &mut impl Rng, n: usize) -> Vec<C64> {
        let bits: Vec<u8> = (0..2 * n).map(|_| rng.random_range(0..2u8)).collect();
        qam_map(&bits, 2).unwrap().values
    }

    fn single(gain: C64, delay: f64, doppler: f64) -> Path {
        Path {
            gain,
            delay,
            doppler,
        }
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_ofdm_probe_is_identity() {
        let frame = FrameSpec::new(8, 0, 1.0, 45e3).unwrap();
        let chain = LinkChain::new(frame, None, 0, AdjacentFrames::None).unwrap();
        let eff = chain.probe(&PathSet::identity()).unwrap();
        assert!(max_diff(&eff.matrix_mf, &DMatrix::identity(8, 8)) < 1e-9);
        assert!((eff.diag_scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_probe_is_gram() {
        let frame = FrameSpec::new(12, 0, 0.8, 45e3).unwrap();
        let chain = LinkChain::new(frame, None, 0, AdjacentFrames::None).unwrap();
        let eff = chain.probe(&PathSet::identity()).unwrap();
        assert!(max_diff(&eff.matrix_mf, &gram_matrix(&frame)) < 1e-12);
    }

    #[test]
    fn integer_doppler_with_fdcp_is_circulant() {
        let frame = FrameSpec::new(10, 3, 1.0, 45e3).unwrap();
        let chain = LinkChain::new(frame, None, 0, AdjacentFrames::None).unwrap();
        for m in 0..=3 {
            let ps = PathSet::new(vec![
                single(C64::new(0.8, 0.1), 0.0, m as f64 * 45e3),
                single(C64::new(0.2, -0.3), 0.0, 1.0 * 45e3),
            ])
            .unwrap();
            let a = chain.probe(&ps).unwrap().matrix_mf;
            for i in 0..10 {
                for j in 0..10 {
                    let d = (a[(i, j)] - a[((i + 1) % 10, (j + 1) % 10)]).norm();
                    assert!(d < 1e-9, "m={m} ({i},{j}) {d}");
                }
            }
        }
    }

    #[test]
    fn probe_is_linear_with_shaping_and_multipath() {
        let frame = FrameSpec::new(6, 2, 0.85, 45e3).unwrap();
        let shaping = ShapingSpec::new(0.25, 10, 16).unwrap();
        let ps = PathSet::new(vec![
            single(C64::new(0.7, 0.2), 0.0, 300.0),
            single(C64::new(-0.3, 0.4), 250e-9, -520.0),
            single(C64::new(0.1, 0.1), 1.1e-6, 90.0),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for adj in [
            AdjacentFrames::None,
            AdjacentFrames::Time,
            AdjacentFrames::Frequency,
        ] {
            let chain = LinkChain::new(frame, Some(shaping), 1, adj).unwrap();
            let eff = chain.probe(&ps).unwrap();
            assert_eq!(eff.n_obs(), chain.n_obs());
            for _ in 0..5 {
                let s = qpsk(&mut rng, 6);
                let direct = chain.observe(&s, None, &ps).unwrap();
                let via = &eff.matrix_obs * nalgebra::DVector::from_vec(s.clone());
                for (a, b) in direct.iter().zip(via.iter()) {
                    assert!((a - b).norm() < 1e-9);
                }
                let z = chain.matched(&direct);
                let zm = &eff.matrix_mf * nalgebra::DVector::from_vec(s);
                for (a, b) in z.iter().zip(zm.iter()) {
                    assert!((a - b).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn transmit_eb_and_layout() {
        let frame = FrameSpec::new(16, 0, 1.0, 45e3).unwrap();
        let chain = LinkChain::new(frame, None, 0, AdjacentFrames::None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tx = chain.transmit(&qpsk(&mut rng, 16), None).unwrap();
        assert!((tx.eb - 0.5).abs() < 1e-12);
        assert_eq!(tx.origin, 0);

        let chain = LinkChain::new(frame, None, 2, AdjacentFrames::Time).unwrap();
        let nb = Neighbours {
            before: qpsk(&mut rng, 16),
            after: qpsk(&mut rng, 16),
        };
        let tx = chain.transmit(&qpsk(&mut rng, 16), Some(&nb)).unwrap();
        assert_eq!(tx.samples.len(), 3 * 18);
        assert!(chain.transmit(&qpsk(&mut rng, 15), None).is_err());
    }

    #[test]
    fn single_tap_equalizer_recovers_delay_channel() {
        let frame = FrameSpec::new(16, 0, 1.0, 45e3).unwrap();
        let cp = 4;
        let chain = LinkChain::new(frame, None, cp, AdjacentFrames::None).unwrap();
        let ts = frame.ts();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let ps = PathSet::new(
                (0..3)
                    .map(|_| {
                        single(
                            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                            rng.random_range(0..=cp) as f64 * ts,
                            0.0,
                        )
                    })
                    .collect(),
            )
            .unwrap();
            let s = qpsk(&mut rng, 16);
            let z = chain.matched(&chain.observe(&s, None, &ps).unwrap());
            let h = delay_bin_gains(&ps, 16, frame.sample_rate());
            let r = equalize_delay_single_tap(&SymbolVector::data(z), &h).unwrap();
            for (a, b) in r.values.iter().zip(&s) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn single_tap_equalizer_basics() {
        let y = SymbolVector::data(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)]);
        let ones = vec![C64::new(1.0, 0.0); 2];
        assert_eq!(equalize_delay_single_tap(&y, &ones).unwrap(), y);
        let h = vec![C64::new(0.0, 2.0), C64::new(0.5, 0.5)];
        let yh = SymbolVector::data(y.values.iter().zip(&h).map(|(a, b)| a * b).collect());
        let back = equalize_delay_single_tap(&yh, &h).unwrap();
        for (a, b) in back.values.iter().zip(&y.values) {
            assert!((a - b).norm() < 1e-15);
        }
        let bad = vec![C64::new(1.0, 0.0), C64::new(1e-13, 0.0)];
        assert!(matches!(
            equalize_delay_single_tap(&y, &bad),
            Err(Error::SingularBin { index: 1, .. })
        ));
    }

    #[test]
    fn time_division_equalizer() {
        let x = SampleVector::new((0..32).map(|i| C64::new(i as f64, 1.0)).collect(), 1e6).unwrap();
        let id = PathSet::identity();
        assert_eq!(equalize_doppler_time_division(&x, &id).unwrap(), x);

        let ps = PathSet::new(vec![single(C64::new(1.0, 0.0), 0.0, 12_345.0)]).unwrap();
        let y = crate::channel::apply_paths(&x, &ps);
        let back = equalize_doppler_time_division(&y, &ps).unwrap();
        for (a, b) in back.values.iter().zip(&x.values) {
            assert!((a - b).norm() < 1e-12);
        }

        let delayed = PathSet::new(vec![single(C64::new(1.0, 0.0), 1e-6, 0.0)]).unwrap();
        assert!(equalize_doppler_time_division(&x, &delayed).is_err());

        // Two equal paths at 0 and rate/2 cancel on odd samples.
        let null = PathSet::new(vec![
            single(C64::new(1.0, 0.0), 0.0, 0.0),
            single(C64::new(1.0, 0.0), 0.0, 0.5e6),
        ])
        .unwrap();
        assert!(matches!(
            equalize_doppler_time_division(&x, &null),
            Err(Error::SingularSample { index: 1, .. })
        ));
    }

    #[test]
    fn two_path_doppler_with_fdcp_detects_without_errors() {
        let frame = FrameSpec::new(12, 4, 1.0, 45e3).unwrap();
        let ps = PathSet::new(vec![
            single(C64::new(0.9, 0.0), 0.0, 45e3),
            single(C64::new(0.3, 0.2), 0.0, 3.0 * 45e3),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let bits: Vec<u8> = (0..24).map(|_| rng.random_range(0..2u8)).collect();
            let s = qam_map(&bits, 2).unwrap();
            let ext = fdcp_add(&s, 4);
            let x = sefdm_modulate(&ext, &frame).unwrap();
            let y = crate::channel::apply_paths(&x, &ps);
            let eq = equalize_doppler_time_division(&y, &ps).unwrap();
            let z = sefdm_demodulate(&eq, &frame).unwrap();
            assert_eq!(qam_demap(&z.values[4..]), bits);
        }
    }
}
