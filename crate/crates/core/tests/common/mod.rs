#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sefdm::channel::{noise_variance, unit_noise, Path, PathSet};
use sefdm::detect::{DetectorConfig, SliceMode};
use sefdm::frame::{qam_map, FrameSpec, C64};
use sefdm::linkmap::{AdjacentFrames, LinkChain};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

pub fn random_symbols(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    qam_map(&random_bits(rng, 2 * n), 2).unwrap().values
}

pub fn plain_chain(n_data: usize, l_guard: usize, alpha: f64) -> LinkChain {
    let frame = FrameSpec::new(n_data, l_guard, alpha, 45e3).unwrap();
    LinkChain::new(frame, None, 0, AdjacentFrames::None).unwrap()
}

pub fn frequency_chain(n_data: usize, l_guard: usize, alpha: f64) -> LinkChain {
    let frame = FrameSpec::new(n_data, l_guard, alpha, 45e3).unwrap();
    LinkChain::new(frame, None, 0, AdjacentFrames::Frequency).unwrap()
}

pub fn doppler_paths(spec: &[(C64, f64)]) -> PathSet {
    PathSet::new(
        spec.iter()
            .map(|&(gain, doppler)| Path {
                gain,
                delay: 0.0,
                doppler,
            })
            .collect(),
    )
    .unwrap()
}

/// Noisy observation of `s` through `chain` over the identity channel.
pub fn noisy_observation(chain: &LinkChain, s: &[C64], ebn0_db: f64, seed: u64) -> (Vec<C64>, f64) {
    let tx = chain.transmit(s, None).unwrap();
    let var = noise_variance(tx.eb, ebn0_db);
    let noise = unit_noise(tx.samples.len(), seed);
    let y: Vec<C64> = tx
        .samples
        .values
        .iter()
        .zip(&noise)
        .map(|(x, w)| x + w * var.sqrt())
        .collect();
    (chain.receive(&y, tx.origin), var)
}

pub fn hard(lambda: f64, eta: usize) -> DetectorConfig {
    DetectorConfig {
        mode: SliceMode::Hard,
        lambda,
        eta,
        ..DetectorConfig::default()
    }
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
