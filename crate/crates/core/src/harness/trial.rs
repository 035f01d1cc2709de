//! Seeded Monte Carlo trials and scenario sweeps.
//!
//! Trial `i` of a scenario draws everything from a ChaCha8 generator seeded
//! with the master seed and switched to stream `i`, so a trial's data,
//! channel and noise depend only on `(master_seed, i)`. The same trial draws
//! are reused for every Eb/N0 point and detector; only the noise scale
//! changes, which keeps comparisons between points low-variance.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ChannelModel, ScenarioConfig};
use crate::channel::{apply_paths_from, noise_variance, tdl_realize, unit_noise, PathSet};
use crate::detect::{DetectionInput, Detector};
use crate::error::{Error, Result};
use crate::frame::{qam_demap, qam_map, C64};
use crate::linkmap::{AdjacentFrames, EffectiveChannel, LinkChain, Neighbours};

/// One measured BER point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub scenario_id: String,
    pub alpha: f64,
    pub ebn0_db: f64,
    pub detector: String,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub avg_sd_nodes: f64,
    pub master_seed: u64,
}

/// Per-detector tallies of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialCounts {
    pub bit_errors: u64,
    pub bits: u64,
    pub sd_nodes: u64,
}

/// Generator for trial `index`.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

struct AlphaContext<'a> {
    chain: LinkChain,
    channel: &'a ChannelModel,
    cached: Option<EffectiveChannel>,
    master_seed: u64,
    alpha: f64,
}

impl<'a> AlphaContext<'a> {
    fn new(cfg: &ScenarioConfig, channel: &'a ChannelModel, alpha: f64) -> Result<Self> {
        let chain = cfg.link_chain(alpha)?;
        let cached = match channel {
            ChannelModel::Awgn => Some(chain.probe(&PathSet::identity())?),
            ChannelModel::Fixed(ps) => Some(chain.probe(ps)?),
            ChannelModel::Tdl { .. } => None,
        };
        Ok(AlphaContext {
            chain,
            channel,
            cached,
            master_seed: cfg.master_seed,
            alpha,
        })
    }

    fn wrap(&self, trial: u64, ebn0_db: f64) -> impl Fn(Error) -> Error + '_ {
        let alpha = self.alpha;
        move |e| Error::Trial {
            trial,
            alpha,
            ebn0_db,
            source: Box::new(e),
        }
    }

    /// Runs trial `index` at every Eb/N0 point; result is `[ebn0][detector]`.
    fn run(
        &self,
        index: u64,
        ebn0_db: &[f64],
        detectors: &[&dyn Detector],
    ) -> Result<Vec<Vec<TrialCounts>>> {
        let frame = self.chain.frame();
        let n_bits = frame.bits_per_frame();
        let mut rng = trial_rng(self.master_seed, index);
        let bits = random_bits(&mut rng, n_bits);
        let neighbours = match self.chain.adjacent() {
            AdjacentFrames::None => None,
            _ => {
                let before = random_bits(&mut rng, n_bits);
                let after = random_bits(&mut rng, n_bits);
                Some((before, after))
            }
        };
        let channel_seed = rng.next_u64();
        let noise_seed = rng.next_u64();

        let pre = self.wrap(index, f64::NAN);
        let own = qam_map(&bits, frame.bits_per_symbol).map_err(&pre)?.values;
        let neighbours = neighbours
            .map(|(b, a)| -> Result<Neighbours> {
                Ok(Neighbours {
                    before: qam_map(&b, frame.bits_per_symbol)?.values,
                    after: qam_map(&a, frame.bits_per_symbol)?.values,
                })
            })
            .transpose()
            .map_err(&pre)?;
        let realized;
        let ps = match self.channel {
            ChannelModel::Awgn => {
                realized = PathSet::identity();
                &realized
            }
            ChannelModel::Fixed(ps) => ps,
            ChannelModel::Tdl {
                profile,
                delay_spread,
                v_max,
                fc,
            } => {
                realized =
                    tdl_realize(profile, *delay_spread, *v_max, *fc, channel_seed).map_err(&pre)?;
                &realized
            }
        };
        let tx = self
            .chain
            .transmit(&own, neighbours.as_ref())
            .map_err(&pre)?;
        let y = apply_paths_from(&tx.samples, ps, tx.origin);
        let noise = unit_noise(y.len(), noise_seed);
        let obs_clean = self.chain.receive(&y.values, tx.origin);
        let obs_noise = self.chain.receive(&noise, tx.origin);
        let probed;
        let eff = match &self.cached {
            Some(e) => e,
            None => {
                probed = self.chain.probe(ps).map_err(&pre)?;
                &probed
            }
        };

        let mut out = Vec::with_capacity(ebn0_db.len());
        for &ebn0 in ebn0_db {
            let wrap = self.wrap(index, ebn0);
            let var = noise_variance(tx.eb, ebn0);
            let sigma = var.sqrt();
            let obs: Vec<C64> = obs_clean
                .iter()
                .zip(&obs_noise)
                .map(|(c, w)| c + w * sigma)
                .collect();
            let z = self.chain.matched(&obs);
            let input = DetectionInput {
                obs: &obs,
                z: &z,
                eff,
                noise_var: var,
            };
            let mut row = Vec::with_capacity(detectors.len());
            for det in detectors {
                let outcome = det.detect(&input).map_err(&wrap)?;
                let decided = qam_demap(&outcome.symbols.values);
                if decided.len() != bits.len() {
                    return Err(wrap(Error::shape(
                        "detected bits",
                        bits.len(),
                        decided.len(),
                    )));
                }
                let bit_errors = decided.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
                row.push(TrialCounts {
                    bit_errors,
                    bits: n_bits as u64,
                    sd_nodes: outcome.sd_nodes_visited,
                });
            }
            out.push(row);
        }
        Ok(out)
    }
}

fn as_dyn(dets: &[crate::detect::DetectorConfig]) -> Vec<&dyn Detector> {
    dets.iter().map(|d| d as &dyn Detector).collect()
}

/// One trial at one operating point, with the scenario's detectors.
pub fn run_trial(
    cfg: &ScenarioConfig,
    alpha: f64,
    ebn0_db: f64,
    trial_index: u64,
) -> Result<Vec<TrialCounts>> {
    let dets = cfg.detectors();
    run_trial_with(cfg, alpha, ebn0_db, trial_index, &as_dyn(&dets))
}

pub fn run_trial_with(
    cfg: &ScenarioConfig,
    alpha: f64,
    ebn0_db: f64,
    trial_index: u64,
    detectors: &[&dyn Detector],
) -> Result<Vec<TrialCounts>> {
    cfg.validate()?;
    let channel = cfg.channel_model()?;
    let ctx = AlphaContext::new(cfg, &channel, alpha)?;
    let mut rows = ctx.run(trial_index, &[ebn0_db], detectors)?;
    Ok(rows.remove(0))
}

/// Full sweep with the scenario's own detectors.
pub fn run_scenario(cfg: &ScenarioConfig, workers: Option<usize>) -> Result<Vec<BerRecord>> {
    let dets = cfg.detectors();
    run_scenario_with(cfg, &as_dyn(&dets), workers)
}

/// Full `alpha x Eb/N0 x detector` sweep. Records come out sorted by alpha,
/// then Eb/N0, then detector order. Results do not depend on `workers`.
pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    detectors: &[&dyn Detector],
    workers: Option<usize>,
) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    if detectors.is_empty() {
        return Err(Error::Config("at least one detector is required".into()));
    }
    let channel = cfg.channel_model()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut alphas = cfg.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    let mut ebn0 = cfg.ebn0_db.clone();
    ebn0.sort_by(f64::total_cmp);
    let labels: Vec<String> = detectors.iter().map(|d| d.label()).collect();

    let mut records = Vec::new();
    for &alpha in &alphas {
        let ctx = AlphaContext::new(cfg, &channel, alpha)?;
        let per_trial: Vec<Result<Vec<Vec<TrialCounts>>>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|i| ctx.run(i, &ebn0, detectors))
                .collect()
        });
        let mut totals = vec![vec![TrialCounts::default(); detectors.len()]; ebn0.len()];
        for r in per_trial {
            let rows = r?;
            for (tot_row, row) in totals.iter_mut().zip(rows) {
                for (tot, c) in tot_row.iter_mut().zip(row) {
                    tot.bit_errors += c.bit_errors;
                    tot.bits += c.bits;
                    tot.sd_nodes += c.sd_nodes;
                }
            }
        }
        for (e, row) in ebn0.iter().zip(totals) {
            for (label, t) in labels.iter().zip(row) {
                records.push(BerRecord {
                    scenario_id: cfg.id.clone(),
                    alpha,
                    ebn0_db: *e,
                    detector: label.clone(),
                    trials: cfg.trials,
                    bits: t.bits,
                    bit_errors: t.bit_errors,
                    ber: t.bit_errors as f64 / t.bits as f64,
                    avg_sd_nodes: t.sd_nodes as f64 / cfg.trials as f64,
                    master_seed: cfg.master_seed,
                });
            }
        }
    }
    Ok(records)
}
