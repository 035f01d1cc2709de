use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sefdm::channel::{unit_noise, PathSet};
use sefdm::detect::{ml_oracle, reg_sphere_decode, DetectorConfig};
use sefdm::frame::{qam_map, FrameSpec, C64};
use sefdm::harness::{emit_csv, qpsk_ber, run_scenario, ScenarioConfig};
use sefdm::linkmap::{AdjacentFrames, LinkChain};
use sefdm::{Error, Result};

#[derive(Parser)]
#[command(name = "sefdm", version, about = "SEFDM link-level BER simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its BER table.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare the sphere decoder against exhaustive search on random
    /// AWGN instances.
    OracleCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        instances: u64,
        #[arg(long, default_value_t = 6.0)]
        ebn0: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the QPSK-over-AWGN reference BER.
    TheoryCheck {
        /// Comma-separated Eb/N0 values in dB.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        ebn0: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if workers == Some(0) {
                return Err(Error::Config("--workers must be at least 1".into()));
            }
            let records = run_scenario(&cfg, workers)?;
            emit_csv(&records, &out)?;
            for r in &records {
                println!(
                    "{} alpha={} ebn0={} {} ber={:.3e} ({}/{})",
                    r.scenario_id, r.alpha, r.ebn0_db, r.detector, r.ber, r.bit_errors, r.bits
                );
            }
            Ok(())
        }
        Command::OracleCheck {
            n,
            alpha,
            instances,
            ebn0,
            seed,
        } => oracle_check(n, alpha, instances, ebn0, seed),
        Command::TheoryCheck { ebn0 } => {
            if ebn0.is_empty() {
                return Err(Error::InvalidParameter(
                    "--ebn0 needs at least one value".into(),
                ));
            }
            println!("ebn0_db,qpsk_ber");
            for e in ebn0 {
                println!("{e},{}", qpsk_ber(e));
            }
            Ok(())
        }
    }
}

fn oracle_check(n: usize, alpha: f64, instances: u64, ebn0: f64, seed: u64) -> Result<()> {
    let frame = FrameSpec::new(n, 0, alpha, 45e3)?;
    let chain = LinkChain::new(frame, None, 0, AdjacentFrames::None)?;
    let identity = PathSet::identity();
    let eff = chain.probe(&identity)?;
    let det = DetectorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agree = 0u64;
    let mut nodes = 0u64;
    for _ in 0..instances {
        let bits: Vec<u8> = (0..2 * n).map(|_| rng.random_range(0..2u8)).collect();
        let s = qam_map(&bits, 2)?.values;
        let tx = chain.transmit(&s, None)?;
        let var = sefdm::channel::noise_variance(tx.eb, ebn0);
        let clean = chain.observe(&s, None, &identity)?;
        let noise = unit_noise(clean.len(), rng.random());
        let y: Vec<C64> = clean
            .iter()
            .zip(&noise)
            .map(|(c, w)| c + w * var.sqrt())
            .collect();
        let z = chain.matched(&y);
        let init = sefdm::detect::im_detect(&sefdm::frame::SymbolVector::data(z), &eff, &det)?;
        let sd = reg_sphere_decode(&y, &eff, var, u64::MAX, Some(&init.outcome.symbols.values))?;
        let ml = ml_oracle(&y, &eff, var)?;
        nodes += sd.nodes;
        if sd.symbols == ml {
            agree += 1;
        }
    }
    println!(
        "n={n} alpha={alpha} ebn0={ebn0} instances={instances} agree={agree} avg_nodes={:.1}",
        nodes as f64 / instances.max(1) as f64
    );
    if agree != instances {
        return Err(Error::CheckFailed(format!(
            "sphere decoder disagreed with exhaustive search on {} of {instances} instances",
            instances - agree
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!(
                "{}",
                serde_json::json!({ "error": "usage", "message": first })
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
