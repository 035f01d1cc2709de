//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use sefdm::channel::{apply_paths, Path as ChannelPath, PathSet};
use sefdm::detect::{
    im_detect, im_mnl_detect, ml_oracle, mnl_accelerate, DetectionInput, Detector, DetectorConfig,
    SliceMode,
};
use sefdm::frame::{gram_matrix, FrameSpec, SampleVector, SymbolVector, C64};
use sefdm::harness::{
    emit_csv, qpsk_ber, run_scenario, run_scenario_with, BerRecord, ScenarioConfig,
};
use sefdm::linkmap::{AdjacentFrames, LinkChain};
use sefdm::shaping::{rrc_taps, shape_down, shape_up, ShapingSpec};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn scenario(json: serde_json::Value) -> ScenarioConfig {
    ScenarioConfig::from_json(&json.to_string(), None).unwrap()
}

fn shipped(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"));
    ScenarioConfig::from_file(&path).unwrap()
}

fn find<'a>(records: &'a [BerRecord], ebn0: f64, detector: &str) -> &'a BerRecord {
    records
        .iter()
        .find(|r| r.ebn0_db == ebn0 && r.detector == detector)
        .unwrap_or_else(|| panic!("no record for {ebn0} dB / {detector}"))
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn theory_anchor() -> Verdict {
    let ebn0 = [0.0, 2.0, 4.0, 6.0, 8.0];
    let n_data = 64;
    let bits_needed = ebn0
        .iter()
        .map(|&e| (2000.0 / qpsk_ber(e)).max(1e6))
        .fold(0.0, f64::max);
    let trials = (bits_needed / (2 * n_data) as f64).ceil() as u64;
    let cfg = scenario(serde_json::json!({
        "id": "theory_anchor",
        "frame": { "n_data": n_data, "l_guard": 0 },
        "shaping": { "beta": 0.25, "sps": 10, "span": 16 },
        "channel": { "type": "awgn" },
        "detector": { "mode": "hard", "lambda": 1.0, "eta": 1 },
        "alphas": [1.0], "ebn0_db": ebn0, "trials": trials, "master_seed": 101
    }));
    let t = Instant::now();
    let records = run_scenario(&cfg, None).unwrap();
    let elapsed = t.elapsed();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for r in &records {
        let dev = r.ber / qpsk_ber(r.ebn0_db) - 1.0;
        worst = worst.max(dev.abs());
        parts.push(format!("{}dB {:+.1}%", r.ebn0_db, 100.0 * dev));
    }
    let pass = worst <= 0.10 && elapsed < Duration::from_secs(120);
    Verdict::new(
        pass,
        format!(
            "{} bits/point; {}; worst {:.1}% (tol 10%), {} (limit 120 s)",
            trials * 2 * n_data as u64,
            parts.join(", "),
            100.0 * worst,
            secs(elapsed)
        ),
    )
}

fn sd_matches_ml() -> Verdict {
    let t = Instant::now();
    let mut r = rng(102);
    let det = DetectorConfig {
        sd_enabled: true,
        ..hard(1.0, 10)
    };
    let mut total = 0;
    let mut agree = 0;
    for alpha in [0.75, 0.8, 0.9] {
        for n in [4, 6] {
            let chain = plain_chain(n, 0, alpha);
            let eff = chain.probe(&PathSet::identity()).unwrap();
            for ebn0 in [4.0, 8.0] {
                for i in 0..500u64 {
                    let s = random_symbols(&mut r, n);
                    let (obs, var) = noisy_observation(&chain, &s, ebn0, r.random::<u64>() ^ i);
                    let z = chain.matched(&obs);
                    let input = DetectionInput {
                        obs: &obs,
                        z: &z,
                        eff: &eff,
                        noise_var: var,
                    };
                    let out = det.detect(&input).unwrap();
                    total += 1;
                    if !out.truncated && out.symbols.values == ml_oracle(&obs, &eff, var).unwrap() {
                        agree += 1;
                    }
                }
            }
        }
    }
    let elapsed = t.elapsed();
    Verdict::new(
        agree == total && elapsed < Duration::from_secs(60),
        format!(
            "{agree}/{total} instances agree (need all), {} (limit 60 s)",
            secs(elapsed)
        ),
    )
}

fn mnl_exactness() -> Verdict {
    let mut r = rng(103);
    let mut cplx =
        |lo: f64, hi: f64| C64::from_polar(r.random_range(lo..hi), r.random_range(0.0..2.0 * PI));
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let star = cplx(0.0, 2.0);
        let c = cplx(0.5, 2.0);
        // Converging and diverging ratios exercise both branches.
        let ratio = if i % 2 == 0 {
            cplx(0.3, 0.7)
        } else {
            cplx(1.4, 2.0)
        };
        let x: Vec<C64> = (0..4).map(|k| star + c * ratio.powi(k)).collect();
        worst = worst.max((mnl_accelerate(x[0], x[1], x[2], x[3], 1e-10) - star).norm());
    }
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let x: Vec<C64> = (0..4).map(|_| cplx(0.0, 3.0)).collect();
        let s1 = x[3] + x[1] - 2.0 * x[2];
        let s0 = x[2] + x[0] - 2.0 * x[1];
        let via_s1 = (x[3] * x[1] - x[2] * x[2]) / s1;
        let via_s0 = (x[2] * x[0] - x[1] * x[1]) / s0;
        let want = if s0.norm() <= s1.norm() {
            via_s1
        } else {
            via_s0
        };
        if mnl_accelerate(x[0], x[1], x[2], x[3], 1e-10) != want {
            mismatches += 1;
        }
    }
    Verdict::new(
        worst < 1e-12 && mismatches == 0,
        format!(
            "geometric limit error {worst:.1e} (tol 1e-12) over 1e4 sequences; branch mismatches {mismatches}/10000"
        ),
    )
}

/// Relaxation values for which all frames reach a residual below 1e-6.
fn stable_lambdas(mnl: bool, lambdas: &[f64], chain: &LinkChain, zs: &[Vec<C64>]) -> Vec<f64> {
    let eff = chain.probe(&PathSet::identity()).unwrap();
    lambdas
        .iter()
        .copied()
        .filter(|&lambda| {
            let cfg = DetectorConfig {
                mnl_enabled: mnl,
                ..hard(lambda, 50)
            };
            zs.iter().all(|z| {
                let z = SymbolVector::data(z.clone());
                let res = if mnl {
                    im_mnl_detect(&z, &eff, &cfg).map(|o| o.residual)
                } else {
                    im_detect(&z, &eff, &cfg).map(|t| t.outcome.residual)
                };
                matches!(res, Ok(v) if v < 1e-6)
            })
        })
        .collect()
}

fn mnl_benefit() -> Verdict {
    let mut dets = Vec::new();
    for mode in [SliceMode::Hard, SliceMode::Soft] {
        for lambda in [0.8, 1.0, 1.2, 1.4] {
            for mnl in [false, true] {
                dets.push(DetectorConfig {
                    mode,
                    lambda,
                    eta: 10,
                    mnl_enabled: mnl,
                    ..DetectorConfig::default()
                });
            }
        }
    }
    let mut cfg = shipped("fig2_awgn");
    cfg.alphas = vec![0.85];
    cfg.ebn0_db = vec![8.0];
    cfg.trials = 100_000u64.div_ceil(2 * cfg.frame.n_data as u64);
    let gated = cfg.detectors();
    let as_dyn: Vec<&dyn Detector> = dets.iter().map(|d| d as &dyn Detector).collect();
    let records = run_scenario_with(&cfg, &as_dyn, None).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, pair) in records.chunks(2).enumerate() {
        let (plain, accel) = (&pair[0], &pair[1]);
        let lambda = dets[2 * i].lambda;
        let in_gate = gated
            .iter()
            .any(|g| g.label() == accel.detector && g.lambda == lambda);
        if in_gate {
            ok &= accel.ber <= plain.ber;
        }
        parts.push(format!(
            "{}{}@{lambda} {}->{}",
            if in_gate { "*" } else { "" },
            plain.detector,
            plain.bit_errors,
            accel.bit_errors
        ));
    }

    let lambdas: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
    let chain = plain_chain(64, 0, 0.85);
    let mut r = rng(104);
    let zs: Vec<Vec<C64>> = (0..100)
        .map(|_| {
            let s = random_symbols(&mut r, 64);
            chain.matched(&chain.observe(&s, None, &PathSet::identity()).unwrap())
        })
        .collect();
    let plain = stable_lambdas(false, &lambdas, &chain, &zs);
    let accel = stable_lambdas(true, &lambdas, &chain, &zs);
    let superset = plain.iter().all(|l| accel.contains(l));
    let max = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::max);
    Verdict::new(
        ok && superset && !plain.is_empty(),
        format!(
            "bit errors IM->IM+MNL over {} bits [{}] (* gated); stable lambda up to {:.1} plain, {:.1} with MNL, superset {}",
            records[0].bits,
            parts.join(", "),
            max(&plain),
            max(&accel),
            superset
        ),
    )
}

fn fdcp_doppler() -> Verdict {
    let p2: f64 = 0.02;
    let weak = C64::from_polar(p2.sqrt(), 0.7);
    let paths = serde_json::json!({
        "type": "paths",
        "paths": [
            { "gain": [(1.0 - p2).sqrt(), 0.0], "doppler": 3.0 * 45e3 },
            { "gain": [weak.re, weak.im], "doppler": 2.0 * 45e3 }
        ]
    });
    let n_data = 6;
    let trials = 1_000_000u64.div_ceil(2 * n_data);
    let make = |l_guard: usize, channel: &serde_json::Value| {
        scenario(serde_json::json!({
            "id": "fdcp_doppler",
            "frame": { "n_data": n_data, "l_guard": l_guard },
            "channel": channel,
            "adjacent_frames": "frequency",
            "detector": { "mode": "hard", "lambda": 1.0, "eta": 10, "sd_enabled": true },
            "alphas": [1.0], "ebn0_db": [4.0, 6.0], "trials": trials, "master_seed": 105
        }))
    };
    let base = run_scenario(&make(3, &serde_json::json!({ "type": "awgn" })), None).unwrap();
    let guarded = run_scenario(&make(3, &paths), None).unwrap();
    let ablated = run_scenario(&make(0, &paths), None).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for ((b, g), a) in base.iter().zip(&guarded).zip(&ablated) {
        let dev = g.ber / b.ber - 1.0;
        let worse = a.ber / g.ber;
        ok &= dev.abs() <= 0.15 && worse >= 5.0;
        parts.push(format!(
            "{}dB: awgn {:.3e}, fdcp {:.3e} ({:+.1}%), no guard {:.3e} ({:.1}x)",
            b.ebn0_db,
            b.ber,
            g.ber,
            100.0 * dev,
            a.ber,
            worse
        ));
    }
    Verdict::new(
        ok,
        format!(
            "{} bits/point; {} (tol 15%, ablation >= 5x)",
            guarded[0].bits,
            parts.join("; ")
        ),
    )
}

fn invariant_suites() -> Verdict {
    let mut failures = Vec::new();

    let mut gram_err: f64 = 0.0;
    for alpha in [0.7, 0.75, 0.8, 0.85, 0.9, 1.0] {
        for n in 1..=64 {
            let spec = FrameSpec::new(n, 0, alpha, 45e3).unwrap();
            let closed = gram_matrix(&spec);
            for k in 0..n {
                for l in 0..n {
                    let direct: C64 = (0..n)
                        .map(|m| {
                            let d = l as f64 - k as f64;
                            C64::from_polar(1.0, 2.0 * PI * alpha * m as f64 * d / n as f64)
                        })
                        .sum::<C64>()
                        / n as f64;
                    gram_err = gram_err.max((closed[(k, l)] - direct).norm());
                }
            }
        }
    }
    if gram_err >= 1e-12 {
        failures.push("gram");
    }

    let paper = ShapingSpec::new(0.25, 10, 16).unwrap();
    let taps = rrc_taps(&paper);
    let mut isi: f64 = 0.0;
    let centre = taps.len() - 1;
    for j in (0..2 * taps.len() - 1).step_by(paper.sps) {
        let v: f64 = taps
            .iter()
            .enumerate()
            .filter_map(|(i, h)| j.checked_sub(i).and_then(|m| taps.get(m)).map(|g| h * g))
            .sum();
        if j != centre {
            isi = isi.max(v.abs());
        }
    }
    if isi >= 1e-3 {
        failures.push("nyquist");
    }

    let round_trip = |spec: &ShapingSpec| -> f64 {
        let mut r = rng(106);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let s = random_symbols(&mut r, 64);
            let x = SampleVector::new(s.clone(), 1.0).unwrap();
            let back = shape_down(&shape_up(&x, spec), spec, 64).unwrap();
            worst = worst.max(max_abs_diff(&back.values, &s));
        }
        worst
    };
    let rt_paper = round_trip(&paper);
    let rt_long = round_trip(&ShapingSpec::new(0.25, 10, 64).unwrap());
    if rt_paper >= 1e-3 {
        failures.push("round-trip");
    }

    let mut r = rng(107);
    let mut lin_err: f64 = 0.0;
    for _ in 0..200 {
        let n = r.random_range(1..300);
        let paths: Vec<ChannelPath> = (0..r.random_range(1..5))
            .map(|_| ChannelPath {
                gain: C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)),
                delay: r.random_range(0.0..2e-6),
                doppler: r.random_range(-3e4..3e4),
            })
            .collect();
        let rate = 45e3 * 64.0 * 10.0;
        let x: Vec<C64> = (0..n)
            .map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect();
        let y: Vec<C64> = (0..n)
            .map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect();
        let a = C64::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let sv = |v: Vec<C64>| SampleVector::new(v, rate).unwrap();
        let ps = PathSet::new(paths.clone()).unwrap();
        let mix: Vec<C64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let lhs = apply_paths(&sv(mix), &ps);
        let (hx, hy) = (apply_paths(&sv(x.clone()), &ps), apply_paths(&sv(y), &ps));
        let rhs: Vec<C64> = hx
            .values
            .iter()
            .zip(&hy.values)
            .map(|(p, q)| a * p + q)
            .collect();
        lin_err = lin_err.max(max_abs_diff(&lhs.values, &rhs));
        let mut parts = vec![C64::new(0.0, 0.0); hx.len()];
        for p in &paths {
            let one = apply_paths(&sv(x.clone()), &PathSet::new(vec![*p]).unwrap());
            for (o, v) in parts.iter_mut().zip(one.values) {
                *o += v;
            }
        }
        lin_err = lin_err.max(max_abs_diff(&hx.values, &parts));
    }
    if lin_err >= 1e-12 {
        failures.push("channel linearity");
    }

    let mut probe_err: f64 = 0.0;
    for (i, adjacent) in [
        AdjacentFrames::None,
        AdjacentFrames::Time,
        AdjacentFrames::Frequency,
    ]
    .into_iter()
    .enumerate()
    {
        for alpha in [0.8, 1.0] {
            let frame = FrameSpec::new(8, 3, alpha, 45e3).unwrap();
            let chain = LinkChain::new(frame, Some(paper), i, adjacent).unwrap();
            let ps = PathSet::new(vec![
                ChannelPath {
                    gain: C64::new(0.8, 0.3),
                    delay: 0.0,
                    doppler: 500.0,
                },
                ChannelPath {
                    gain: C64::new(-0.2, 0.4),
                    delay: 120e-9,
                    doppler: -2500.0,
                },
            ])
            .unwrap();
            let eff = chain.probe(&ps).unwrap();
            for _ in 0..20 {
                let s = random_symbols(&mut r, 8);
                let got = chain.observe(&s, None, &ps).unwrap();
                let want = &eff.matrix_obs * nalgebra::DVector::from_vec(s);
                probe_err = probe_err.max(max_abs_diff(&got, want.as_slice()));
            }
        }
    }
    if probe_err >= 1e-9 {
        failures.push("probe linearity");
    }

    Verdict::new(
        failures.is_empty(),
        format!(
            "gram {gram_err:.1e} (tol 1e-12); nyquist ISI {isi:.1e} (tol 1e-3); round-trip {rt_paper:.1e} at span 16 \
             (tol 1e-3; {rt_long:.1e} at span 64); channel linearity {lin_err:.1e}; probe {probe_err:.1e} (tol 1e-9){}",
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

fn figure_smoke() -> Verdict {
    let t = Instant::now();
    let mut short = shipped("fig3_short_ds");
    short.alphas = vec![0.9];
    short.ebn0_db = vec![6.0];
    short.trials = 10_000;
    let s = run_scenario(&short, None).unwrap();
    let s6 = &s[0];

    let mut long = shipped("fig3_long_ds");
    long.alphas = vec![0.9];
    long.ebn0_db = vec![8.0, 12.0];
    long.trials = 10_000;
    let l = run_scenario(&long, None).unwrap();
    let label = &l[0].detector;
    let (l8, l12) = (find(&l, 8.0, label), find(&l, 12.0, label));

    let short_ok = s6.ber < 1e-3;
    let floor_ok = l12.ber.is_finite() && l12.ber > 0.0 && l8.ber / l12.ber <= 3.0;
    Verdict::new(
        short_ok && floor_ok,
        format!(
            "short DS @6dB BER {:.3e} (need < 1e-3: {}); long DS BER {:.3e} @8dB, {:.3e} @12dB, ratio {:.2} (need <= 3: {}); {} frames each, {}",
            s6.ber,
            if short_ok { "ok" } else { "no" },
            l8.ber,
            l12.ber,
            l8.ber / l12.ber,
            if floor_ok { "ok" } else { "no" },
            s6.trials,
            secs(t.elapsed())
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["fig2_awgn", "fig4b"] {
        let mut cfg = shipped(name);
        cfg.trials = 150;
        for (run, workers) in [(0, 1), (1, 1), (2, 2), (3, 4)] {
            let records = run_scenario(&cfg, Some(workers)).unwrap();
            let path = dir.path().join(format!("{name}_{run}.csv"));
            emit_csv(&records, &path).unwrap();
            outputs.push((name, std::fs::read(&path).unwrap()));
        }
    }
    let identical = outputs
        .chunks(4)
        .all(|group| group.iter().all(|(_, bytes)| *bytes == group[0].1));
    Verdict::new(
        identical,
        format!(
            "fig2_awgn and fig4b at 150 trials, two runs with 1 worker plus 2 and 4 workers: {}",
            if identical {
                "byte-identical"
            } else {
                "differ"
            }
        ),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        // Keeps `cargo test -- --list` usable.
        return;
    }
    type Check = (&'static str, fn() -> Verdict);
    let criteria: [Check; 8] = [
        ("theory anchor", theory_anchor),
        ("sphere decoder = exhaustive ML", sd_matches_ml),
        ("MNL exactness", mnl_exactness),
        ("MNL benefit and stability superset", mnl_benefit),
        ("FDCP Doppler compensation", fdcp_doppler),
        ("invariant suites", invariant_suites),
        ("figure smoke", figure_smoke),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{}] {} {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
