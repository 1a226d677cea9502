//! Acceptance suite. Prints one `AC-n PASS|FAIL` line per criterion and
//! exits non-zero if any criterion fails.

use std::time::Instant;

use lte_chanest::channel_model::{apply_channel, generate_channel, PowerDelayProfile};
use lte_chanest::estimation::{
    beta_for_constellation, build_correlation_model, lmmse_estimate_full, lmmse_estimate_simplified,
};
use lte_chanest::link_proc::qpsk_map;
use lte_chanest::ofdm_phy::OfdmModem;
use lte_chanest::resource_grid::{build_pilot_pattern, data_capacity, map_to_grid, Constellation, SystemConfig};
use lte_chanest::rng::stream;
use lte_chanest::sim_harness::{
    run_sweep_detailed, write_csv, EstimatorKind, LinkSimulator, SweepConfig, SweepOutput, SweepRecord,
    TrialEstimator,
};
use lte_chanest::Cplx;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn snr_grid() -> Vec<f64> {
    (0..=6).map(|i| 5.0 * i as f64).collect()
}

fn sweep(lengths: &[usize], n_frames: usize, estimators: &[EstimatorKind]) -> SweepOutput {
    let cfg = SweepConfig {
        channel_lengths: lengths.to_vec(),
        snr_grid_db: snr_grid(),
        n_frames,
        estimators: estimators.to_vec(),
        ..SweepConfig::default()
    };
    run_sweep_detailed(&cfg).expect("sweep")
}

fn find(records: &[SweepRecord], l: usize, snr: f64, est: EstimatorKind) -> &SweepRecord {
    records
        .iter()
        .find(|r| r.channel_len == l && r.snr_db == snr && r.estimator == est)
        .expect("grid point")
}

fn ac1() -> Verdict {
    let config = SystemConfig::default();
    let pattern = build_pilot_pattern(&config).unwrap();
    let mut rng = stream(1, &[]);
    let data: Vec<Vec<Cplx>> = data_capacity(&config, &pattern)
        .into_iter()
        .map(|n| {
            let bits: Vec<u8> = (0..2 * n).map(|_| rng.random::<bool>() as u8).collect();
            qpsk_map(&bits).unwrap()
        })
        .collect();
    let pilot_bits: Vec<u8> = (0..2 * pattern.len()).map(|_| rng.random::<bool>() as u8).collect();
    let grid = map_to_grid(&config, &pattern, &data, &qpsk_map(&pilot_bits).unwrap()).unwrap();

    let ch = generate_channel(&PowerDelayProfile::uniform(10).unwrap(), 2, 2, &mut rng);
    let modem = OfdmModem::new(&config).unwrap();
    let rx = modem
        .demodulate_signal(&apply_channel(&modem.modulate_grid(&grid).unwrap(), &ch).unwrap())
        .unwrap();
    let mut worst = 0.0f64;
    for (r, y) in rx.iter().enumerate() {
        let h: Vec<Vec<Cplx>> = (0..2).map(|t| ch.response_on_used(t, r, &config)).collect();
        for sym in 0..config.n_symbols_per_slot {
            for k in 0..config.n_used {
                let hx: Cplx = (0..2).map(|t| h[t][k] * grid.get(k, sym, t)).sum();
                if hx.norm() > 1e-9 {
                    worst = worst.max((y.get(k, sym) - hx).norm() / hx.norm());
                }
            }
        }
    }
    verdict(worst < 1e-10, format!("L=10 noiseless, max relative residual {worst:.2e} (< 1e-10)"))
}

fn ac2() -> Verdict {
    let sim = LinkSimulator::new(SystemConfig::default(), PowerDelayProfile::uniform(6).unwrap(), 2).unwrap();
    // 30 slots x 4 antenna pairs x 100 pilots = 12000 observations per SNR
    let mut pass = true;
    let mut parts = Vec::new();
    for snr in [0.0, 10.0, 20.0] {
        let stats = sim.run_cell(snr, &TrialEstimator::Ls, 30, 7, &[snr as u64]).unwrap();
        let want = 10f64.powf(-snr / 10.0);
        let rel = (stats.mse_pilot - want).abs() / want;
        pass &= rel < 0.10;
        parts.push(format!("{snr:.0} dB: {:.4e} vs {want:.1e} ({:.1}%)", stats.mse_pilot, 100.0 * rel));
    }
    verdict(pass, format!("LS pilot MSE vs 1/SNR: {}", parts.join(", ")))
}

fn ac3(out: &SweepOutput) -> Verdict {
    let mut bad = Vec::new();
    for l in [6, 10] {
        for snr in snr_grid() {
            let ls = find(&out.records, l, snr, EstimatorKind::Ls);
            let lm = find(&out.records, l, snr, EstimatorKind::Lmmse);
            if !(lm.mse_all_subcarriers < ls.mse_all_subcarriers && lm.mse_pilot_subcarriers < ls.mse_pilot_subcarriers) {
                bad.push(format!("L={l} {snr} dB"));
            }
        }
    }
    let r = find(&out.records, 10, 30.0, EstimatorKind::Ls);
    let m = find(&out.records, 10, 30.0, EstimatorKind::Lmmse);
    verdict(
        bad.is_empty(),
        format!(
            "L in {{6,10}}, 200 trials: LMMSE below LS at all 14 points in both columns; violations {:?}; \
             L=10 30 dB all-subcarrier LS {:.3e} LMMSE {:.3e}",
            bad, r.mse_all_subcarriers, m.mse_all_subcarriers
        ),
    )
}

fn ac4(out: &SweepOutput) -> Verdict {
    let mse = |snr: f64, est| find(&out.records, 40, snr, est).mse_all_subcarriers;
    let low = mse(0.0, EstimatorKind::Lmmse) < mse(0.0, EstimatorKind::Ls);
    let high = mse(30.0, EstimatorKind::Ls) < mse(30.0, EstimatorKind::Lmmse);
    let t = out.thresholds_db[0].unwrap_or(f64::NAN);
    let finite = t.is_finite() && t > 0.0 && t < 30.0;
    verdict(
        low && high && finite,
        format!(
            "L=40, 500 trials: 0 dB LS {:.3e} LMMSE {:.3e} (LMMSE better: {low}); \
             30 dB LS {:.3e} LMMSE {:.3e} (LS better: {high}); calibrated threshold {t} dB (finite in (0,30): {finite})",
            mse(0.0, EstimatorKind::Ls),
            mse(0.0, EstimatorKind::Lmmse),
            mse(30.0, EstimatorKind::Ls),
            mse(30.0, EstimatorKind::Lmmse),
        ),
    )
}

fn ac5(short: &SweepOutput, long: &SweepOutput) -> Verdict {
    let mut bad = Vec::new();
    let mut check = |out: &SweepOutput, l: usize, threshold: Option<f64>| {
        for snr in snr_grid() {
            let h = find(&out.records, l, snr, EstimatorKind::Hybrid);
            let ls = find(&out.records, l, snr, EstimatorKind::Ls);
            let lm = find(&out.records, l, snr, EstimatorKind::Lmmse);
            for (hy, a, b, col) in [
                (h.mse_all_subcarriers, ls.mse_all_subcarriers, lm.mse_all_subcarriers, "all"),
                (h.mse_pilot_subcarriers, ls.mse_pilot_subcarriers, lm.mse_pilot_subcarriers, "pilot"),
            ] {
                if hy > 1.05 * a.min(b) {
                    bad.push(format!("L={l} {snr} dB {col}: {hy:.3e} > 1.05 x {:.3e}", a.min(b)));
                }
            }
            let want = match threshold {
                None => 0.0,
                Some(t) => (snr >= t) as u8 as f64,
            };
            if h.branch_fraction_ls != Some(want) {
                bad.push(format!("L={l} {snr} dB branch fraction {:?}, expected {want}", h.branch_fraction_ls));
            }
        }
    };
    check(short, 6, None);
    check(short, 10, None);
    check(long, 40, long.thresholds_db[0]);
    verdict(
        bad.is_empty(),
        format!(
            "hybrid within 5% of the better estimator and branch fractions match (L=40 threshold {:?} dB); violations {:?}",
            long.thresholds_db[0], bad
        ),
    )
}

fn ac6() -> Verdict {
    let config = SystemConfig::default();
    let mut rng = stream(6, &[]);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let l = rng.random_range(1..=40);
        let pdp = PowerDelayProfile::uniform(l).unwrap();
        let n_p = rng.random_range(10..=100);
        let mut positions: Vec<usize> = (0..config.n_used).collect();
        // partial Fisher-Yates for a random pilot subset
        for i in 0..n_p {
            let j = rng.random_range(i..positions.len());
            positions.swap(i, j);
        }
        positions.truncate(n_p);
        positions.sort_unstable();
        let corr = build_correlation_model(&pdp, &positions, &config).unwrap();
        let x_p: Vec<Cplx> = (0..n_p)
            .map(|_| Cplx::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let h_ls: Vec<Cplx> = (0..n_p)
            .map(|_| Cplx::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let snr = 10f64.powf(rng.random_range(-5.0..35.0) / 10.0);
        let full = lmmse_estimate_full(&h_ls, &corr, &x_p, 1.0 / snr).unwrap();
        let simple = lmmse_estimate_simplified(&h_ls, &corr, snr, 1.0).unwrap();
        for (a, b) in full.h_hat.iter().zip(&simple.h_hat) {
            worst = worst.max((a - b).norm());
        }
    }
    verdict(worst < 1e-12, format!("100 random instances, max |full - simplified| = {worst:.2e} (< 1e-12)"))
}

fn ac7() -> Verdict {
    let q = beta_for_constellation(Constellation::Qpsk);
    let m = beta_for_constellation(Constellation::Qam16);
    verdict(q == 1.0 && m == 17.0 / 9.0, format!("QPSK {q}, 16-QAM {m} (17/9 = {})", 17.0 / 9.0))
}

fn ac8(short: &SweepOutput) -> Verdict {
    let mut detail = Vec::new();
    let mut pass = true;
    for l in [6, 16] {
        let sim = LinkSimulator::new(SystemConfig::default(), PowerDelayProfile::uniform(l).unwrap(), 8).unwrap();
        let stats = sim.run_cell(f64::INFINITY, &TrialEstimator::PerfectCsi, 100, 8, &[]).unwrap();
        pass &= stats.ber == 0.0;
        detail.push(format!("perfect CSI noiseless L={l}: BER {} over 100 frames", stats.ber));
    }
    let mut bad = Vec::new();
    for l in [6, 10] {
        for est in EstimatorKind::ALL {
            let bers: Vec<f64> = snr_grid().iter().map(|&s| find(&short.records, l, s, est).ber).collect();
            if bers.windows(2).any(|w| w[1] > w[0]) {
                bad.push(format!("L={l} {}: {bers:?}", est.name()));
            }
        }
    }
    pass &= bad.is_empty();
    detail.push(format!("BER non-increasing in SNR for every estimator; violations {bad:?}"));
    verdict(pass, detail.join("; "))
}

fn ac9() -> Verdict {
    let cfg = SweepConfig::default();
    let render = || {
        let mut buf = Vec::new();
        write_csv(&run_sweep_detailed(&cfg).unwrap().records, &mut buf).unwrap();
        buf
    };
    let a = render();
    let b = render();
    verdict(
        a == b,
        format!("two default sweeps (seed {}), {} bytes each, identical: {}", cfg.seed, a.len(), a == b),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, t: Instant, v: Verdict| {
        println!(
            "{name} {} [{:.1}s] {}",
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
        failed += !v.pass as usize;
    };

    let t = Instant::now();
    report("AC-1", t, ac1());
    let t = Instant::now();
    report("AC-2", t, ac2());

    let t = Instant::now();
    let short = sweep(&[6, 10], 200, &EstimatorKind::ALL);
    report("AC-3", t, ac3(&short));
    let t = Instant::now();
    let long = sweep(&[40], 500, &[EstimatorKind::Ls, EstimatorKind::Lmmse, EstimatorKind::Hybrid]);
    report("AC-4", t, ac4(&long));
    let t = Instant::now();
    report("AC-5", t, ac5(&short, &long));

    let t = Instant::now();
    report("AC-6", t, ac6());
    let t = Instant::now();
    report("AC-7", t, ac7());
    let t = Instant::now();
    report("AC-8", t, ac8(&short));
    let t = Instant::now();
    report("AC-9", t, ac9());

    println!("acceptance: {} of 9 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
