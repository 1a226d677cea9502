//! Monte Carlo MSE/BER sweep over SNR and channel length.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;

use lte_chanest::sim_harness::{
    emit_csv, parse_list, parse_snr_grid, run_sweep_detailed, write_csv, EstimatorKind, SweepConfig,
};

#[derive(Debug, Parser)]
#[command(name = "simulate", about = "LTE downlink channel-estimation sweep (LS / LMMSE / hybrid)")]
struct Args {
    /// key=value configuration file; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,

    /// SNR grid in dB as start:stop:step (inclusive) or a comma list
    #[arg(long)]
    snr: Option<String>,

    /// Comma-separated channel lengths in taps
    #[arg(long = "channel-lengths")]
    channel_lengths: Option<String>,

    /// Trials (slots) per grid cell
    #[arg(long)]
    frames: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Comma list from ls,lmmse,hybrid,perfect
    #[arg(long)]
    estimators: Option<String>,

    /// Fixed hybrid switching SNR in dB
    #[arg(long = "threshold-db", conflicts_with = "calibrate_threshold")]
    threshold_db: Option<f64>,

    /// Calibrate the hybrid switching SNR from an LS/LMMSE sweep (default
    /// unless a threshold is configured)
    #[arg(long = "calibrate-threshold")]
    calibrate_threshold: bool,

    /// CSV destination; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,

    /// Print per-cell means to standard output
    #[arg(long)]
    summary: bool,
}

fn main() -> Result<()> {
    let args = Args::parse();

    let mut cfg = match &args.config {
        Some(p) => SweepConfig::from_file(p)?,
        None => SweepConfig::default(),
    };
    if let Some(s) = &args.snr {
        cfg.snr_grid_db = parse_snr_grid(s)?;
    }
    if let Some(s) = &args.channel_lengths {
        cfg.channel_lengths = parse_list(s)?;
    }
    if let Some(n) = args.frames {
        cfg.n_frames = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = &args.estimators {
        cfg.estimators = parse_list::<EstimatorKind>(s)?;
    }
    if let Some(t) = args.threshold_db {
        cfg.threshold_override_db = Some(t);
    }
    if args.calibrate_threshold {
        cfg.threshold_override_db = None;
    }
    cfg.validate()?;
    if args.out.is_none() && args.summary {
        bail!("--summary needs --out, standard output is reserved for the CSV otherwise");
    }

    let out = run_sweep_detailed(&cfg)?;

    match &args.out {
        Some(path) => emit_csv(&out.records, path)?,
        None => write_csv(&out.records, std::io::stdout().lock()).context("writing CSV to stdout")?,
    }

    if args.summary {
        for (l, t) in cfg.channel_lengths.iter().zip(&out.thresholds_db) {
            match t {
                Some(t) if t.is_finite() => println!("L={l}: hybrid switches to LS at SNR >= {t:.2} dB"),
                Some(_) => println!("L={l}: hybrid stays on LMMSE at every SNR"),
                None => {}
            }
        }
        println!(
            "{:>4} {:>7} {:>8} {:>12} {:>12} {:>12} {:>6}",
            "L", "SNR", "est", "MSE(all)", "MSE(pilot)", "BER", "LS%"
        );
        for r in &out.records {
            println!(
                "{:>4} {:>7.2} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>6}",
                r.channel_len,
                r.snr_db,
                r.estimator.name(),
                r.mse_all_subcarriers,
                r.mse_pilot_subcarriers,
                r.ber,
                r.branch_fraction_ls
                    .map(|f| format!("{:.0}", 100.0 * f))
                    .unwrap_or_default(),
            );
        }
    }
    Ok(())
}
