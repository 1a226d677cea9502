//! Monte Carlo driver: one slot per trial through the full
//! TX -> channel -> RX -> estimate -> detect chain, swept over SNR and
//! channel length, with CSV output.
//!
//! Every trial draws its channel, payload and noise from an RNG stream keyed
//! by `(seed, length index, SNR index, trial index)`. The estimator is not
//! part of the key, so all estimators in a cell see the same realizations
//! and the results do not depend on thread scheduling.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;

use crate::channel_model::{add_awgn_in_place, apply_channel, generate_channel, NoiseSpec, PowerDelayProfile};
use crate::estimation::{
    beta_for_constellation, build_correlation_model, calibrate_threshold, interpolate_ls, ls_estimate,
    CorrelationModel, EstimatorUsed, HybridBranch, HybridPolicy, LmmseFilter,
};
use crate::link_proc::{qpsk_demap, qpsk_map, zf_detect, BitBlock};
use crate::ofdm_phy::OfdmModem;
use crate::resource_grid::{
    build_pilot_pattern, data_capacity, extract_pilots, map_to_grid, Bandwidth, Constellation, PilotPattern,
    SystemConfig,
};
use crate::rng::{stream, SimRng};
use crate::{Cplx, Error, Result};

/// Estimators a sweep can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Ls,
    Lmmse,
    Hybrid,
    PerfectCsi,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Ls,
        EstimatorKind::Lmmse,
        EstimatorKind::Hybrid,
        EstimatorKind::PerfectCsi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Lmmse => "lmmse",
            EstimatorKind::Hybrid => "hybrid",
            EstimatorKind::PerfectCsi => "perfect",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" => Ok(EstimatorKind::Ls),
            "lmmse" => Ok(EstimatorKind::Lmmse),
            "hybrid" => Ok(EstimatorKind::Hybrid),
            "perfect" | "perfectcsi" | "perfect_csi" => Ok(EstimatorKind::PerfectCsi),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Estimator of a single trial, with the hybrid policy resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialEstimator {
    Ls,
    Lmmse,
    Hybrid(HybridPolicy),
    PerfectCsi,
}

impl TrialEstimator {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            TrialEstimator::Ls => EstimatorKind::Ls,
            TrialEstimator::Lmmse => EstimatorKind::Lmmse,
            TrialEstimator::Hybrid(_) => EstimatorKind::Hybrid,
            TrialEstimator::PerfectCsi => EstimatorKind::PerfectCsi,
        }
    }
}

/// Result of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Σ|ĥ-h|² and Σ|h|² over all used subcarriers of every antenna pair.
    pub err_all: f64,
    pub power_all: f64,
    /// Same sums restricted to each port's pilot subcarriers.
    pub err_pilot: f64,
    pub power_pilot: f64,
    pub bit_errors: u64,
    pub bit_count: u64,
    /// Branch of the hybrid estimator, `None` for the other estimators.
    pub branch: Option<EstimatorUsed>,
    /// Data REs whose ZF solve was erased.
    pub erasures: usize,
}

impl TrialOutcome {
    pub fn mse_all(&self) -> f64 {
        self.err_all / self.power_all
    }

    pub fn mse_pilot(&self) -> f64 {
        self.err_pilot / self.power_pilot
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bit_count as f64
    }
}

/// Aggregate over the trials of one (length, SNR, estimator) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub estimator: EstimatorKind,
    pub snr_db: f64,
    pub channel_len: usize,
    pub mse_all: f64,
    pub mse_pilot: f64,
    pub ber: f64,
    pub n_trials: usize,
    pub branch_fraction_ls: Option<f64>,
    pub erasures: usize,
}

struct PortPilots {
    subcarriers: Vec<usize>,
    x_p: Vec<Cplx>,
    /// Distinct pilot subcarriers, ascending.
    unique_subcarriers: Vec<usize>,
    corr: CorrelationModel,
}

/// Everything that stays fixed across the trials of one channel length.
pub struct LinkSimulator {
    config: SystemConfig,
    pdp: PowerDelayProfile,
    modem: OfdmModem,
    pattern: PilotPattern,
    pilot_seq: Vec<Cplx>,
    ports: Vec<PortPilots>,
    capacity: Vec<usize>,
    /// Data REs shared by all antennas, in mapping order.
    data_positions: Vec<(usize, usize)>,
    beta: f64,
}

impl LinkSimulator {
    /// `pilot_seed` fixes the QPSK reference-signal values.
    pub fn new(config: SystemConfig, pdp: PowerDelayProfile, pilot_seed: u64) -> Result<Self> {
        config.validate()?;
        if config.constellation != Constellation::Qpsk {
            return Err(Error::UnsupportedConstellation(format!(
                "{} payload (only qpsk is simulated)",
                config.constellation
            )));
        }
        if config.n_rx < config.n_tx {
            return Err(Error::InvalidConfig("zero forcing needs n_rx >= n_tx".into()));
        }
        if pdp.span() > config.n_fft {
            return Err(Error::InvalidConfig(format!(
                "channel span {} exceeds n_fft {}",
                pdp.span(),
                config.n_fft
            )));
        }
        let modem = OfdmModem::new(&config)?;
        let pattern = build_pilot_pattern(&config)?;
        let mut rng = stream(pilot_seed, &[]);
        let pilot_bits = BitBlock::random(2 * pattern.len(), &mut rng);
        let pilot_seq = qpsk_map(&pilot_bits.bits)?;

        let ports = (0..config.n_tx)
            .map(|port| {
                let subcarriers: Vec<usize> =
                    pattern.port_entries(port).map(|e| e.subcarrier).collect();
                let x_p: Vec<Cplx> = pattern
                    .entries
                    .iter()
                    .zip(&pilot_seq)
                    .filter(|(e, _)| e.port == port)
                    .map(|(_, &x)| x)
                    .collect();
                let mut unique_subcarriers = subcarriers.clone();
                unique_subcarriers.sort_unstable();
                unique_subcarriers.dedup();
                let corr = build_correlation_model(&pdp, &subcarriers, &config)?;
                Ok(PortPilots {
                    subcarriers,
                    x_p,
                    unique_subcarriers,
                    corr,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let capacity = data_capacity(&config, &pattern);
        let probe = map_to_grid(
            &config,
            &pattern,
            &capacity.iter().map(|&n| vec![Cplx::new(0.0, 0.0); n]).collect::<Vec<_>>(),
            &pilot_seq,
        )?;
        let data_positions = probe.data_positions(0);
        if (1..config.n_tx).any(|t| probe.data_positions(t) != data_positions) {
            return Err(Error::InvalidConfig(
                "antennas do not share data resource elements".into(),
            ));
        }
        let beta = beta_for_constellation(config.constellation);
        Ok(Self {
            config,
            pdp,
            modem,
            pattern,
            pilot_seq,
            ports,
            capacity,
            data_positions,
            beta,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn pdp(&self) -> &PowerDelayProfile {
        &self.pdp
    }

    pub fn pattern(&self) -> &PilotPattern {
        &self.pattern
    }

    /// LMMSE filters (one per port) for an SNR.
    pub fn lmmse_filters(&self, snr_db: f64) -> Result<Vec<LmmseFilter>> {
        let snr = NoiseSpec::new(snr_db)?.snr_linear();
        self.ports
            .iter()
            .map(|p| LmmseFilter::simplified(&p.corr, snr, self.beta))
            .collect()
    }

    pub fn run_trial(&self, snr_db: f64, estimator: &TrialEstimator, rng: &mut SimRng) -> Result<TrialOutcome> {
        let needs_filter = match estimator {
            TrialEstimator::Lmmse => true,
            TrialEstimator::Hybrid(p) => p.decide(snr_db) == HybridBranch::Lmmse,
            _ => false,
        };
        let filters = if needs_filter {
            Some(self.lmmse_filters(snr_db)?)
        } else {
            None
        };
        self.trial_with(snr_db, estimator, filters.as_deref(), rng)
    }

    fn trial_with(
        &self,
        snr_db: f64,
        estimator: &TrialEstimator,
        filters: Option<&[LmmseFilter]>,
        rng: &mut SimRng,
    ) -> Result<TrialOutcome> {
        let c = &self.config;
        let noise = NoiseSpec::new(snr_db)?;

        // Channel, payload, noise: fixed draw order.
        let channel = generate_channel(&self.pdp, c.n_tx, c.n_rx, rng);
        let bits: Vec<BitBlock> = self
            .capacity
            .iter()
            .map(|&n| BitBlock::random(2 * n, rng))
            .collect();
        let data = bits
            .iter()
            .map(|b| qpsk_map(&b.bits))
            .collect::<Result<Vec<_>>>()?;
        let grid = map_to_grid(c, &self.pattern, &data, &self.pilot_seq)?;
        let tx = self.modem.modulate_grid(&grid)?;
        let mut rx = apply_channel(&tx, &channel)?;
        for s in &mut rx.streams {
            add_awgn_in_place(s, &noise, rng);
        }
        let rx_grids = self.modem.demodulate_signal(&rx)?;

        // Per-pair estimates, indexed [rx][tx].
        let mut out = TrialOutcome {
            err_all: 0.0,
            power_all: 0.0,
            err_pilot: 0.0,
            power_pilot: 0.0,
            bit_errors: 0,
            bit_count: 0,
            branch: None,
            erasures: 0,
        };
        let mut h_hat = vec![Vec::with_capacity(c.n_tx); c.n_rx];
        for (r, rx_grid) in rx_grids.iter().enumerate() {
            for (t, port) in self.ports.iter().enumerate() {
                let h_true = channel.response_on_used(t, r, c);
                let est = match estimator {
                    TrialEstimator::PerfectCsi => h_true.clone(),
                    _ => {
                        let (y_p, _) = extract_pilots(rx_grid, &self.pattern, t)?;
                        let h_ls = ls_estimate(&y_p, &port.x_p)?;
                        let use_ls = match estimator {
                            TrialEstimator::Ls => true,
                            TrialEstimator::Lmmse => false,
                            TrialEstimator::Hybrid(p) => {
                                let ls = p.decide(snr_db) == HybridBranch::Ls;
                                out.branch = Some(if ls {
                                    EstimatorUsed::HybridChoseLs
                                } else {
                                    EstimatorUsed::HybridChoseLmmse
                                });
                                ls
                            }
                            TrialEstimator::PerfectCsi => unreachable!(),
                        };
                        if use_ls {
                            interpolate_ls(&h_ls, &port.subcarriers, c.n_used)?.h_hat
                        } else {
                            let f = filters.ok_or_else(|| {
                                Error::InvalidArgument("LMMSE filter not prepared".into())
                            })?;
                            f[t].apply(&h_ls)?
                        }
                    }
                };
                let (e, p) = mse_sums(&est, &h_true, None);
                out.err_all += e;
                out.power_all += p;
                let (e, p) = mse_sums(&est, &h_true, Some(&port.unique_subcarriers));
                out.err_pilot += e;
                out.power_pilot += p;
                h_hat[r].push(est);
            }
        }

        // Zero-forcing detection on the data REs.
        let mut rx_bits: Vec<Vec<u8>> = vec![Vec::with_capacity(2 * self.data_positions.len()); c.n_tx];
        let mut h = DMatrix::<Cplx>::zeros(c.n_rx, c.n_tx);
        let mut y = vec![Cplx::new(0.0, 0.0); c.n_rx];
        for &(sc, sym) in &self.data_positions {
            for r in 0..c.n_rx {
                y[r] = rx_grids[r].get(sc, sym);
                for t in 0..c.n_tx {
                    h[(r, t)] = h_hat[r][t][sc];
                }
            }
            let z = zf_detect(&y, &h)?;
            out.erasures += z.erased as usize;
            for (t, s) in z.symbols.iter().enumerate() {
                rx_bits[t].extend(qpsk_demap(std::slice::from_ref(s)));
            }
        }
        for (tx_bits, rx_bits) in bits.iter().zip(&rx_bits) {
            out.bit_errors += hamming(&tx_bits.bits, rx_bits)?;
            out.bit_count += tx_bits.bits.len() as u64;
        }
        Ok(out)
    }

    /// Runs `n_trials` trials of one cell in parallel. Trial `i` uses the
    /// stream `(seed, path..., i)`.
    pub fn run_cell(
        &self,
        snr_db: f64,
        estimator: &TrialEstimator,
        n_trials: usize,
        seed: u64,
        path: &[u64],
    ) -> Result<CellStats> {
        let filters = match estimator {
            TrialEstimator::Lmmse => Some(self.lmmse_filters(snr_db)?),
            TrialEstimator::Hybrid(p) if p.decide(snr_db) == HybridBranch::Lmmse => {
                Some(self.lmmse_filters(snr_db)?)
            }
            _ => None,
        };
        let outcomes = (0..n_trials)
            .into_par_iter()
            .map(|i| {
                let mut key = path.to_vec();
                key.push(i as u64);
                let mut rng = stream(seed, &key);
                self.trial_with(snr_db, estimator, filters.as_deref(), &mut rng)
                    .map_err(|e| Error::Trial {
                        channel_len: self.pdp.span(),
                        snr_db,
                        trial: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(aggregate(estimator.kind(), snr_db, self.pdp.span(), &outcomes))
    }
}

/// Ordered reduction of trial outcomes. MSE is the ratio of summed error
/// energy to summed channel energy.
pub fn aggregate(estimator: EstimatorKind, snr_db: f64, channel_len: usize, outcomes: &[TrialOutcome]) -> CellStats {
    let mut err_all = 0.0;
    let mut power_all = 0.0;
    let mut err_pilot = 0.0;
    let mut power_pilot = 0.0;
    let mut bit_errors = 0u64;
    let mut bit_count = 0u64;
    let mut ls = 0usize;
    let mut erasures = 0usize;
    for o in outcomes {
        err_all += o.err_all;
        power_all += o.power_all;
        err_pilot += o.err_pilot;
        power_pilot += o.power_pilot;
        bit_errors += o.bit_errors;
        bit_count += o.bit_count;
        ls += o.branch.is_some_and(EstimatorUsed::is_ls) as usize;
        erasures += o.erasures;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    CellStats {
        estimator,
        snr_db,
        channel_len,
        mse_all: ratio(err_all, power_all),
        mse_pilot: ratio(err_pilot, power_pilot),
        ber: ratio(bit_errors as f64, bit_count as f64),
        n_trials: outcomes.len(),
        branch_fraction_ls: (estimator == EstimatorKind::Hybrid && !outcomes.is_empty())
            .then(|| ls as f64 / outcomes.len() as f64),
        erasures,
    }
}

fn mse_sums(h_hat: &[Cplx], h_true: &[Cplx], positions: Option<&[usize]>) -> (f64, f64) {
    let term = |k: usize| ((h_hat[k] - h_true[k]).norm_sqr(), h_true[k].norm_sqr());
    let sum = |it: &mut dyn Iterator<Item = usize>| {
        it.map(term).fold((0.0, 0.0), |(a, b), (e, p)| (a + e, b + p))
    };
    match positions {
        Some(p) => sum(&mut p.iter().copied()),
        None => sum(&mut (0..h_true.len())),
    }
}

/// Mean `|ĥ-h|²` over the selected positions (all when `None`), normalized
/// by the mean `|h|²` over the same positions.
pub fn compute_mse(h_hat: &[Cplx], h_true: &[Cplx], positions: Option<&[usize]>) -> Result<f64> {
    if h_hat.len() != h_true.len() {
        return Err(Error::LengthMismatch {
            what: "channel estimate",
            expected: h_true.len(),
            actual: h_hat.len(),
        });
    }
    let n = positions.map_or(h_true.len(), <[usize]>::len);
    if n == 0 {
        return Err(Error::InvalidArgument("empty MSE selection".into()));
    }
    if let Some(&bad) = positions.and_then(|p| p.iter().find(|&&k| k >= h_true.len())) {
        return Err(Error::InvalidArgument(format!("position {bad} out of range")));
    }
    let (e, p) = mse_sums(h_hat, h_true, positions);
    if p == 0.0 {
        return Err(Error::InvalidArgument("true channel has zero energy".into()));
    }
    Ok(e / p)
}

fn hamming(a: &[u8], b: &[u8]) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "received bits",
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count() as u64)
}

pub fn compute_ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64> {
    if tx_bits.is_empty() {
        return Err(Error::InvalidArgument("no bits to compare".into()));
    }
    Ok(hamming(tx_bits, rx_bits)? as f64 / tx_bits.len() as f64)
}

/// One trial with a freshly built simulator. The pilot sequence is seeded
/// from `rng` before the trial draws.
pub fn run_trial(
    config: &SystemConfig,
    channel_len: usize,
    snr_db: f64,
    estimator: &TrialEstimator,
    rng: &mut SimRng,
) -> Result<TrialOutcome> {
    let sim = LinkSimulator::new(config.clone(), PowerDelayProfile::uniform(channel_len)?, rng.next_u64())?;
    sim.run_trial(snr_db, estimator, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub system: SystemConfig,
    pub channel_lengths: Vec<usize>,
    pub snr_grid_db: Vec<f64>,
    pub n_frames: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub threshold_override_db: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            channel_lengths: vec![6, 10, 20, 40],
            snr_grid_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            n_frames: 100,
            seed: 42,
            estimators: EstimatorKind::ALL.to_vec(),
            threshold_override_db: None,
        }
    }
}

// Stream tags keep pilots, calibration and trials apart.
const TAG_PILOTS: u64 = 0x5049_4c4f;
const TAG_CALIBRATION: u64 = 0x4341_4c49;
const TAG_TRIALS: u64 = 0x5452_4941;

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_frames == 0 {
            return bad("n_frames must be >= 1");
        }
        if self.snr_grid_db.is_empty() {
            return bad("SNR grid is empty");
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) || self.snr_grid_db.windows(2).any(|w| w[1] < w[0]) {
            return bad("SNR grid must be sorted");
        }
        if self.channel_lengths.is_empty() || self.channel_lengths.iter().any(|&l| l == 0 || l > self.system.n_fft) {
            return bad("channel lengths must be in 1..=n_fft");
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected");
        }
        if self.threshold_override_db.is_some_and(f64::is_nan) {
            return bad("threshold is NaN");
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_kv_str(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value '{v}' for {key}")))
        }
        let s = &mut self.system;
        match key {
            "bandwidth_mhz" => {
                if value.eq_ignore_ascii_case("none") {
                    s.bandwidth = None;
                } else {
                    let bw: Bandwidth = value.parse()?;
                    s.bandwidth = Some(bw);
                    s.n_fft = bw.profile().n_fft;
                }
            }
            "n_fft" => s.n_fft = num(key, value)?,
            "n_used" => s.n_used = num(key, value)?,
            "cp_len" => s.cp_len = num(key, value)?,
            "n_symbols_per_slot" => s.n_symbols_per_slot = num(key, value)?,
            "n_tx" => s.n_tx = num(key, value)?,
            "n_rx" => s.n_rx = num(key, value)?,
            "constellation" => s.constellation = value.parse()?,
            "channel_lengths" => self.channel_lengths = parse_list(value)?,
            "snr_grid_db" => self.snr_grid_db = parse_snr_grid(value)?,
            "n_frames" => self.n_frames = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "estimators" => self.estimators = parse_list(value)?,
            "threshold_override_db" => {
                self.threshold_override_db = if value.is_empty() || value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

/// Comma-separated list.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad list item '{s}'")))
        })
        .collect()
}

/// Either `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, step] => {
            let p = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad SNR range '{text}'")))
            };
            let (a, b, step) = (p(a)?, p(b)?, p(step)?);
            if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
                return Err(Error::InvalidConfig(format!("bad SNR range '{text}'")));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + step * i as f64).collect())
        }
        [_] => parse_list(text),
        _ => Err(Error::InvalidConfig(format!("bad SNR grid '{text}'"))),
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub snr_db: f64,
    pub channel_len: usize,
    pub estimator: EstimatorKind,
    pub mse_all_subcarriers: f64,
    pub mse_pilot_subcarriers: f64,
    pub ber: f64,
    pub n_trials: usize,
    pub branch_fraction_ls: Option<f64>,
    pub seed: u64,
}

/// Records plus the hybrid threshold used for each channel length.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    /// Parallel to `channel_lengths`; `None` where the CP covers the channel.
    pub thresholds_db: Vec<Option<f64>>,
}

/// Hybrid switching SNR per channel length: the override when given,
/// otherwise calibrated on the channel's own profile.
pub fn resolve_thresholds(cfg: &SweepConfig) -> Result<Vec<Option<f64>>> {
    let cp = cfg.system.cp_len;
    cfg.channel_lengths
        .iter()
        .enumerate()
        .map(|(li, &l)| {
            if l <= cp {
                return Ok(None);
            }
            if let Some(t) = cfg.threshold_override_db {
                return Ok(Some(t));
            }
            if l <= cp + 1 {
                // no interference yet, so LMMSE never loses
                return Ok(Some(f64::INFINITY));
            }
            let pdp = PowerDelayProfile::uniform(l)?;
            let mut rng = stream(cfg.seed, &[TAG_CALIBRATION, li as u64]);
            calibrate_threshold(&cfg.system, &pdp, &cfg.snr_grid_db, cfg.n_frames, &mut rng).map(Some)
        })
        .collect()
}

pub fn run_sweep_detailed(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let thresholds_db = if cfg.estimators.contains(&EstimatorKind::Hybrid) {
        resolve_thresholds(cfg)?
    } else {
        vec![None; cfg.channel_lengths.len()]
    };
    let pilot_seed = crate::rng::derive_seed(cfg.seed, &[TAG_PILOTS]);
    let mut records = Vec::new();
    for (li, &l) in cfg.channel_lengths.iter().enumerate() {
        let sim = LinkSimulator::new(cfg.system.clone(), PowerDelayProfile::uniform(l)?, pilot_seed)?;
        let policy = HybridPolicy::new(cfg.system.cp_len, l, thresholds_db[li].unwrap_or(f64::INFINITY))?;
        for (si, &snr) in cfg.snr_grid_db.iter().enumerate() {
            for &kind in &cfg.estimators {
                let est = match kind {
                    EstimatorKind::Ls => TrialEstimator::Ls,
                    EstimatorKind::Lmmse => TrialEstimator::Lmmse,
                    EstimatorKind::Hybrid => TrialEstimator::Hybrid(policy),
                    EstimatorKind::PerfectCsi => TrialEstimator::PerfectCsi,
                };
                let stats = sim.run_cell(snr, &est, cfg.n_frames, cfg.seed, &[TAG_TRIALS, li as u64, si as u64])?;
                records.push(SweepRecord {
                    snr_db: snr,
                    channel_len: l,
                    estimator: kind,
                    mse_all_subcarriers: stats.mse_all,
                    mse_pilot_subcarriers: stats.mse_pilot,
                    ber: stats.ber,
                    n_trials: stats.n_trials,
                    branch_fraction_ls: stats.branch_fraction_ls,
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(SweepOutput { records, thresholds_db })
}

/// Cartesian sweep over (channel length, SNR, estimator), in that row order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    run_sweep_detailed(cfg).map(|o| o.records)
}

pub const CSV_HEADER: [&str; 9] = [
    "snr_db",
    "channel_len",
    "estimator",
    "mse_all_subcarriers",
    "mse_pilot_subcarriers",
    "ber",
    "n_trials",
    "branch_fraction_ls",
    "seed",
];

fn fmt_float(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            fmt_float(r.snr_db),
            r.channel_len.to_string(),
            r.estimator.to_string(),
            fmt_float(r.mse_all_subcarriers),
            fmt_float(r.mse_pilot_subcarriers),
            fmt_float(r.ber),
            r.n_trials.to_string(),
            r.branch_fraction_ls.map(fmt_float).unwrap_or_default(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[SweepRecord], destination: &Path) -> Result<()> {
    let path = destination.display().to_string();
    let file = std::fs::File::create(destination).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|source| Error::Csv { path, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_helpers() {
        let h = vec![Cplx::new(1.0, 0.0), Cplx::new(0.0, 1.0), Cplx::new(-1.0, 0.0)];
        assert_eq!(compute_mse(&h, &h, None).unwrap(), 0.0);
        let eps = 0.1;
        let h_hat: Vec<Cplx> = h.iter().map(|v| v + eps).collect();
        assert!((compute_mse(&h_hat, &h, None).unwrap() - eps * eps).abs() < 1e-15);
        let c = Cplx::new(3.0, -2.0);
        let a: Vec<Cplx> = h_hat.iter().map(|v| v * c).collect();
        let b: Vec<Cplx> = h.iter().map(|v| v * c).collect();
        assert!((compute_mse(&a, &b, Some(&[0, 2])).unwrap() - eps * eps).abs() < 1e-14);
        assert!(compute_mse(&h, &h, Some(&[])).is_err());
        assert!(compute_mse(&h[..2], &h, None).is_err());
    }

    #[test]
    fn ber_helper() {
        assert_eq!(compute_ber(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), 0.0);
        assert_eq!(compute_ber(&[0, 1, 1, 0], &[1, 0, 0, 1]).unwrap(), 1.0);
        assert_eq!(compute_ber(&[0, 1, 1, 0], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert!(compute_ber(&[0, 1], &[0]).is_err());
        assert!(compute_ber(&[], &[]).is_err());
    }

    #[test]
    fn snr_grid_parsing() {
        assert_eq!(parse_snr_grid("0:30:5").unwrap(), vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        assert_eq!(parse_snr_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_snr_grid("3, 7").unwrap(), vec![3.0, 7.0]);
        assert_eq!(parse_snr_grid("inf").unwrap(), vec![f64::INFINITY]);
        assert!(parse_snr_grid("0:10:0").is_err());
        assert!(parse_snr_grid("10:0:1").is_err());
    }

    #[test]
    fn kv_config() {
        let cfg = SweepConfig::from_kv_str(
            "# test\nbandwidth_mhz = 10\nn_used = 600\nchannel_lengths=6, 40\nsnr_grid_db=0:10:5\n\
             estimators=ls,hybrid\nn_frames=3\nseed=7\nthreshold_override_db=12.5\n",
        )
        .unwrap();
        assert_eq!(cfg.system.n_fft, 1024);
        assert_eq!(cfg.system.n_used, 600);
        assert_eq!(cfg.channel_lengths, vec![6, 40]);
        assert_eq!(cfg.snr_grid_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(cfg.estimators, vec![EstimatorKind::Ls, EstimatorKind::Hybrid]);
        assert_eq!(cfg.threshold_override_db, Some(12.5));
        cfg.validate().unwrap();
        assert!(SweepConfig::from_kv_str("nope=1").is_err());
        assert!(SweepConfig::from_kv_str("n_frames").is_err());
        assert!(SweepConfig::from_kv_str("estimators=ls,mmse").is_err());
    }

    #[test]
    fn sweep_validation() {
        let mut c = SweepConfig::default();
        c.snr_grid_db = vec![10.0, 0.0];
        assert!(c.validate().is_err());
        let mut c = SweepConfig::default();
        c.n_frames = 0;
        assert!(c.validate().is_err());
        let mut c = SweepConfig::default();
        c.snr_grid_db.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn qam16_payload_rejected() {
        let mut sys = SystemConfig::default();
        sys.constellation = Constellation::Qam16;
        let pdp = PowerDelayProfile::uniform(3).unwrap();
        assert!(matches!(
            LinkSimulator::new(sys, pdp, 0),
            Err(Error::UnsupportedConstellation(_))
        ));
    }

    #[test]
    fn csv_shape() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
        let rec = SweepRecord {
            snr_db: 5.0,
            channel_len: 6,
            estimator: EstimatorKind::Hybrid,
            mse_all_subcarriers: 0.012345678901234,
            mse_pilot_subcarriers: 0.5,
            ber: 0.0,
            n_trials: 10,
            branch_fraction_ls: Some(0.0),
            seed: 42,
        };
        let mut buf = Vec::new();
        write_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[1],
            "5.000000000000e0,6,hybrid,1.234567890123e-2,5.000000000000e-1,0.000000000000e0,10,0.000000000000e0,42"
        );
    }
}
