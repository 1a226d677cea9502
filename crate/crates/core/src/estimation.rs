//! Pilot-based channel estimation: LS, LMMSE (full and simplified forms),
//! and the hybrid policy that switches between them.
//!
//! All estimators work on one (tx, rx) pair at a time. The observation is
//! the stack of every pilot of a port within one slot, so under block fading
//! the two pilot-bearing symbols act as a single denser comb.

use nalgebra::{DMatrix, DVector};

use crate::channel_model::PowerDelayProfile;
use crate::resource_grid::{Constellation, SystemConfig};
use crate::rng::SimRng;
use crate::sim_harness::{EstimatorKind, LinkSimulator, TrialEstimator};
use crate::{Cplx, Error, Result};

/// Diagonal loading used when the LMMSE regularizer is exactly zero.
pub const ZERO_NOISE_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorUsed {
    Ls,
    Lmmse,
    HybridChoseLs,
    HybridChoseLmmse,
}

impl EstimatorUsed {
    pub fn is_ls(self) -> bool {
        matches!(self, EstimatorUsed::Ls | EstimatorUsed::HybridChoseLs)
    }
}

/// Estimated frequency response of one antenna pair over all used subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: Vec<Cplx>,
    pub estimator_used: EstimatorUsed,
    /// True when [`ZERO_NOISE_JITTER`] was added before inversion.
    pub jitter_applied: bool,
}

/// Frequency-domain channel statistics seen by the LMMSE estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    /// `n_used × n_pilot` cross-correlation of all used subcarriers with the pilots.
    pub r_hh_p: DMatrix<Cplx>,
    /// `n_pilot × n_pilot` pilot autocorrelation.
    pub r_hp_hp: DMatrix<Cplx>,
}

impl CorrelationModel {
    pub fn n_pilots(&self) -> usize {
        self.r_hp_hp.nrows()
    }

    pub fn n_used(&self) -> usize {
        self.r_hh_p.nrows()
    }
}

/// Elementwise `y_p / x_p`.
pub fn ls_estimate(y_p: &[Cplx], x_p: &[Cplx]) -> Result<Vec<Cplx>> {
    if y_p.len() != x_p.len() {
        return Err(Error::LengthMismatch {
            what: "pilot observations",
            expected: x_p.len(),
            actual: y_p.len(),
        });
    }
    y_p.iter()
        .zip(x_p)
        .enumerate()
        .map(|(i, (y, x))| {
            if x.norm_sqr() == 0.0 {
                Err(Error::ZeroPilot(i))
            } else {
                Ok(y / x)
            }
        })
        .collect()
}

/// Builds `R_HHp` and `R_HpHp` from a power-delay profile with independent
/// taps: `r(k, k') = Σ_l σ_l² exp(-j2π(k-k')τ_l/N)`, k and k' being the
/// signed FFT frequencies of the used subcarriers.
pub fn build_correlation_model(
    pdp: &PowerDelayProfile,
    pilot_positions: &[usize],
    config: &SystemConfig,
) -> Result<CorrelationModel> {
    if let Some(&bad) = pilot_positions.iter().find(|&&p| p >= config.n_used) {
        return Err(Error::InvalidArgument(format!(
            "pilot subcarrier {bad} outside 0..{}",
            config.n_used
        )));
    }
    let freq: Vec<i64> = (0..config.n_used)
        .map(|i| config.subcarrier_frequency(i))
        .collect();
    // r depends only on the frequency offset; tabulate it once.
    let span = freq[config.n_used - 1] - freq[0];
    let table: Vec<Cplx> = (-span..=span)
        .map(|d| pdp.frequency_correlation(d, config.n_fft))
        .collect();
    let r = |a: usize, b: usize| table[(freq[a] - freq[b] + span) as usize];

    let n_p = pilot_positions.len();
    let r_hh_p = DMatrix::from_fn(config.n_used, n_p, |k, j| r(k, pilot_positions[j]));
    let r_hp_hp = DMatrix::from_fn(n_p, n_p, |i, j| r(pilot_positions[i], pilot_positions[j]));
    Ok(CorrelationModel { r_hh_p, r_hp_hp })
}

/// Precomputed LMMSE interpolation matrix `R_HHp (R_HpHp + D)^{-1}` for a
/// diagonal regularizer `D`.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    weights: DMatrix<Cplx>,
    jitter_applied: bool,
}

impl LmmseFilter {
    pub fn new(corr: &CorrelationModel, diag_reg: &[f64]) -> Result<Self> {
        let n_p = corr.n_pilots();
        if diag_reg.len() != n_p {
            return Err(Error::LengthMismatch {
                what: "regularizer diagonal",
                expected: n_p,
                actual: diag_reg.len(),
            });
        }
        if diag_reg.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::InvalidArgument(
                "regularizer must be non-negative".into(),
            ));
        }
        let jitter_applied = diag_reg.iter().all(|&d| d == 0.0);
        let mut a = corr.r_hp_hp.clone();
        for (i, &d) in diag_reg.iter().enumerate() {
            let d = if jitter_applied { ZERO_NOISE_JITTER } else { d };
            a[(i, i)] += Cplx::new(d, 0.0);
        }
        // W = R_HHp A^{-1}  <=>  A^H W^H = R_HHp^H
        let w_h = a
            .adjoint()
            .lu()
            .solve(&corr.r_hh_p.adjoint())
            .ok_or(Error::Singular)?;
        if w_h.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(Self {
            weights: w_h.adjoint(),
            jitter_applied,
        })
    }

    /// Simplified form: constant regularizer `β/SNR` on every pilot.
    pub fn simplified(corr: &CorrelationModel, snr_linear: f64, beta: f64) -> Result<Self> {
        check_snr_beta(snr_linear, beta)?;
        Self::new(corr, &vec![beta / snr_linear; corr.n_pilots()])
    }

    pub fn apply(&self, h_ls: &[Cplx]) -> Result<Vec<Cplx>> {
        if h_ls.len() != self.weights.ncols() {
            return Err(Error::LengthMismatch {
                what: "LS pilot estimates",
                expected: self.weights.ncols(),
                actual: h_ls.len(),
            });
        }
        let h = DVector::from_column_slice(h_ls);
        Ok((&self.weights * h).iter().copied().collect())
    }

    pub fn jitter_applied(&self) -> bool {
        self.jitter_applied
    }
}

fn check_snr_beta(snr_linear: f64, beta: f64) -> Result<()> {
    if snr_linear.is_nan() || snr_linear <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "SNR must be positive, got {snr_linear}"
        )));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// `R_HHp (R_HpHp + σ² (X_p X_p^H)^{-1})^{-1} ĥ_LS`.
pub fn lmmse_estimate_full(
    h_ls: &[Cplx],
    corr: &CorrelationModel,
    x_p: &[Cplx],
    sigma_w2: f64,
) -> Result<ChannelEstimate> {
    if sigma_w2.is_nan() || sigma_w2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be non-negative, got {sigma_w2}"
        )));
    }
    if x_p.len() != corr.n_pilots() {
        return Err(Error::LengthMismatch {
            what: "pilot symbols",
            expected: corr.n_pilots(),
            actual: x_p.len(),
        });
    }
    let diag = x_p
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = x.norm_sqr();
            if p == 0.0 {
                Err(Error::ZeroPilot(i))
            } else {
                Ok(sigma_w2 / p)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let f = LmmseFilter::new(corr, &diag)?;
    Ok(ChannelEstimate {
        h_hat: f.apply(h_ls)?,
        estimator_used: EstimatorUsed::Lmmse,
        jitter_applied: f.jitter_applied(),
    })
}

/// `R_HHp (R_HpHp + (β/SNR) I)^{-1} ĥ_LS`.
pub fn lmmse_estimate_simplified(
    h_ls: &[Cplx],
    corr: &CorrelationModel,
    snr_linear: f64,
    beta: f64,
) -> Result<ChannelEstimate> {
    let f = LmmseFilter::simplified(corr, snr_linear, beta)?;
    Ok(ChannelEstimate {
        h_hat: f.apply(h_ls)?,
        estimator_used: EstimatorUsed::Lmmse,
        jitter_applied: f.jitter_applied(),
    })
}

/// Constellation-dependent scale of the simplified LMMSE regularizer,
/// `E[|X|²] E[1/|X|²]`.
pub fn beta_for_constellation(c: Constellation) -> f64 {
    match c {
        Constellation::Qpsk => 1.0,
        Constellation::Qam16 => 17.0 / 9.0,
    }
}

/// Extends pilot-only LS estimates to every used subcarrier by linear
/// interpolation, holding the edge values constant outside the pilot span.
/// Positions may come in any order; repeated positions are averaged.
pub fn interpolate_ls(
    h_p: &[Cplx],
    pilot_positions: &[usize],
    n_used: usize,
) -> Result<ChannelEstimate> {
    if h_p.len() != pilot_positions.len() {
        return Err(Error::LengthMismatch {
            what: "pilot positions",
            expected: h_p.len(),
            actual: pilot_positions.len(),
        });
    }
    if let Some(&bad) = pilot_positions.iter().find(|&&p| p >= n_used) {
        return Err(Error::InvalidArgument(format!(
            "pilot subcarrier {bad} outside 0..{n_used}"
        )));
    }
    let mut acc: Vec<Option<(Cplx, usize)>> = vec![None; n_used];
    for (&p, &h) in pilot_positions.iter().zip(h_p) {
        let e = acc[p].get_or_insert((Cplx::new(0.0, 0.0), 0));
        e.0 += h;
        e.1 += 1;
    }
    let points: Vec<(usize, Cplx)> = acc
        .iter()
        .enumerate()
        .filter_map(|(k, e)| e.map(|(s, n)| (k, s / n as f64)))
        .collect();
    if points.len() < 2 {
        return Err(Error::Deficit {
            what: "distinct pilot positions for interpolation",
            needed: 2,
            available: points.len(),
        });
    }

    let mut h_hat = Vec::with_capacity(n_used);
    let mut seg = 0;
    for k in 0..n_used {
        let value = if k <= points[0].0 {
            points[0].1
        } else if k >= points[points.len() - 1].0 {
            points[points.len() - 1].1
        } else {
            while points[seg + 1].0 < k {
                seg += 1;
            }
            let (k0, h0) = points[seg];
            let (k1, h1) = points[seg + 1];
            let t = (k - k0) as f64 / (k1 - k0) as f64;
            h0 + (h1 - h0) * t
        };
        h_hat.push(value);
    }
    Ok(ChannelEstimate {
        h_hat,
        estimator_used: EstimatorUsed::Ls,
        jitter_applied: false,
    })
}

/// Which estimator the hybrid policy picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridBranch {
    Ls,
    Lmmse,
}

/// Switching rule of the hybrid estimator. With the cyclic prefix covering
/// the channel it always picks LMMSE; otherwise LMMSE below the SNR
/// threshold and LS at or above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridPolicy {
    pub cp_len: usize,
    pub channel_len_hint: usize,
    /// May be ±∞: +∞ never switches to LS, −∞ always does (when CP is short).
    pub snr_threshold_db: f64,
}

impl HybridPolicy {
    pub fn new(cp_len: usize, channel_len_hint: usize, snr_threshold_db: f64) -> Result<Self> {
        if channel_len_hint == 0 {
            return Err(Error::InvalidArgument("channel length hint must be >= 1".into()));
        }
        if snr_threshold_db.is_nan() {
            return Err(Error::InvalidArgument("threshold is NaN".into()));
        }
        Ok(Self {
            cp_len,
            channel_len_hint,
            snr_threshold_db,
        })
    }

    pub fn decide(&self, snr_db: f64) -> HybridBranch {
        if self.channel_len_hint <= self.cp_len || snr_db < self.snr_threshold_db {
            HybridBranch::Lmmse
        } else {
            HybridBranch::Ls
        }
    }
}

/// LS pilot observations of one (tx, rx) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub y_p: Vec<Cplx>,
    pub x_p: Vec<Cplx>,
    /// Used-subcarrier index of every pilot, parallel to `y_p`.
    pub subcarriers: Vec<usize>,
}

/// Runs the hybrid policy: LMMSE (simplified form with β) or interpolated LS.
pub fn hybrid_estimate(
    obs: &PilotObservation,
    corr: &CorrelationModel,
    policy: &HybridPolicy,
    snr_db: f64,
    beta: f64,
) -> Result<ChannelEstimate> {
    let h_ls = ls_estimate(&obs.y_p, &obs.x_p)?;
    match policy.decide(snr_db) {
        HybridBranch::Lmmse => {
            let snr = 10f64.powf(snr_db / 10.0);
            let mut est = lmmse_estimate_simplified(&h_ls, corr, snr, beta)?;
            est.estimator_used = EstimatorUsed::HybridChoseLmmse;
            Ok(est)
        }
        HybridBranch::Ls => {
            let mut est = interpolate_ls(&h_ls, &obs.subcarriers, corr.n_used())?;
            est.estimator_used = EstimatorUsed::HybridChoseLs;
            Ok(est)
        }
    }
}

/// SNR at which the MSE of LS first drops to or below that of LMMSE, by
/// linear interpolation of the difference between grid points.
///
/// Returns −∞ when LS is never worse, +∞ when LMMSE wins everywhere.
pub fn find_crossover(snrs_db: &[f64], mse_ls: &[f64], mse_lmmse: &[f64]) -> Result<f64> {
    if snrs_db.is_empty() {
        return Err(Error::InvalidArgument("empty SNR grid".into()));
    }
    if mse_ls.len() != snrs_db.len() || mse_lmmse.len() != snrs_db.len() {
        return Err(Error::LengthMismatch {
            what: "MSE curve",
            expected: snrs_db.len(),
            actual: mse_ls.len().min(mse_lmmse.len()),
        });
    }
    // Positive where LMMSE is better.
    let gap: Vec<f64> = mse_ls.iter().zip(mse_lmmse).map(|(l, m)| l - m).collect();
    if gap[0] <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    for i in 1..gap.len() {
        if gap[i] <= 0.0 {
            let t = gap[i - 1] / (gap[i - 1] - gap[i]);
            return Ok(snrs_db[i - 1] + t * (snrs_db[i] - snrs_db[i - 1]));
        }
    }
    Ok(f64::INFINITY)
}

/// Calibrates the hybrid switching SNR for a CP-insufficient channel by
/// sweeping LS and LMMSE over `sweep_snrs` and locating where their
/// all-subcarrier MSE curves cross.
pub fn calibrate_threshold(
    config: &SystemConfig,
    pdp_long: &PowerDelayProfile,
    sweep_snrs: &[f64],
    trials: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    use rand::RngCore;

    if sweep_snrs.is_empty() {
        return Err(Error::InvalidArgument("empty SNR grid".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if pdp_long.span() <= config.cp_len + 1 {
        return Err(Error::InvalidArgument(format!(
            "calibration needs a channel longer than the CP ({} taps span vs CP {})",
            pdp_long.span(),
            config.cp_len
        )));
    }
    let sim = LinkSimulator::new(config.clone(), pdp_long.clone(), rng.next_u64())?;
    let base = rng.next_u64();
    let mut ls = Vec::with_capacity(sweep_snrs.len());
    let mut lmmse = Vec::with_capacity(sweep_snrs.len());
    for (si, &snr) in sweep_snrs.iter().enumerate() {
        let a = sim.run_cell(snr, &TrialEstimator::Ls, trials, base, &[si as u64])?;
        let b = sim.run_cell(snr, &TrialEstimator::Lmmse, trials, base, &[si as u64])?;
        debug_assert_eq!(a.estimator, EstimatorKind::Ls);
        ls.push(a.mse_all);
        lmmse.push(b.mse_all);
    }
    find_crossover(sweep_snrs, &ls, &lmmse)
}
