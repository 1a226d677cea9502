//! Rayleigh block-fading MIMO tap-delay-line channel with AWGN.
//!
//! The channel is applied as a linear convolution over the whole slot, so a
//! delay spread longer than the cyclic prefix leaks the previous symbol into
//! the current FFT window (ISI) and breaks subcarrier orthogonality (ICI).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::ofdm_phy::TimeDomainSignal;
use crate::resource_grid::SystemConfig;
use crate::{Cplx, Error, Result};

/// Average tap powers at integer sample delays.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    tap_delays: Vec<usize>,
    tap_powers: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn new(tap_delays: Vec<usize>, tap_powers: Vec<f64>) -> Result<Self> {
        if tap_delays.is_empty() || tap_delays.len() != tap_powers.len() {
            return Err(Error::InvalidArgument(format!(
                "need matching non-empty delay/power lists, got {} and {}",
                tap_delays.len(),
                tap_powers.len()
            )));
        }
        if tap_delays[0] != 0 || tap_delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "tap delays must start at 0 and be strictly increasing".into(),
            ));
        }
        if tap_powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "tap powers must be finite and non-negative".into(),
            ));
        }
        let total: f64 = tap_powers.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "tap powers must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            tap_delays,
            tap_powers,
        })
    }

    /// `len` taps at delays 0..len with equal power.
    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidArgument("channel needs at least one tap".into()));
        }
        let p = 1.0 / len as f64;
        let mut powers = vec![p; len];
        // absorb rounding so the sum is exactly representable as 1
        let rest: f64 = powers[1..].iter().sum();
        powers[0] = 1.0 - rest;
        Self::new((0..len).collect(), powers)
    }

    pub fn tap_delays(&self) -> &[usize] {
        &self.tap_delays
    }

    pub fn tap_powers(&self) -> &[f64] {
        &self.tap_powers
    }

    pub fn n_taps(&self) -> usize {
        self.tap_delays.len()
    }

    /// Channel memory in samples plus one, i.e. the impulse response length.
    pub fn span(&self) -> usize {
        self.tap_delays.last().map_or(0, |d| d + 1)
    }

    /// Frequency correlation `E[H_k H_k'^*]` for a bin offset `k - k'`.
    pub fn frequency_correlation(&self, delta_bins: i64, n_fft: usize) -> Cplx {
        self.tap_delays
            .iter()
            .zip(&self.tap_powers)
            .map(|(&d, &p)| {
                let phase = -2.0 * PI * ((delta_bins * d as i64).rem_euclid(n_fft as i64)) as f64
                    / n_fft as f64;
                Cplx::from_polar(p, phase)
            })
            .sum()
    }
}

/// Tap gains of every (tx, rx) antenna pair, drawn from one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Indexed `[tx][rx]`, one gain per profile tap.
    taps: Vec<Vec<Vec<Cplx>>>,
    pdp: PowerDelayProfile,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<Vec<Vec<Cplx>>>, pdp: PowerDelayProfile) -> Result<Self> {
        let ok = !taps.is_empty()
            && taps.iter().all(|row| {
                !row.is_empty()
                    && row.len() == taps[0].len()
                    && row.iter().all(|g| g.len() == pdp.n_taps())
            });
        if !ok {
            return Err(Error::InvalidArgument(
                "tap array must be [tx][rx][n_taps]".into(),
            ));
        }
        Ok(Self { taps, pdp })
    }

    pub fn n_tx(&self) -> usize {
        self.taps.len()
    }

    pub fn n_rx(&self) -> usize {
        self.taps[0].len()
    }

    pub fn pdp(&self) -> &PowerDelayProfile {
        &self.pdp
    }

    pub fn taps(&self, tx: usize, rx: usize) -> &[Cplx] {
        &self.taps[tx][rx]
    }

    /// Dense impulse response of one pair, length `pdp.span()`.
    pub fn impulse_response(&self, tx: usize, rx: usize) -> Vec<Cplx> {
        let mut h = vec![Cplx::new(0.0, 0.0); self.pdp.span()];
        for (&d, &g) in self.pdp.tap_delays.iter().zip(&self.taps[tx][rx]) {
            h[d] = g;
        }
        h
    }

    /// True frequency response of one pair on the used subcarriers.
    pub fn response_on_used(&self, tx: usize, rx: usize, config: &SystemConfig) -> Vec<Cplx> {
        let n = config.n_fft as i64;
        (0..config.n_used)
            .map(|i| {
                let f = config.subcarrier_frequency(i);
                self.pdp
                    .tap_delays
                    .iter()
                    .zip(&self.taps[tx][rx])
                    .map(|(&d, &g)| {
                        let phase = -2.0 * PI * ((f * d as i64).rem_euclid(n)) as f64 / n as f64;
                        g * Cplx::from_polar(1.0, phase)
                    })
                    .sum()
            })
            .collect()
    }
}

/// Draws independent circularly-symmetric Gaussian taps with variance
/// `σ_l²` for every antenna pair.
pub fn generate_channel<R: Rng + ?Sized>(
    pdp: &PowerDelayProfile,
    n_tx: usize,
    n_rx: usize,
    rng: &mut R,
) -> ChannelRealization {
    let taps = (0..n_tx)
        .map(|_| {
            (0..n_rx)
                .map(|_| {
                    pdp.tap_powers
                        .iter()
                        .map(|&p| complex_gaussian(rng, p))
                        .collect()
                })
                .collect()
        })
        .collect();
    ChannelRealization {
        taps,
        pdp: pdp.clone(),
    }
}

/// Sample of CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Cplx {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cplx::new(re * s, im * s)
}

/// `H_k = Σ_l g_l exp(-j2πkl/N)` for k in 0..N, where `g` holds taps at
/// consecutive sample delays. No 1/√N factor, so `Y = H·X` holds with the
/// unitary modem.
pub fn channel_frequency_response(g: &[Cplx], n_fft: usize) -> Result<Vec<Cplx>> {
    if g.len() > n_fft {
        return Err(Error::InvalidArgument(format!(
            "channel length {} exceeds FFT size {n_fft}",
            g.len()
        )));
    }
    let mut buf = vec![Cplx::new(0.0, 0.0); n_fft];
    buf[..g.len()].copy_from_slice(g);
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    Ok(buf)
}

/// Linear convolution of every transmit stream with its pair's impulse
/// response, summed per receive antenna and truncated to the input length.
pub fn apply_channel(tx: &TimeDomainSignal, ch: &ChannelRealization) -> Result<TimeDomainSignal> {
    if tx.streams.len() != ch.n_tx() {
        return Err(Error::LengthMismatch {
            what: "transmit streams",
            expected: ch.n_tx(),
            actual: tx.streams.len(),
        });
    }
    let len = tx.streams.first().map_or(0, Vec::len);
    if tx.streams.iter().any(|s| s.len() != len) {
        return Err(Error::InvalidArgument("transmit streams differ in length".into()));
    }
    let delays = ch.pdp.tap_delays();
    let rx = (0..ch.n_rx())
        .map(|r| {
            let mut out = vec![Cplx::new(0.0, 0.0); len];
            for (t, x) in tx.streams.iter().enumerate() {
                for (&d, &g) in delays.iter().zip(ch.taps(t, r)) {
                    if d >= len {
                        continue;
                    }
                    for (o, &v) in out[d..].iter_mut().zip(x) {
                        *o += g * v;
                    }
                }
            }
            out
        })
        .collect();
    TimeDomainSignal::new(rx, tx.symbol_len)
}

/// Receiver noise level. `snr_db = +∞` disables noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    /// Average constellation power `E[|X_k|²]`.
    pub signal_power_ref: f64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("bad SNR {snr_db} dB")));
        }
        Ok(Self {
            snr_db,
            signal_power_ref: 1.0,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            signal_power_ref: 1.0,
        }
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Per-sample complex noise variance `σ_w²`.
    pub fn variance(&self) -> f64 {
        if self.snr_db == f64::INFINITY {
            0.0
        } else {
            self.signal_power_ref / self.snr_linear()
        }
    }
}

pub fn add_awgn_in_place<R: Rng + ?Sized>(samples: &mut [Cplx], noise: &NoiseSpec, rng: &mut R) {
    let var = noise.variance();
    if var == 0.0 {
        return;
    }
    for s in samples {
        *s += complex_gaussian(rng, var);
    }
}

/// Adds white complex Gaussian noise to every stream.
pub fn add_awgn<R: Rng + ?Sized>(
    signal: &TimeDomainSignal,
    noise: &NoiseSpec,
    rng: &mut R,
) -> TimeDomainSignal {
    let mut out = signal.clone();
    for s in &mut out.streams {
        add_awgn_in_place(s, noise, rng);
    }
    out
}
