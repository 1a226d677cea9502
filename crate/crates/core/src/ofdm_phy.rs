//! OFDM modulation and demodulation with a unitary DFT and cyclic prefix.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::resource_grid::{FreqGrid, ResourceGrid, SystemConfig};
use crate::{Cplx, Error, Result};

/// Entry (l, k) of the unitary N-point DFT matrix: `exp(-j2πlk/N) / √N`.
pub fn dft_coefficient(n: usize, l: usize, k: usize) -> Result<Cplx> {
    if l >= n || k >= n {
        return Err(Error::InvalidArgument(format!(
            "DFT index ({l}, {k}) out of range for size {n}"
        )));
    }
    // Reduce lk mod n first so large products keep full phase precision.
    let lk = ((l as u128 * k as u128) % n as u128) as f64;
    Ok(Cplx::from_polar(1.0 / (n as f64).sqrt(), -2.0 * PI * lk / n as f64))
}

/// Size of a unitary DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DftSpec {
    pub n: usize,
}

impl DftSpec {
    /// Dense row-major DFT matrix. Intended for small sizes and checks.
    pub fn matrix(&self) -> Vec<Vec<Cplx>> {
        (0..self.n)
            .map(|l| {
                (0..self.n)
                    .map(|k| dft_coefficient(self.n, l, k).expect("in range"))
                    .collect()
            })
            .collect()
    }
}

/// Sample streams, one per antenna, made of whole OFDM symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainSignal {
    pub streams: Vec<Vec<Cplx>>,
    pub symbol_len: usize,
}

impl TimeDomainSignal {
    pub fn new(streams: Vec<Vec<Cplx>>, symbol_len: usize) -> Result<Self> {
        for s in &streams {
            if symbol_len == 0 || s.len() % symbol_len != 0 {
                return Err(Error::InvalidArgument(format!(
                    "stream length {} is not a multiple of symbol length {symbol_len}",
                    s.len()
                )));
            }
        }
        Ok(Self {
            streams,
            symbol_len,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.streams
            .first()
            .map_or(0, |s| s.len() / self.symbol_len)
    }
}

/// Cached FFT plans for one configuration.
#[derive(Clone)]
pub struct OfdmModem {
    config: SystemConfig,
    bins: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem")
            .field("n_fft", &self.config.n_fft)
            .field("cp_len", &self.config.cp_len)
            .finish()
    }
}

impl OfdmModem {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            config: config.clone(),
            bins: (0..config.n_used).map(|i| config.subcarrier_bin(i)).collect(),
            forward: planner.plan_fft_forward(config.n_fft),
            inverse: planner.plan_fft_inverse(config.n_fft),
            scale: 1.0 / (config.n_fft as f64).sqrt(),
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    /// One OFDM symbol (CP followed by body) from the used-subcarrier values.
    pub fn modulate(&self, column: &[Cplx]) -> Result<Vec<Cplx>> {
        let c = &self.config;
        if column.len() != c.n_used {
            return Err(Error::LengthMismatch {
                what: "grid column",
                expected: c.n_used,
                actual: column.len(),
            });
        }
        let mut body = vec![Cplx::new(0.0, 0.0); c.n_fft];
        for (&b, &v) in self.bins.iter().zip(column) {
            body[b] = v;
        }
        self.inverse.process(&mut body);
        body.iter_mut().for_each(|v| *v *= self.scale);
        let mut out = Vec::with_capacity(c.symbol_len());
        out.extend_from_slice(&body[c.n_fft - c.cp_len..]);
        out.extend_from_slice(&body);
        Ok(out)
    }

    /// Drops the CP, applies the DFT and returns the used subcarriers.
    pub fn demodulate(&self, rx_symbol: &[Cplx]) -> Result<Vec<Cplx>> {
        let c = &self.config;
        if rx_symbol.len() != c.symbol_len() {
            return Err(Error::LengthMismatch {
                what: "received OFDM symbol",
                expected: c.symbol_len(),
                actual: rx_symbol.len(),
            });
        }
        let mut body = rx_symbol[c.cp_len..].to_vec();
        self.forward.process(&mut body);
        Ok(self.bins.iter().map(|&b| body[b] * self.scale).collect())
    }

    /// Modulates every symbol of every antenna and concatenates per antenna.
    pub fn modulate_grid(&self, grid: &ResourceGrid) -> Result<TimeDomainSignal> {
        let streams = (0..grid.n_tx())
            .map(|tx| {
                let g = grid.antenna(tx);
                let mut s = Vec::with_capacity(g.n_symbols() * self.config.symbol_len());
                for sym in 0..g.n_symbols() {
                    s.extend(self.modulate(g.column(sym))?);
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        TimeDomainSignal::new(streams, self.config.symbol_len())
    }

    /// Demodulates each receive stream into a frequency grid.
    pub fn demodulate_signal(&self, rx: &TimeDomainSignal) -> Result<Vec<FreqGrid>> {
        if rx.symbol_len != self.config.symbol_len() {
            return Err(Error::LengthMismatch {
                what: "symbol length",
                expected: self.config.symbol_len(),
                actual: rx.symbol_len,
            });
        }
        rx.streams
            .iter()
            .map(|s| {
                let cols = s
                    .chunks(rx.symbol_len)
                    .map(|sym| self.demodulate(sym))
                    .collect::<Result<Vec<_>>>()?;
                FreqGrid::from_columns(self.config.n_used, cols)
            })
            .collect()
    }
}

pub fn ofdm_modulate(grid_column: &[Cplx], config: &SystemConfig) -> Result<Vec<Cplx>> {
    OfdmModem::new(config)?.modulate(grid_column)
}

pub fn ofdm_demodulate(rx_symbol: &[Cplx], config: &SystemConfig) -> Result<Vec<Cplx>> {
    OfdmModem::new(config)?.demodulate(rx_symbol)
}
