//! QPSK mapping and per-subcarrier zero-forcing MIMO detection.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::{Cplx, Error, Result};

/// ZF solutions with a channel condition number above this are erased.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

/// Payload bits, one per byte (0 or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock {
    pub bits: Vec<u8>,
}

impl BitBlock {
    pub fn new(bits: Vec<u8>, bits_per_symbol: usize, n_tx: usize) -> Result<Self> {
        let unit = bits_per_symbol * n_tx;
        if unit == 0 || bits.len() % unit != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} bits is not a multiple of {unit}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            bits: (0..n).map(|_| rng.random::<bool>() as u8).collect(),
        }
    }
}

/// Gray-coded QPSK: bit pair (b0, b1) maps to `((1-2b0) + j(1-2b1))/√2`,
/// so `00 -> (1+j)/√2`.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Cplx>> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "QPSK needs an even number of bits, got {}",
            bits.len()
        )));
    }
    let level = |b: u8| if b == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Ok(bits
        .chunks_exact(2)
        .map(|p| Cplx::new(level(p[0]), level(p[1])))
        .collect())
}

/// Hard decision per axis. A zero coordinate decides bit 0.
pub fn qpsk_demap(symbols: &[Cplx]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZfOutput {
    pub symbols: Vec<Cplx>,
    /// The channel was too ill-conditioned; `symbols` are all zero.
    pub erased: bool,
}

/// Zero-forcing estimate `(H^H H)^{-1} H^H y` for an `n_rx × n_tx` channel.
pub fn zf_detect(y: &[Cplx], h: &DMatrix<Cplx>) -> Result<ZfOutput> {
    let (n_rx, n_tx) = h.shape();
    if y.len() != n_rx {
        return Err(Error::LengthMismatch {
            what: "receive vector",
            expected: n_rx,
            actual: y.len(),
        });
    }
    if n_tx == 0 || n_rx < n_tx {
        return Err(Error::InvalidArgument(format!(
            "ZF needs n_rx >= n_tx >= 1, got {n_rx}x{n_tx}"
        )));
    }
    let erased = || ZfOutput {
        symbols: vec![Cplx::new(0.0, 0.0); n_tx],
        erased: true,
    };
    // Matched filter output and Gram matrix.
    let z: Vec<Cplx> = (0..n_tx)
        .map(|t| (0..n_rx).map(|r| h[(r, t)].conj() * y[r]).sum())
        .collect();
    let gram = |a: usize, b: usize| -> Cplx { (0..n_rx).map(|r| h[(r, a)].conj() * h[(r, b)]).sum() };

    match n_tx {
        1 => {
            let g = gram(0, 0).re;
            if !(g > 0.0) || !g.is_finite() {
                return Ok(erased());
            }
            Ok(ZfOutput {
                symbols: vec![z[0] / g],
                erased: false,
            })
        }
        2 => {
            let a = gram(0, 0).re;
            let b = gram(0, 1);
            let d = gram(1, 1).re;
            // eigenvalues of the Hermitian Gram matrix
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            let (l_max, l_min) = (mean + rad, mean - rad);
            if !(l_min > 0.0) || !l_max.is_finite() || (l_max / l_min).sqrt() > MAX_CONDITION_NUMBER {
                return Ok(erased());
            }
            let det = a * d - b.norm_sqr();
            Ok(ZfOutput {
                symbols: vec![(z[0] * d - b * z[1]) / det, (z[1] * a - b.conj() * z[0]) / det],
                erased: false,
            })
        }
        _ => {
            let svd = h.clone().svd(true, true);
            let s = &svd.singular_values;
            let (s_max, s_min) = (s.max(), s.min());
            if !(s_min > 0.0) || s_max / s_min > MAX_CONDITION_NUMBER {
                return Ok(erased());
            }
            let x = svd
                .solve(&DVector::from_column_slice(y), 0.0)
                .map_err(|_| Error::Singular)?;
            Ok(ZfOutput {
                symbols: x.iter().copied().collect(),
                erased: false,
            })
        }
    }
}
