//! Link-level simulator for a 2x2 LTE-style downlink.
//!
//! The transmit chain maps QPSK payload and cell-specific reference signals
//! onto a slot-sized resource grid, OFDM-modulates every symbol and pushes
//! the whole slot through a Rayleigh tap-delay-line MIMO channel using linear
//! convolution. When the channel is longer than the cyclic prefix, the
//! receiver therefore sees genuine inter-symbol and inter-carrier
//! interference.
//!
//! The receiver estimates each (tx, rx) channel from the pilots with LS,
//! LMMSE, or the hybrid LS-LMMSE policy, detects the data with per-subcarrier
//! zero forcing and reports MSE/BER. [`sim_harness`] sweeps SNR and channel
//! length and writes CSV.

pub mod channel_model;
pub mod error;
pub mod estimation;
pub mod link_proc;
pub mod ofdm_phy;
pub mod resource_grid;
pub mod rng;
pub mod sim_harness;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type Cplx = num_complex::Complex64;
