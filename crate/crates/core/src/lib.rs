//! Baseband SEFDM link simulator.
//!
//! The signal chain runs bits through Gray 4-QAM, a frequency-domain cyclic
//! prefix, SEFDM modulation and optional RRC shaping, over AWGN or a
//! delay-Doppler tapped-delay-line channel, and back through a matched filter
//! to one of the detectors in [`detect`]. [`harness`] drives seeded Monte
//! Carlo sweeps and writes BER tables.

pub mod channel;
pub mod detect;
pub mod error;
pub mod frame;
pub mod harness;
pub mod linkmap;
pub mod shaping;

pub use error::{Error, Result};
