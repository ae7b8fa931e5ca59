//! Core library for coordinated millimeter-wave (60 GHz) WLANs.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO. It provides:
//!
//! * [`environment`]: room geometry, AP poses, learning-point grids and the
//!   sectored antenna layout.
//! * [`radio`]: free-space propagation, the sectored antenna pattern, SNR and
//!   SINR, and the SC-PHY MCS table.
//! * [`learning`]: the offline fingerprint databases, best-sector grouping and
//!   affinity propagation clustering that produces fingerprint exemplars.
//! * [`coordination`]: online AP selection, best-beam estimation, bad-beam
//!   candidate computation and beam refinement.
//! * [`macsim`]: a deterministic discrete-event engine running the
//!   un-coordinated 802.11ad baseline, the centralized RRH-coordinated MAC and
//!   the Wi-Fi assisted dual-band MAC.
//!
//! The `mmwlan` crate layers config files, database files, traces and the CLI
//! on top of this one.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod coordination;
pub mod environment;
pub mod error;
pub mod learning;
pub mod macsim;
pub mod radio;
pub mod rng;

mod math;

pub use error::{Error, Result};
