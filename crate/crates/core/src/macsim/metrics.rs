//! Per-run counters and the derived throughput and delay.

use alloc::format;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Protocol {
    Baseline,
    Rrh,
    Dualband,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Baseline, Protocol::Rrh, Protocol::Dualband];

    pub fn label(self) -> &'static str {
        match self {
            Protocol::Baseline => "baseline",
            Protocol::Rrh => "rrh",
            Protocol::Dualband => "dualband",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown protocol {s:?}, expected baseline, rrh or dualband")))
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsRecord {
    pub protocol: Protocol,
    pub horizon_s: f64,
    pub delivered_bits: u64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub sum_delay_s: f64,
    /// Unicast frames lost to interference or half-duplex overlap, both bands.
    pub collision_count: u64,
    /// DATA frames lost where the dominant interferer was another AP's beam.
    pub beam_interference_losses: u64,
    pub blocked_count: u64,
    /// Time spent in beacon header intervals over the horizon.
    pub bhi_overhead_fraction: f64,
    /// Time the links spent outside beacon headers, summed over busy DTIs.
    pub dti_time_s: f64,
    /// BRP refinements that found every candidate eliminated.
    pub brp_fallbacks: u64,
}

impl MetricsRecord {
    pub fn new(protocol: Protocol, horizon_s: f64) -> Self {
        Self {
            protocol,
            horizon_s,
            delivered_bits: 0,
            generated: 0,
            delivered: 0,
            dropped: 0,
            in_flight: 0,
            sum_delay_s: 0.0,
            collision_count: 0,
            beam_interference_losses: 0,
            blocked_count: 0,
            bhi_overhead_fraction: 0.0,
            dti_time_s: 0.0,
            brp_fallbacks: 0,
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.in_flight
    }
}

/// Throughput in Gbps and mean delay in seconds, absent when nothing was
/// delivered.
pub fn compute_metrics(record: &MetricsRecord) -> (f64, Option<f64>) {
    let throughput = if record.horizon_s > 0.0 { record.delivered_bits as f64 / record.horizon_s / 1e9 } else { 0.0 };
    let delay = (record.delivered > 0).then(|| record.sum_delay_s / record.delivered as f64);
    (throughput, delay)
}

/// Total throughput of `n` concurrent links when each beacon header costs
/// `alpha1` of the interval: `(1 - n·alpha1)·n·r1`.
pub fn analytic_rn(n: u32, alpha1: f64, r1: f64) -> Result<f64> {
    let load = f64::from(n) * alpha1;
    if !(load < 1.0) || alpha1 < 0.0 {
        return Err(Error::Domain(format!("N*alpha1 = {load} must be in [0, 1)")));
    }
    Ok((1.0 - load) * f64::from(n) * r1)
}
