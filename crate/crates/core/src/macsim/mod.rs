//! Discrete-event MAC simulation.

use alloc::vec::Vec;

use crate::error::Result;
use crate::learning::{build_databases, ExemplarCatalog, FingerprintDatabases};

mod baseline;
pub mod csma;
mod dualband;
mod engine;
pub mod event;
pub mod frame;
pub mod medium;
pub mod metrics;
mod rrh;
pub mod scenario;
pub mod traffic;

pub use event::{ns_to_secs, secs_to_ns, us_to_ns, EventQueue, SimTime};
pub use frame::{Band, Endpoint, FrameKind, Outcome, TraceRecord};
pub use metrics::{analytic_rn, compute_metrics, MetricsRecord, Protocol};
pub use scenario::{LayoutConfig, LearningConfig, MacConfig, Scenario, TrafficConfig, UePlacement};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every frame in [`RunOutput::trace`].
    pub trace: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsRecord,
    /// Frames sorted by start time; empty unless tracing was asked for.
    pub trace: Vec<TraceRecord>,
}

/// Offline state the dual-band protocol coordinates with.
#[derive(Debug, Clone)]
pub struct Learned {
    pub db: FingerprintDatabases,
    pub catalog: ExemplarCatalog,
}

/// Builds the fingerprint databases and exemplars for `sc`.
pub fn learn(sc: &Scenario) -> Result<Learned> {
    let shadowing = sc.radio.shadowing(sc.seed);
    let db = build_databases(&sc.env, &sc.radio, Some(&shadowing))?;
    let catalog = ExemplarCatalog::build(&db, &sc.learning.affinity())?;
    Ok(Learned { db, catalog })
}

/// Runs one protocol over the scenario horizon.
pub fn run(sc: &Scenario, protocol: Protocol, opts: RunOptions) -> Result<RunOutput> {
    match protocol {
        Protocol::Baseline => baseline::run(sc, &opts),
        Protocol::Rrh => rrh::run(sc, &opts),
        Protocol::Dualband => dualband::run(sc, &learn(sc)?, &opts),
    }
}

/// Dual-band run against previously learned state.
pub fn run_dualband(sc: &Scenario, learned: &Learned, opts: RunOptions) -> Result<RunOutput> {
    dualband::run(sc, learned, &opts)
}
