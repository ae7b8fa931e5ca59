//! Config files, fingerprint database files, sweeps, CSV results and traces
//! around `mmwlan-core`.

pub mod config;
pub mod dbfile;
pub mod error;
pub mod report;
pub mod sweep;

use mmwlan_core::learning::{build_databases, group_by_best_sector, ExemplarCatalog, FingerprintDatabases};

pub use config::RunConfig;
pub use error::{ConfigError, Error, Result};

/// Per-AP size of the offline learning output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApSummary {
    pub ap: usize,
    /// LPs with a best sector toward this AP.
    pub covered_lps: usize,
    pub groups: usize,
    pub exemplars: usize,
}

/// Databases and exemplars for the configured layout at `seed`.
pub fn build_db(cfg: &RunConfig, seed: u64) -> Result<(FingerprintDatabases, Vec<ApSummary>)> {
    let sc = cfg.scenario(cfg.environment.num_aps, seed)?;
    let db = build_databases(&sc.env, &sc.radio, Some(&sc.radio.shadowing(seed)))?;
    let catalog = ExemplarCatalog::build(&db, &sc.learning.affinity())?;
    let mut summary = Vec::with_capacity(db.num_aps());
    for ap in 0..db.num_aps() {
        let groups = group_by_best_sector(&db, ap)?;
        summary.push(ApSummary {
            ap,
            covered_lps: groups.values().map(Vec::len).sum(),
            groups: groups.len(),
            exemplars: catalog.for_ap(ap).iter().map(|s| s.exemplars.len()).sum(),
        });
    }
    Ok((db, summary))
}
