//! Sweep points, run dispatch and the worker pool.

use std::panic::{catch_unwind, AssertUnwindSafe};

use mmwlan_core::macsim::{run, MetricsRecord, Protocol, RunOptions, TraceRecord};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::report::Row;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Point {
    pub protocol: Protocol,
    pub num_aps: usize,
    pub seed: u64,
}

/// Every (protocol, AP count, seed) of the sweep, in CSV order.
pub fn sweep_points(cfg: &RunConfig) -> Vec<Point> {
    points(cfg, &cfg.run.ap_counts)
}

/// Single-layout points at `environment.num_aps`.
pub fn run_points(cfg: &RunConfig) -> Vec<Point> {
    points(cfg, &[cfg.environment.num_aps])
}

fn points(cfg: &RunConfig, ap_counts: &[usize]) -> Vec<Point> {
    let mut out = Vec::new();
    for &protocol in &cfg.run.protocols {
        for &num_aps in ap_counts {
            for &seed in &cfg.run.seeds {
                out.push(Point { protocol, num_aps, seed });
            }
        }
    }
    out
}

pub struct PointResult {
    pub point: Point,
    pub row: Row,
    /// Absent when the run faulted.
    pub metrics: Option<MetricsRecord>,
    pub trace: Vec<TraceRecord>,
}

/// Runs one point. Faults, panics included, become a row status.
pub fn run_point(cfg: &RunConfig, p: Point, trace: bool) -> PointResult {
    let id = &cfg.run.scenario_id;
    let attempt = catch_unwind(AssertUnwindSafe(|| {
        let sc = cfg.scenario(p.num_aps, p.seed)?;
        let out = run(&sc, p.protocol, RunOptions { trace })?;
        Ok::<_, mmwlan_core::Error>((sc.env.ues.len(), out))
    }));
    let fail = |why: String| Row::failed(id, p.protocol, p.num_aps, p.seed, cfg.run.horizon_s, &why);
    match attempt {
        Ok(Ok((num_ues, out))) => PointResult {
            point: p,
            row: Row::from_metrics(id, p.num_aps, num_ues, p.seed, &out.metrics),
            metrics: Some(out.metrics),
            trace: out.trace,
        },
        Ok(Err(e)) => PointResult { point: p, row: fail(e.to_string()), metrics: None, trace: Vec::new() },
        Err(panic) => {
            let why = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "run panicked".into());
            PointResult { point: p, row: fail(format!("internal fault: {why}")), metrics: None, trace: Vec::new() }
        }
    }
}

/// Runs `points` on a bounded pool; results come back in input order.
pub fn run_all(cfg: &RunConfig, points: &[Point], trace: bool) -> Vec<PointResult> {
    let work = || points.par_iter().map(|&p| run_point(cfg, p, trace)).collect();
    match cfg.run.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("worker pool").install(work),
        None => work(),
    }
}
