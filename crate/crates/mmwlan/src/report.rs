//! Results CSV and per-run trace files.

use std::io::Write;

use mmwlan_core::macsim::{compute_metrics, ns_to_secs, MetricsRecord, Protocol, TraceRecord};

use crate::error::Result;

pub const CSV_HEADER: [&str; 12] = [
    "scenario_id",
    "protocol",
    "num_aps",
    "num_ues",
    "seed",
    "horizon_s",
    "throughput_gbps",
    "avg_delay_ms",
    "collisions",
    "dropped",
    "bhi_overhead",
    "status",
];

pub const TRACE_HEADER: [&str; 8] = ["time_s", "kind", "band", "src", "dst", "sector", "duration_s", "outcome"];

/// One results row. Empty metric cells mean the run failed or delivered
/// nothing (delay only).
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario_id: String,
    pub protocol: Protocol,
    pub num_aps: usize,
    pub num_ues: usize,
    pub seed: u64,
    pub horizon_s: f64,
    pub throughput_gbps: Option<f64>,
    pub avg_delay_ms: Option<f64>,
    pub collisions: Option<u64>,
    pub dropped: Option<u64>,
    pub bhi_overhead: Option<f64>,
    pub status: String,
}

impl Row {
    pub fn from_metrics(scenario_id: &str, num_aps: usize, num_ues: usize, seed: u64, m: &MetricsRecord) -> Self {
        let (gbps, delay) = compute_metrics(m);
        Self {
            scenario_id: scenario_id.into(),
            protocol: m.protocol,
            num_aps,
            num_ues,
            seed,
            horizon_s: m.horizon_s,
            throughput_gbps: Some(gbps),
            avg_delay_ms: delay.map(|d| d * 1e3),
            collisions: Some(m.collision_count),
            dropped: Some(m.dropped),
            bhi_overhead: Some(m.bhi_overhead_fraction),
            status: "ok".into(),
        }
    }

    pub fn failed(scenario_id: &str, protocol: Protocol, num_aps: usize, seed: u64, horizon_s: f64, why: &str) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            protocol,
            num_aps,
            num_ues: 0,
            seed,
            horizon_s,
            throughput_gbps: None,
            avg_delay_ms: None,
            collisions: None,
            dropped: None,
            bhi_overhead: None,
            status: format!("error: {why}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.scenario_id.clone(),
            r.protocol.label().to_string(),
            r.num_aps.to_string(),
            r.num_ues.to_string(),
            r.seed.to_string(),
            r.horizon_s.to_string(),
            opt(r.throughput_gbps, |v| format!("{v:.6}")),
            opt(r.avg_delay_ms, |v| format!("{v:.6}")),
            opt(r.collisions, |v| v.to_string()),
            opt(r.dropped, |v| v.to_string()),
            opt(r.bhi_overhead, |v| format!("{v:.6}")),
            r.status.clone(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(String::new, f)
}

pub fn csv_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record(&[
            format!("{:.9}", ns_to_secs(r.start_ns)),
            r.kind.to_string(),
            r.band.to_string(),
            r.src.to_string(),
            r.dst.to_string(),
            r.sector.map_or_else(String::new, |s| s.to_string()),
            format!("{:.9}", ns_to_secs(r.duration_ns)),
            r.outcome.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmwlan_core::macsim::{Band, Endpoint, FrameKind, Outcome};

    #[test]
    fn row_carries_metrics_through() {
        let mut m = MetricsRecord::new(Protocol::Dualband, 0.001);
        m.delivered = 10;
        m.generated = 10;
        m.delivered_bits = 120_000;
        m.sum_delay_s = 10.0 * 5e-6;
        let r = Row::from_metrics("s", 2, 4, 7, &m);
        assert_eq!(r.throughput_gbps, Some(0.12));
        let text = csv_string(&[r]);
        assert_eq!(
            text,
            "scenario_id,protocol,num_aps,num_ues,seed,horizon_s,throughput_gbps,avg_delay_ms,collisions,dropped,bhi_overhead,status\n\
             s,dualband,2,4,7,0.001,0.120000,0.005000,0,0,0.000000,ok\n"
        );
    }

    #[test]
    fn nothing_delivered_leaves_delay_empty() {
        let m = MetricsRecord::new(Protocol::Baseline, 1.0);
        let text = csv_string(&[Row::from_metrics("s", 1, 1, 1, &m)]);
        assert!(text.ends_with("s,baseline,1,1,1,1,0.000000,,0,0,0.000000,ok\n"), "{text}");
    }

    #[test]
    fn trace_line_shape() {
        let rec = TraceRecord {
            start_ns: 1_500,
            kind: FrameKind::Brp,
            band: Band::Mmw60,
            src: Endpoint::Ap(1),
            dst: Endpoint::Ue(3),
            sector: Some(12),
            duration_ns: 10_000,
            outcome: Outcome::Sent,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &[rec]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_s,kind,band,src,dst,sector,duration_s,outcome\n0.000001500,BRP,60GHz,ap1,ue3,12,0.000010000,sent\n"
        );
    }
}
