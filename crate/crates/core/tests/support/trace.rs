//! Checks read off an event trace.

use mmwlan_core::macsim::scenario::Timing;
use mmwlan_core::macsim::{Band, Endpoint, FrameKind, Outcome, SimTime, TraceRecord};

/// Refinement windows reserved by NAVset frames: owner AP and `[start, end)`.
///
/// A window opens when a NAVset that got through ends and covers the owner's run of BRP
/// probes, the feedback, and the BID that follows.
pub fn nav_windows(trace: &[TraceRecord], t: &Timing) -> Vec<(usize, SimTime, SimTime)> {
    let mut out = Vec::new();
    for r in trace.iter().filter(|r| r.kind == FrameKind::NavSet && r.band == Band::Wifi5 && r.outcome == Outcome::Success) {
        let Endpoint::Ap(a) = r.src else { continue };
        let open = r.end_ns();
        let mut probes: SimTime = 0;
        while trace.iter().any(|p| {
            p.kind == FrameKind::Brp && p.src == Endpoint::Ap(a) && p.start_ns == open + t.sifs + probes * t.brp_slot
        }) {
            probes += 1;
        }
        let close = open + t.sifs + probes * t.brp_slot + t.sifs + t.ctrl + t.wifi_pifs + t.wifi_ctrl;
        out.push((a, open, close));
    }
    out
}

/// BRP frames that start inside another AP's refinement window.
pub fn nav_violations(trace: &[TraceRecord], t: &Timing) -> usize {
    let windows = nav_windows(trace, t);
    trace
        .iter()
        .filter(|r| r.kind == FrameKind::Brp)
        .filter(|r| {
            windows.iter().any(|&(a, open, close)| r.src != Endpoint::Ap(a) && r.start_ns < close && r.end_ns() > open)
        })
        .count()
}
