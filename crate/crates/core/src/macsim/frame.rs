//! MAC frame kinds and trace records.

use core::fmt;

use super::event::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FrameKind {
    /// Beacon / sector-sweep frame.
    Ssw,
    SswFeedback,
    TriggerSweep,
    RssiFeedback,
    Cli,
    Rts,
    Cts,
    Bli,
    Api,
    WifiMReq,
    WifiMResp,
    SwitchOn,
    NavSet,
    Brp,
    Fbk,
    Bid,
    Data,
    Ack,
}

impl FrameKind {
    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Ssw => "SSW",
            FrameKind::SswFeedback => "SSW-Feedback",
            FrameKind::TriggerSweep => "TriggerSweep",
            FrameKind::RssiFeedback => "RSSI-Feedback",
            FrameKind::Cli => "CLI",
            FrameKind::Rts => "RTS",
            FrameKind::Cts => "CTS",
            FrameKind::Bli => "BLI",
            FrameKind::Api => "API",
            FrameKind::WifiMReq => "WiFi-M-Req",
            FrameKind::WifiMResp => "WiFi-M-Resp",
            FrameKind::SwitchOn => "SwitchOn",
            FrameKind::NavSet => "NAVset",
            FrameKind::Brp => "BRP",
            FrameKind::Fbk => "FBK",
            FrameKind::Bid => "BID",
            FrameKind::Data => "DATA",
            FrameKind::Ack => "ACK",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Band {
    Wifi5,
    Mmw60,
    /// Fronthaul between APs and the controller.
    Wired,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Wifi5 => "5GHz",
            Band::Mmw60 => "60GHz",
            Band::Wired => "wired",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Endpoint {
    Ap(usize),
    Ue(usize),
    /// The BBU or APC.
    Controller,
    Broadcast,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Ap(i) => write!(f, "ap{i}"),
            Endpoint::Ue(i) => write!(f, "ue{i}"),
            Endpoint::Controller => f.write_str("ctrl"),
            Endpoint::Broadcast => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    Success,
    Collision,
    Blocked,
    /// Broadcast or measurement frame; no single receiver is judged.
    Sent,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Blocked => "blocked",
            Outcome::Sent => "sent",
        })
    }
}

/// One frame as it appears in the event trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    pub start_ns: SimTime,
    pub kind: FrameKind,
    pub band: Band,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub sector: Option<u16>,
    pub duration_ns: SimTime,
    pub outcome: Outcome,
}

impl TraceRecord {
    pub fn end_ns(&self) -> SimTime {
        self.start_ns + self.duration_ns
    }

    pub fn overlaps(&self, other: &TraceRecord) -> bool {
        self.start_ns < other.end_ns() && other.start_ns < self.end_ns()
    }
}
