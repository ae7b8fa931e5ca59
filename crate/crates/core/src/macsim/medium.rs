//! Shared channels: precomputed 60 GHz gains, SINR-tracked receptions,
//! the single 5 GHz collision domain and human blockage.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::event::{SimTime, NS_PER_S};
use super::frame::{Band, Endpoint, FrameKind, Outcome, TraceRecord};
use crate::environment::{angle_offset, Environment, Point3};
use crate::error::Result;
use crate::radio::{antenna_gain, db_to_linear, linear_to_db, path_loss_db, rx_power_mmw, BlockageConfig, RadioConfig};

/// How a 60 GHz frame is radiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beam {
    ApSector { ap: usize, sector: u16 },
    /// UE with its trained sector aimed at an AP.
    UeToward { ue: usize, ap: usize },
    UeOmni { ue: usize },
}

impl Beam {
    pub fn src(self) -> Endpoint {
        match self {
            Beam::ApSector { ap, .. } => Endpoint::Ap(ap),
            Beam::UeToward { ue, .. } | Beam::UeOmni { ue } => Endpoint::Ue(ue),
        }
    }

    pub fn sector(self) -> Option<u16> {
        match self {
            Beam::ApSector { sector, .. } => Some(sector),
            _ => None,
        }
    }
}

/// Received 60 GHz power, in milliwatts, for every (beam, receiver) pair.
///
/// Node indices put APs first, then UEs.
#[derive(Debug, Clone)]
pub struct Gains {
    n_aps: usize,
    n_nodes: usize,
    max_sectors: usize,
    ap_sector: Vec<f64>,
    ue_toward: Vec<f64>,
    ue_omni: Vec<f64>,
    noise_mw: f64,
}

impl Gains {
    pub fn new(env: &Environment, radio: &RadioConfig) -> Result<Self> {
        let n_aps = env.aps.len();
        let n_ues = env.ues.len();
        let n_nodes = n_aps + n_ues;
        let max_sectors = env.aps.iter().map(|a| a.num_sectors()).max().unwrap_or(0);
        let positions: Vec<Point3> = env.aps.iter().map(|a| a.position).chain(env.ues.iter().copied()).collect();

        let mut ap_sector = vec![0.0; n_aps * max_sectors * n_nodes];
        for (a, ap) in env.aps.iter().enumerate() {
            for s in ap.sector_ids() {
                for (k, p) in positions.iter().enumerate() {
                    if k == a {
                        continue;
                    }
                    ap_sector[(a * max_sectors + usize::from(s) - 1) * n_nodes + k] =
                        db_to_linear(rx_power_mmw(ap, s, *p, radio)?);
                }
            }
        }
        let link = |from: Point3, to: Point3, gain_dbi: f64| {
            db_to_linear(radio.ue_tx_power_mmw_dbm + gain_dbi + radio.rx_gain_dbi - path_loss_db(from.distance(to), radio.mmw_freq_hz))
        };
        let mut ue_toward = vec![0.0; n_ues * n_aps * n_nodes];
        let mut ue_omni = vec![0.0; n_ues * n_nodes];
        for (u, &up) in env.ues.iter().enumerate() {
            for (a, ap) in env.aps.iter().enumerate() {
                // Steering toward the AP: reuse the AP-side offset helper with a
                // one-sector node at the UE.
                let aim = crate::environment::ApNode::new(
                    0,
                    up,
                    vec![(ap.position - up).normalized().unwrap_or(Point3::new(0.0, 0.0, 1.0))],
                    0.0,
                    0.0,
                )?;
                for (k, p) in positions.iter().enumerate() {
                    if k == n_aps + u {
                        continue;
                    }
                    let g = antenna_gain(&radio.pattern, angle_offset(&aim, 1, *p)?);
                    ue_toward[(u * n_aps + a) * n_nodes + k] = link(up, *p, g);
                }
            }
            for (k, p) in positions.iter().enumerate() {
                if k != n_aps + u {
                    ue_omni[u * n_nodes + k] = link(up, *p, 0.0);
                }
            }
        }
        Ok(Self { n_aps, n_nodes, max_sectors, ap_sector, ue_toward, ue_omni, noise_mw: db_to_linear(radio.noise_dbm()) })
    }

    pub fn node(&self, e: Endpoint) -> Option<usize> {
        match e {
            Endpoint::Ap(a) => Some(a),
            Endpoint::Ue(u) => Some(self.n_aps + u),
            _ => None,
        }
    }

    pub fn power_mw(&self, beam: Beam, node: usize) -> f64 {
        match beam {
            Beam::ApSector { ap, sector } => {
                self.ap_sector[(ap * self.max_sectors + usize::from(sector) - 1) * self.n_nodes + node]
            }
            Beam::UeToward { ue, ap } => self.ue_toward[(ue * self.n_aps + ap) * self.n_nodes + node],
            Beam::UeOmni { ue } => self.ue_omni[ue * self.n_nodes + node],
        }
    }

    pub fn power_dbm(&self, beam: Beam, to: Endpoint) -> f64 {
        self.node(to).map_or(f64::NEG_INFINITY, |k| linear_to_db(self.power_mw(beam, k)))
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    /// SINR in dB at `to` for `signal` with the listed concurrent beams.
    pub fn sinr_db(&self, signal: Beam, interferers: &[Beam], to: Endpoint) -> f64 {
        let Some(k) = self.node(to) else { return f64::NEG_INFINITY };
        let i: f64 = interferers.iter().map(|b| self.power_mw(*b, k)).sum();
        linear_to_db(self.power_mw(signal, k) / (i + self.noise_mw))
    }
}

/// A 60 GHz frame to put on the air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxSpec {
    pub kind: FrameKind,
    pub beam: Beam,
    pub dst: Endpoint,
    pub duration: SimTime,
    /// SINR the receiver needs; `None` for frames nobody judges.
    pub threshold_db: Option<f64>,
}

#[derive(Debug, Clone)]
struct Active {
    id: u64,
    spec: TxSpec,
    start: SimTime,
    src_node: usize,
    rx_node: Option<usize>,
    signal_mw: f64,
    min_sinr_db: f64,
    beam_dominated: bool,
    half_duplex: bool,
    blocked: bool,
    below_since: Option<SimTime>,
    below: Vec<(SimTime, SimTime)>,
}

/// A frame that left the air.
#[derive(Debug, Clone, PartialEq)]
pub struct Finished {
    pub spec: TxSpec,
    pub start: SimTime,
    pub outcome: Outcome,
    pub min_sinr_db: f64,
    /// The worst interference moment was dominated by another AP's sector.
    pub beam_interference: bool,
    /// Absolute intervals during which the receiver could not decode.
    pub lost: Vec<(SimTime, SimTime)>,
}

impl Finished {
    pub fn trace(&self) -> TraceRecord {
        TraceRecord {
            start_ns: self.start,
            kind: self.spec.kind,
            band: Band::Mmw60,
            src: self.spec.beam.src(),
            dst: self.spec.dst,
            sector: self.spec.beam.sector(),
            duration_ns: self.spec.duration,
            outcome: self.outcome,
        }
    }
}

/// The 60 GHz channel. Every receiver tracks its worst SINR over the frame
/// and the stretches spent below its threshold.
#[derive(Debug, Default)]
pub struct Mmw {
    active: Vec<Active>,
    next_id: u64,
}

impl Mmw {
    pub fn busy(&self) -> bool {
        !self.active.is_empty()
    }

    /// Power a quasi-omni listener at `node` collects from everyone else on
    /// the air, or infinity while it transmits itself.
    pub fn sensed_mw(&self, gains: &Gains, node: usize) -> f64 {
        let mut total = 0.0;
        for a in &self.active {
            if a.src_node == node {
                return f64::INFINITY;
            }
            total += gains.power_mw(a.spec.beam, node);
        }
        total
    }

    pub fn start(&mut self, gains: &Gains, spec: TxSpec, now: SimTime, blocked: bool) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let src_node = gains.node(spec.beam.src()).expect("beams originate at nodes");
        for a in &mut self.active {
            if a.rx_node == Some(src_node) {
                a.half_duplex = true;
            }
        }
        let rx_node = spec.threshold_db.and(gains.node(spec.dst));
        let half_duplex = rx_node.is_some_and(|r| self.active.iter().any(|a| a.src_node == r));
        let signal_mw = rx_node.map_or(0.0, |r| gains.power_mw(spec.beam, r));
        self.active.push(Active {
            id,
            spec,
            start: now,
            src_node,
            rx_node,
            signal_mw,
            min_sinr_db: f64::INFINITY,
            beam_dominated: false,
            half_duplex,
            blocked,
            below_since: None,
            below: Vec::new(),
        });
        self.refresh(gains, now);
        id
    }

    /// Re-evaluates every reception after the set of transmitters changed.
    fn refresh(&mut self, gains: &Gains, now: SimTime) {
        for i in 0..self.active.len() {
            let Some(r) = self.active[i].rx_node else { continue };
            let mut total = 0.0;
            let mut deaf = false;
            let mut dominant: Option<(f64, Beam)> = None;
            for (j, t) in self.active.iter().enumerate() {
                if j == i {
                    continue;
                }
                if t.src_node == r {
                    deaf = true;
                    continue;
                }
                let p = gains.power_mw(t.spec.beam, r);
                total += p;
                if dominant.is_none_or(|(dp, _)| p > dp) {
                    dominant = Some((p, t.spec.beam));
                }
            }
            let a = &mut self.active[i];
            let sinr = linear_to_db(a.signal_mw / (total + gains.noise_mw()));
            let th = a.spec.threshold_db.unwrap_or(f64::NEG_INFINITY);
            match (deaf || sinr < th, a.below_since) {
                (true, None) => a.below_since = Some(now),
                (false, Some(s)) => {
                    a.below.push((s, now));
                    a.below_since = None;
                }
                _ => {}
            }
            if sinr < a.min_sinr_db {
                a.min_sinr_db = sinr;
                let own_src = a.spec.beam.src();
                a.beam_dominated = matches!(
                    dominant,
                    Some((_, b @ Beam::ApSector { .. })) if b.src() != own_src
                );
            }
        }
    }

    pub fn finish(&mut self, gains: &Gains, id: u64, now: SimTime) -> Finished {
        let pos = self.active.iter().position(|a| a.id == id).expect("finishing a frame that is on the air");
        let mut a = self.active.remove(pos);
        if let Some(s) = a.below_since.take() {
            a.below.push((s, now));
        }
        self.refresh(gains, now);
        let outcome = match a.spec.threshold_db {
            None => Outcome::Sent,
            Some(_) if a.rx_node.is_none() => Outcome::Sent,
            Some(_) if a.blocked => Outcome::Blocked,
            Some(_) if a.half_duplex || !a.below.is_empty() => Outcome::Collision,
            Some(_) => Outcome::Success,
        };
        Finished {
            spec: a.spec,
            start: a.start,
            outcome,
            min_sinr_db: a.min_sinr_db,
            beam_interference: outcome == Outcome::Collision && !a.half_duplex && a.beam_dominated,
            lost: a.below,
        }
    }
}

/// The 5 GHz band: one collision domain, any overlap destroys both frames.
#[derive(Debug, Default)]
pub struct Wifi {
    active: Vec<(u64, bool)>,
    next_id: u64,
}

impl Wifi {
    pub fn busy(&self) -> bool {
        !self.active.is_empty()
    }

    pub fn start(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let collided = !self.active.is_empty();
        for a in &mut self.active {
            a.1 = true;
        }
        self.active.push((id, collided));
        id
    }

    /// Whether the frame survived.
    pub fn finish(&mut self, id: u64) -> bool {
        let pos = self.active.iter().position(|a| a.0 == id).expect("finishing a frame that is on the air");
        !self.active.swap_remove(pos).1
    }
}

#[derive(Debug, Clone)]
struct Timeline {
    rng: ChaCha8Rng,
    /// Time up to which the on/off process has been drawn.
    drawn_until: SimTime,
    blocked_now: bool,
    intervals: VecDeque<(SimTime, SimTime)>,
}

/// Per AP-UE link on/off blockage with exponential sojourn times.
#[derive(Debug, Clone)]
pub struct Blockage {
    cfg: BlockageConfig,
    seed: u64,
    n_ues: usize,
    links: Vec<Option<Timeline>>,
}

impl Blockage {
    pub fn new(cfg: BlockageConfig, seed: u64, n_aps: usize, n_ues: usize) -> Self {
        Self { cfg, seed, n_ues, links: vec![None; n_aps * n_ues] }
    }

    /// Whether the link is blocked at any instant of `[start, end)`.
    /// Queries must come with non-decreasing `start`.
    pub fn blocked_during(&mut self, ap: usize, ue: usize, start: SimTime, end: SimTime) -> bool {
        if !self.cfg.enabled {
            return false;
        }
        let idx = ap * self.n_ues + ue;
        let (seed, cfg) = (self.seed, self.cfg);
        let tl = self.links[idx].get_or_insert_with(|| Timeline {
            rng: crate::rng::substream(seed, "blockage", idx as u64),
            drawn_until: 0,
            blocked_now: false,
            intervals: VecDeque::new(),
        });
        while tl.drawn_until < end {
            let mean = if tl.blocked_now { cfg.mean_blocked_s } else { cfg.mean_unblocked_s };
            let d = Exp::new(1.0 / mean).map_or(mean, |e| e.sample(&mut tl.rng));
            let next = tl.drawn_until + crate::math::round(d * NS_PER_S).max(1.0) as SimTime;
            if tl.blocked_now {
                tl.intervals.push_back((tl.drawn_until, next));
            }
            tl.drawn_until = next;
            tl.blocked_now = !tl.blocked_now;
        }
        while tl.intervals.front().is_some_and(|iv| iv.1 <= start) {
            tl.intervals.pop_front();
        }
        tl.intervals.iter().any(|&(s, e)| s < end && start < e)
    }

    pub fn loss_db(&self) -> f64 {
        self.cfg.loss_db
    }
}
