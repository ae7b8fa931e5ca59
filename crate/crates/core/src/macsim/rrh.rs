//! Centralized coordination: the APs act as remote radio heads of one
//! controller. A synchronized beacon header sweeps every AP and every UE in
//! turn; the controller then schedules SINR-feasible link combinations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::csma::Expiry;
use super::engine::{control, Core};
use super::event::{ns_to_secs, SimTime};
use super::frame::{Endpoint, FrameKind, Outcome};
use super::medium::{Beam, TxSpec};
use super::metrics::Protocol;
use super::scenario::Scenario;
use super::traffic::Packet;
use super::{RunOptions, RunOutput};
use crate::error::Result;
use crate::learning::best_sector;
use crate::radio::McsEntry;

enum Ev {
    /// Never posted: the controller does not contend.
    Backoff(#[allow(dead_code)] Expiry),
    Bhi,
    Step(usize),
    MmwEnd(u64),
    Round,
    Rts,
    Cts,
    Api,
    DataStart,
    Ack(usize),
    AckTimeout(usize),
    Wake(u64),
}

#[derive(Clone, Copy)]
enum Phase {
    Bhi,
    Idle,
    Busy,
}

enum Item {
    Air(TxSpec),
    Wired(Vec<(FrameKind, Endpoint, Endpoint)>),
}

#[derive(Clone, Copy)]
enum OnAir {
    Sweep(usize),
    Rts(usize),
    Cts(usize),
    Data(usize),
    Ack(usize),
}

struct RLink {
    ap: usize,
    ue: usize,
    sector: u16,
    mcs: McsEntry,
    packets: Vec<Packet>,
    ok: bool,
    got: Vec<bool>,
}

struct Sim<'s> {
    c: Core<'s, Ev>,
    /// Per UE, the associated (AP, best sector) pairs.
    assoc: Vec<Vec<(usize, u16)>>,
    bhi: Vec<Item>,
    bhi_ns: SimTime,
    next_bhi: SimTime,
    phase: Phase,
    wake_gen: u64,
    blocked: BTreeSet<(usize, usize)>,
    handshaken: BTreeSet<(usize, usize)>,
    round: Vec<RLink>,
    groups: Vec<Vec<usize>>,
    pending: usize,
    on_air: BTreeMap<u64, OnAir>,
}

pub(super) fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let c = Core::new(sc, Protocol::Rrh, opts, None, Ev::Backoff)?;
    let t = c.t;
    let mcs0 = sc.radio.mcs.control().min_snr_db;
    let noise = sc.radio.noise_dbm();

    let mut assoc = Vec::with_capacity(c.n_ues());
    for &u in &sc.env.ues {
        let mut list = Vec::new();
        for (a, ap) in sc.env.aps.iter().enumerate() {
            if let Some(b) = best_sector(ap, u, &sc.radio)? {
                if b.power_dbm >= sc.mac.rrh_rss_floor_dbm && sc.radio.mcs.for_snr(b.power_dbm - noise).is_some() {
                    list.push((a, b.sector_id));
                }
            }
        }
        assoc.push(list);
    }

    let mut bhi = vec![Item::Wired(vec![(FrameKind::TriggerSweep, Endpoint::Controller, Endpoint::Broadcast)])];
    for (a, ap) in sc.env.aps.iter().enumerate() {
        for s in ap.sector_ids() {
            bhi.push(Item::Air(TxSpec {
                kind: FrameKind::Ssw,
                beam: Beam::ApSector { ap: a, sector: s },
                dst: Endpoint::Broadcast,
                duration: t.ctrl,
                threshold_db: None,
            }));
        }
    }
    for (u, list) in assoc.iter().enumerate() {
        for _ in 0..sc.mac.responder_sweep_frames {
            bhi.push(Item::Air(TxSpec {
                kind: FrameKind::Ssw,
                beam: Beam::UeOmni { ue: u },
                dst: Endpoint::Broadcast,
                duration: t.ctrl,
                threshold_db: None,
            }));
        }
        for &(a, sector) in list {
            bhi.push(Item::Air(control(FrameKind::SswFeedback, Beam::ApSector { ap: a, sector }, Endpoint::Ue(u), t.ctrl, mcs0)));
        }
    }
    bhi.push(Item::Wired((0..c.n_aps()).map(|a| (FrameKind::RssiFeedback, Endpoint::Ap(a), Endpoint::Controller)).collect()));
    bhi.push(Item::Wired(vec![(FrameKind::Cli, Endpoint::Controller, Endpoint::Broadcast)]));

    let mut sim = Sim {
        c,
        assoc,
        bhi,
        bhi_ns: 0,
        next_bhi: 0,
        phase: Phase::Bhi,
        wake_gen: 0,
        blocked: BTreeSet::new(),
        handshaken: BTreeSet::new(),
        round: Vec::new(),
        groups: Vec::new(),
        pending: 0,
        on_air: BTreeMap::new(),
    };
    sim.c.schedule(0, Ev::Bhi)?;
    while let Some((_, ev)) = sim.c.q.pop_until(sim.c.horizon) {
        sim.handle(ev)?;
    }
    sim.c.m.bhi_overhead_fraction = ns_to_secs(sim.bhi_ns) / sc.horizon_s;
    sim.c.m.dti_time_s = sc.horizon_s - ns_to_secs(sim.bhi_ns);
    let held = sim.round.iter().map(|l| l.packets.len() as u64).sum();
    Ok(sim.c.finalize(held))
}

/// Duration of the synchronized beacon header.
fn bhi_len(items: &[Item], sbifs: SimTime, wired: SimTime) -> SimTime {
    items
        .iter()
        .map(|i| match i {
            Item::Air(s) => s.duration + sbifs,
            Item::Wired(_) => wired,
        })
        .sum()
}

impl Sim<'_> {
    fn handle(&mut self, ev: Ev) -> Result<()> {
        let now = self.c.now();
        let t = self.c.t;
        match ev {
            Ev::Backoff(_) => {}
            Ev::Bhi => {
                self.phase = Phase::Bhi;
                self.wake_gen += 1;
                self.blocked.clear();
                self.handshaken.clear();
                self.next_bhi = now + t.beacon_interval;
                self.bhi_ns += bhi_len(&self.bhi, t.sbifs, t.wired).min(self.c.horizon - now);
                self.c.schedule(self.next_bhi, Ev::Bhi)?;
                self.step(0)?;
            }
            Ev::Step(i) => self.step(i)?,
            Ev::MmwEnd(id) => {
                let f = self.c.finish_mmw(id)?;
                let ok = f.outcome == Outcome::Success;
                match self.on_air.remove(&id).expect("tracked frame") {
                    OnAir::Sweep(i) => self.c.schedule(now + t.sbifs, Ev::Step(i + 1))?,
                    OnAir::Rts(j) => {
                        self.round[j].ok = ok;
                        self.pending -= 1;
                        if self.pending == 0 {
                            self.c.schedule(now + t.sifs, Ev::Cts)?;
                        }
                    }
                    OnAir::Cts(j) => {
                        self.round[j].ok &= ok;
                        self.pending -= 1;
                        if self.pending == 0 {
                            self.after_group()?;
                        }
                    }
                    OnAir::Data(j) => {
                        let got = self.c.survivors(&f, self.round[j].packets.len());
                        self.round[j].ok = got.iter().any(|&g| g);
                        self.round[j].got = got;
                        self.pending -= 1;
                        if self.pending == 0 {
                            self.c.schedule(now + t.sifs, Ev::Ack(0))?;
                        }
                    }
                    OnAir::Ack(j) => {
                        self.resolve(j, ok);
                        self.next_ack(j)?;
                    }
                }
            }
            Ev::Round => {
                if !matches!(self.phase, Phase::Bhi) {
                    self.round()?;
                }
            }
            Ev::Wake(gen) => {
                if gen == self.wake_gen && matches!(self.phase, Phase::Idle) {
                    self.round()?;
                }
            }
            Ev::Rts => {
                let g = self.groups.last().expect("pending group").clone();
                let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
                self.pending = g.len();
                for j in g {
                    let l = &self.round[j];
                    let spec = control(FrameKind::Rts, Beam::ApSector { ap: l.ap, sector: l.sector }, Endpoint::Ue(l.ue), t.ctrl, mcs0);
                    self.put(spec, OnAir::Rts(j))?;
                }
            }
            Ev::Cts => {
                let g = self.groups.last().expect("pending group").clone();
                let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
                let live: Vec<usize> = g.into_iter().filter(|&j| self.round[j].ok).collect();
                if live.is_empty() {
                    return self.after_group();
                }
                self.pending = live.len();
                for j in live {
                    let l = &self.round[j];
                    let spec = control(FrameKind::Cts, Beam::UeToward { ue: l.ue, ap: l.ap }, Endpoint::Ap(l.ap), t.ctrl, mcs0);
                    self.put(spec, OnAir::Cts(j))?;
                }
            }
            Ev::Api => {
                for a in self.round.iter().map(|l| l.ap).collect::<Vec<_>>() {
                    self.c.wired(FrameKind::Api, Endpoint::Controller, Endpoint::Ap(a));
                }
                self.c.schedule(now + t.wired, Ev::DataStart)?;
            }
            Ev::DataStart => self.data_start()?,
            Ev::Ack(j) => {
                if self.round[j].ok {
                    let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
                    let l = &self.round[j];
                    let spec = control(FrameKind::Ack, Beam::UeToward { ue: l.ue, ap: l.ap }, Endpoint::Ap(l.ap), t.ctrl, mcs0);
                    self.put(spec, OnAir::Ack(j))?;
                } else {
                    self.c.schedule(now + t.ctrl, Ev::AckTimeout(j))?;
                }
            }
            Ev::AckTimeout(j) => {
                self.resolve(j, false);
                self.next_ack(j)?;
            }
        }
        Ok(())
    }

    fn put(&mut self, spec: TxSpec, tag: OnAir) -> Result<()> {
        let end = self.c.now() + spec.duration;
        let id = self.c.start_mmw(spec);
        self.on_air.insert(id, tag);
        self.c.schedule(end, Ev::MmwEnd(id))
    }

    fn step(&mut self, i: usize) -> Result<()> {
        let now = self.c.now();
        match self.bhi.get(i) {
            None => {
                self.phase = Phase::Idle;
                self.round()
            }
            Some(Item::Air(spec)) => {
                let spec = *spec;
                self.put(spec, OnAir::Sweep(i))
            }
            Some(Item::Wired(msgs)) => {
                for (k, s, d) in msgs.clone() {
                    self.c.wired(k, s, d);
                }
                self.c.schedule(now + self.c.t.wired, Ev::Step(i + 1))
            }
        }
    }

    fn sinr(&self, links: &[(usize, usize, u16)], j: usize) -> f64 {
        let (a, u, s) = links[j];
        let others: Vec<Beam> = links
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &(a, _, s))| Beam::ApSector { ap: a, sector: s })
            .collect();
        self.c.gains.sinr_db(Beam::ApSector { ap: a, sector: s }, &others, Endpoint::Ue(u))
    }

    fn min_sinr(&self, links: &[(usize, usize, u16)]) -> f64 {
        (0..links.len()).map(|j| self.sinr(links, j)).fold(f64::INFINITY, f64::min)
    }

    /// Greedy max-min packing. The UE with the oldest head-of-line packet
    /// goes first through its best AP; after that each step adds the
    /// (UE, AP) link that keeps the worst SINR of the set highest, older
    /// heads winning ties.
    fn combine(&self) -> Vec<(usize, usize, u16)> {
        let now = self.c.now();
        let floor = self.c.sc.mac.rrh_min_sinr_db;
        let mut order: Vec<(SimTime, usize)> =
            (0..self.c.n_ues()).filter_map(|u| self.c.ues[u].head_arrival(now).map(|h| (h, u))).collect();
        order.sort_unstable();
        let mut chosen: Vec<(usize, usize, u16)> = Vec::new();
        loop {
            let mut best: Option<((usize, usize, u16), f64)> = None;
            for &(_, u) in &order {
                if chosen.iter().any(|l| l.1 == u) {
                    continue;
                }
                for &(a, s) in &self.assoc[u] {
                    if chosen.iter().any(|l| l.0 == a) || self.blocked.contains(&(a, u)) {
                        continue;
                    }
                    chosen.push((a, u, s));
                    let m = self.min_sinr(&chosen);
                    chosen.pop();
                    if m >= floor && best.is_none_or(|b| m > b.1) {
                        best = Some(((a, u, s), m));
                    }
                }
                if chosen.is_empty() && best.is_some() {
                    break;
                }
            }
            match best {
                Some((l, _)) => chosen.push(l),
                None => return chosen,
            }
        }
    }

    fn round(&mut self) -> Result<()> {
        let now = self.c.now();
        let t = self.c.t;
        self.round.clear();
        let chosen = self.combine();
        if chosen.is_empty() {
            self.phase = Phase::Idle;
            let next = self.c.ues.iter().map(|q| q.next_arrival()).filter(|&x| x > now).min().unwrap_or(SimTime::MAX);
            if next < self.next_bhi && next <= self.c.horizon {
                self.wake_gen += 1;
                self.c.schedule(next, Ev::Wake(self.wake_gen))?;
            }
            return Ok(());
        }
        for j in 0..chosen.len() {
            let (ap, ue, sector) = chosen[j];
            let mcs = *self.c.sc.radio.mcs.for_snr(self.sinr(&chosen, j)).expect("combination clears the SINR floor");
            self.round.push(RLink { ap, ue, sector, mcs, packets: Vec::new(), ok: true, got: Vec::new() });
        }
        let fresh: Vec<usize> =
            (0..self.round.len()).filter(|&j| !self.handshaken.contains(&(self.round[j].ap, self.round[j].ue))).collect();
        self.groups = self.rts_groups(&fresh);
        self.groups.reverse();

        let l = self.round.len() as SimTime;
        let slowest = self.round.iter().map(|x| x.mcs.phy_rate_mbps).fold(f64::INFINITY, f64::min);
        let one = t.preamble + crate::math::ceil(f64::from(self.c.sc.traffic.packet_bits) * 1e3 / slowest) as SimTime;
        let need = self.groups.len() as SimTime * 2 * (t.ctrl + t.sifs) + t.wired + one + t.sifs + l * (t.ctrl + t.sifs);
        if now + need > self.next_bhi {
            self.round.clear();
            self.phase = Phase::Idle;
            return Ok(());
        }
        self.phase = Phase::Busy;
        if self.groups.is_empty() {
            self.c.schedule(now, Ev::Api)
        } else {
            self.c.schedule(now, Ev::Rts)
        }
    }

    /// RTS/CTS groups: links whose control frames decode concurrently.
    /// Minimal partition for small sets, first fit otherwise.
    fn rts_groups(&self, fresh: &[usize]) -> Vec<Vec<usize>> {
        if fresh.len() <= 4 {
            let mut best: Option<Vec<Vec<usize>>> = None;
            let mut cur = Vec::new();
            self.partition(fresh, 0, &mut cur, &mut best);
            return best.unwrap_or_default();
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &j in fresh {
            match groups.iter_mut().find(|g| self.compatible(g, j)) {
                Some(g) => g.push(j),
                None => groups.push(vec![j]),
            }
        }
        groups
    }

    fn partition(&self, fresh: &[usize], i: usize, cur: &mut Vec<Vec<usize>>, best: &mut Option<Vec<Vec<usize>>>) {
        if best.as_ref().is_some_and(|b| cur.len() >= b.len()) {
            return;
        }
        let Some(&j) = fresh.get(i) else {
            *best = Some(cur.clone());
            return;
        };
        for g in 0..cur.len() {
            if self.compatible(&cur[g], j) {
                cur[g].push(j);
                self.partition(fresh, i + 1, cur, best);
                cur[g].pop();
            }
        }
        cur.push(vec![j]);
        self.partition(fresh, i + 1, cur, best);
        cur.pop();
    }

    fn compatible(&self, group: &[usize], j: usize) -> bool {
        let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
        let mut all: Vec<usize> = group.to_vec();
        all.push(j);
        let down: Vec<Beam> = all.iter().map(|&k| Beam::ApSector { ap: self.round[k].ap, sector: self.round[k].sector }).collect();
        let up: Vec<Beam> = all.iter().map(|&k| Beam::UeToward { ue: self.round[k].ue, ap: self.round[k].ap }).collect();
        (0..all.len()).all(|i| {
            let l = &self.round[all[i]];
            let others = |v: &[Beam]| v.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, b)| *b).collect::<Vec<_>>();
            self.c.gains.sinr_db(down[i], &others(&down), Endpoint::Ue(l.ue)) >= mcs0
                && self.c.gains.sinr_db(up[i], &others(&up), Endpoint::Ap(l.ap)) >= mcs0
        })
    }

    fn after_group(&mut self) -> Result<()> {
        let now = self.c.now();
        let g = self.groups.pop().expect("pending group");
        for j in g {
            let (ap, ue) = (self.round[j].ap, self.round[j].ue);
            if self.round[j].ok {
                self.handshaken.insert((ap, ue));
            } else {
                self.c.wired(FrameKind::Bli, Endpoint::Ap(ap), Endpoint::Controller);
                self.blocked.insert((ap, ue));
            }
        }
        if self.groups.is_empty() {
            self.round.retain(|l| !self.blocked.contains(&(l.ap, l.ue)));
            if self.round.is_empty() {
                return self.c.schedule(now + self.c.t.sifs, Ev::Round);
            }
            self.c.schedule(now + self.c.t.sifs, Ev::Api)
        } else {
            self.c.schedule(now + self.c.t.sifs, Ev::Rts)
        }
    }

    fn data_start(&mut self) -> Result<()> {
        let now = self.c.now();
        let t = self.c.t;
        let tail = t.sifs + self.round.len() as SimTime * (t.ctrl + t.sifs);
        let budget = self.next_bhi.saturating_sub(now + tail);
        for j in 0..self.round.len() {
            let k = self.c.packets_fitting(&self.round[j].mcs, budget);
            let ue = self.round[j].ue;
            self.round[j].packets = self.c.ues[ue].take(now, k);
        }
        self.round.retain(|l| !l.packets.is_empty());
        if self.round.is_empty() {
            self.phase = Phase::Idle;
            return Ok(());
        }
        self.pending = self.round.len();
        for j in 0..self.round.len() {
            let l = &self.round[j];
            let spec = TxSpec {
                kind: FrameKind::Data,
                beam: Beam::ApSector { ap: l.ap, sector: l.sector },
                dst: Endpoint::Ue(l.ue),
                duration: self.c.data_duration(&l.packets, &l.mcs),
                threshold_db: Some(l.mcs.min_snr_db),
            };
            self.put(spec, OnAir::Data(j))?;
        }
        Ok(())
    }

    fn resolve(&mut self, j: usize, ok: bool) {
        let packets = core::mem::take(&mut self.round[j].packets);
        let mut got = core::mem::take(&mut self.round[j].got);
        let (ap, ue) = (self.round[j].ap, self.round[j].ue);
        if !ok {
            got.fill(false);
        }
        if self.c.settle(ue, packets, &got) == 0 {
            self.c.wired(FrameKind::Bli, Endpoint::Ap(ap), Endpoint::Controller);
            self.blocked.insert((ap, ue));
            self.handshaken.remove(&(ap, ue));
        }
    }

    fn next_ack(&mut self, j: usize) -> Result<()> {
        let now = self.c.now();
        if j + 1 < self.round.len() {
            self.c.schedule(now + self.c.t.sifs, Ev::Ack(j + 1))
        } else {
            self.round.clear();
            self.c.schedule(now + self.c.t.sifs, Ev::Round)
        }
    }
}
