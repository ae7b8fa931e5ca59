//! Dual-band coordination: 5 GHz fingerprints pick the AP and its candidate
//! beams, a NAV on 5 GHz protects the short 60 GHz refinement, and a BID
//! announces the beam so other links keep clear of it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::csma::Expiry;
use super::engine::{control, Core, Sensing};
use super::event::{ns_to_secs, SimTime};
use super::frame::{Band, Endpoint, FrameKind, Outcome};
use super::medium::{Beam, TxSpec};
use super::metrics::Protocol;
use super::scenario::Scenario;
use super::traffic::Packet;
use super::{Learned, RunOptions, RunOutput};
use crate::coordination::{brp_refine, eliminated_beams, refine_bad_beams_on_bid, select_ap, BeamPlan, OnlineFingerprint};
use crate::error::{Error, Result};
use crate::radio::{wifi_rss_dbm, McsEntry, ShadowingField};
use crate::rng::substream;

enum Ev {
    Backoff(Expiry),
    /// 60 GHz channel access at the start of a TXOP.
    Cca(Expiry),
    WifiEnd(u64),
    MmwEnd(u64),
    MResp(usize),
    Switched(usize),
    Probe(usize),
    Fbk(usize),
    Data(usize),
    Ack(usize),
    AckTimeout(usize),
    NavClear(usize),
    Wake(u64),
}

#[derive(Clone, Copy)]
enum WTag {
    MReq(usize),
    MResp(usize),
    Nav(usize),
    Bid(usize),
}

#[derive(Clone, Copy)]
enum MTag {
    Probe(usize),
    Fbk(usize),
    Data(usize),
    Ack(usize),
}

enum St {
    Idle,
    Measure { ue: usize },
    Switching { ue: usize, fp: Vec<f64> },
    Nav { ue: usize },
    Brp { ue: usize, probes: Vec<u16>, k: usize, beam: u16, mcs: Option<McsEntry> },
    Bid { ue: usize, beam: u16, mcs: McsEntry },
    Serving { ue: usize, beam: u16, mcs: McsEntry, until: SimTime, packets: Vec<Packet>, got: Vec<bool> },
}

impl St {
    fn ue(&self) -> Option<usize> {
        match self {
            St::Idle => None,
            St::Measure { ue }
            | St::Switching { ue, .. }
            | St::Nav { ue }
            | St::Brp { ue, .. }
            | St::Bid { ue, .. }
            | St::Serving { ue, .. } => Some(*ue),
        }
    }
}

struct Sim<'s, 'l> {
    c: Core<'s, Ev>,
    learned: &'l Learned,
    shadowing: ShadowingField,
    noise_rng: ChaCha8Rng,
    st: Vec<St>,
    cw: Vec<u32>,
    owner: Vec<Option<usize>>,
    plans: Vec<BeamPlan>,
    /// Owner and end of the NAV currently set on 5 GHz.
    nav: Option<(usize, SimTime)>,
    wake_gen: u64,
    wifi_air: BTreeMap<u64, WTag>,
    mmw_air: BTreeMap<u64, MTag>,
    cca: Sensing,
}

pub(super) fn run(sc: &Scenario, learned: &Learned, opts: &RunOptions) -> Result<RunOutput> {
    if learned.db.num_aps() != sc.env.aps.len() {
        return Err(Error::Config(alloc::format!(
            "learned databases cover {} APs, scenario has {}",
            learned.db.num_aps(),
            sc.env.aps.len()
        )));
    }
    let c = Core::new(sc, Protocol::Dualband, opts, Some(Band::Wifi5), Ev::Backoff)?;
    let n_aps = c.n_aps();
    let n_ues = c.n_ues();
    let mut sim = Sim {
        learned,
        shadowing: sc.radio.shadowing(sc.seed),
        noise_rng: substream(sc.seed, "noise", 0),
        st: (0..n_aps).map(|_| St::Idle).collect(),
        cw: vec![sc.mac.cw_min; n_aps],
        owner: vec![None; n_ues],
        plans: Vec::new(),
        nav: None,
        wake_gen: 0,
        wifi_air: BTreeMap::new(),
        mmw_air: BTreeMap::new(),
        cca: Sensing::new(n_aps, c.t.slot, sc.mac.cs_threshold_dbm),
        c,
    };
    sim.dispatch()?;
    while let Some((_, ev)) = sim.c.q.pop_until(sim.c.horizon) {
        sim.handle(ev)?;
    }
    sim.c.m.dti_time_s = sc.horizon_s;
    let held = sim
        .st
        .iter()
        .map(|s| match s {
            St::Serving { packets, .. } => packets.len() as u64,
            _ => 0,
        })
        .sum();
    Ok(sim.c.finalize(held))
}

impl Sim<'_, '_> {
    fn handle(&mut self, ev: Ev) -> Result<()> {
        let now = self.c.now();
        let t = self.c.t;
        match ev {
            Ev::Backoff(e) => {
                if self.c.csma.fire(e.key, e.gen) {
                    self.on_backoff(e.key)?;
                }
            }
            Ev::Cca(e) => {
                if self.cca.cs[e.key].fire(e.key, e.gen) {
                    if let St::Serving { until, .. } = &mut self.st[e.key] {
                        *until = now + t.txop;
                    }
                    self.data(e.key)?;
                }
            }
            Ev::WifiEnd(id) => {
                let ok = self.c.finish_wifi(id)?.outcome == Outcome::Success;
                match self.wifi_air.remove(&id).expect("tracked frame") {
                    WTag::MReq(a) if ok => self.c.schedule(now + t.wifi_sifs, Ev::MResp(a))?,
                    WTag::MResp(a) if ok => self.measured(a)?,
                    WTag::Nav(a) if ok => self.nav_set(a)?,
                    WTag::MReq(a) | WTag::MResp(a) | WTag::Nav(a) => self.retry(a, t.wifi_difs)?,
                    WTag::Bid(a) if ok => self.bid_done(a)?,
                    WTag::Bid(a) => self.retry(a, t.wifi_pifs)?,
                }
            }
            Ev::MmwEnd(id) => {
                let f = self.c.finish_mmw(id)?;
                self.sense()?;
                let ok = f.outcome == Outcome::Success;
                match self.mmw_air.remove(&id).expect("tracked frame") {
                    MTag::Probe(a) => self.c.schedule(now, Ev::Probe(a))?,
                    MTag::Fbk(a) => self.fbk_done(a, ok)?,
                    MTag::Data(a) => {
                        if let St::Serving { packets, got, .. } = &mut self.st[a] {
                            *got = self.c.survivors(&f, packets.len());
                        }
                        self.c.schedule(now + t.sifs, Ev::Ack(a))?;
                    }
                    MTag::Ack(a) => self.resolve(a, ok)?,
                }
            }
            Ev::MResp(a) => {
                let ue = self.st[a].ue().expect("measuring");
                let (id, end) = self.c.start_wifi(FrameKind::WifiMResp, Endpoint::Ue(ue), Endpoint::Broadcast);
                self.wifi_air.insert(id, WTag::MResp(a));
                self.c.schedule(end, Ev::WifiEnd(id))?;
            }
            Ev::Switched(a) => self.switched(a)?,
            Ev::Probe(a) => self.probe(a)?,
            Ev::Fbk(a) => {
                let ue = self.st[a].ue().expect("refining");
                let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
                self.put(control(FrameKind::Fbk, Beam::UeToward { ue, ap: a }, Endpoint::Ap(a), t.ctrl, mcs0), MTag::Fbk(a))?;
            }
            Ev::Data(a) => self.data(a)?,
            Ev::Ack(a) => {
                let St::Serving { ue, ref got, .. } = self.st[a] else { unreachable!("ACK outside a session") };
                if got.iter().any(|&g| g) {
                    let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
                    self.put(control(FrameKind::Ack, Beam::UeToward { ue, ap: a }, Endpoint::Ap(a), t.ctrl, mcs0), MTag::Ack(a))?;
                } else {
                    self.c.schedule(now + t.ctrl, Ev::AckTimeout(a))?;
                }
            }
            Ev::AckTimeout(a) => self.resolve(a, false)?,
            Ev::NavClear(a) => {
                if matches!(self.st[a], St::Nav { .. }) {
                    let (cw, difs) = (self.cw[a], t.wifi_difs);
                    self.c.contend(a, cw, difs)?;
                }
            }
            Ev::Wake(gen) => {
                if gen == self.wake_gen {
                    self.dispatch()?;
                }
            }
        }
        Ok(())
    }

    fn put(&mut self, spec: TxSpec, tag: MTag) -> Result<()> {
        let end = self.c.now() + spec.duration;
        let id = self.c.start_mmw(spec);
        self.mmw_air.insert(id, tag);
        self.c.schedule(end, Ev::MmwEnd(id))?;
        self.sense()
    }

    fn sense(&mut self) -> Result<()> {
        let now = self.c.now();
        for e in self.cca.update(&self.c.mmw, &self.c.gains, now) {
            self.c.schedule(e.at, Ev::Cca(e))?;
        }
        Ok(())
    }

    fn send_wifi(&mut self, kind: FrameKind, src: Endpoint, tag: WTag, dst: Endpoint) -> Result<()> {
        let (id, end) = self.c.start_wifi(kind, src, dst);
        self.wifi_air.insert(id, tag);
        self.c.schedule(end, Ev::WifiEnd(id))
    }

    /// Pairs waiting UEs, oldest head packet first, with idle APs.
    fn dispatch(&mut self) -> Result<()> {
        let now = self.c.now();
        let mut waiting: Vec<(SimTime, usize)> = (0..self.c.n_ues())
            .filter(|&u| self.owner[u].is_none())
            .filter_map(|u| self.c.ues[u].head_arrival(now).map(|h| (h, u)))
            .collect();
        waiting.sort_unstable();
        for (_, u) in waiting {
            let Some(a) = self.st.iter().position(|s| matches!(s, St::Idle)) else { break };
            self.st[a] = St::Measure { ue: u };
            self.owner[u] = Some(a);
            let (cw, difs) = (self.cw[a], self.c.t.wifi_difs);
            self.c.contend(a, cw, difs)?;
        }
        let next = (0..self.c.n_ues())
            .filter(|&u| self.owner[u].is_none() && !self.c.ues[u].has_backlog(now))
            .map(|u| self.c.ues[u].next_arrival())
            .min()
            .unwrap_or(SimTime::MAX);
        if next <= self.c.horizon {
            self.wake_gen += 1;
            self.c.schedule(next, Ev::Wake(self.wake_gen))?;
        }
        Ok(())
    }

    fn on_backoff(&mut self, a: usize) -> Result<()> {
        let now = self.c.now();
        match &self.st[a] {
            St::Measure { ue } => {
                let ue = *ue;
                self.send_wifi(FrameKind::WifiMReq, Endpoint::Ap(a), WTag::MReq(a), Endpoint::Ue(ue))
            }
            St::Nav { .. } => match self.nav {
                Some((o, until)) if o != a && until > now => self.c.schedule(until, Ev::NavClear(a)),
                _ => self.send_wifi(FrameKind::NavSet, Endpoint::Ap(a), WTag::Nav(a), Endpoint::Broadcast),
            },
            St::Bid { .. } => self.send_wifi(FrameKind::Bid, Endpoint::Ap(a), WTag::Bid(a), Endpoint::Broadcast),
            _ => Ok(()),
        }
    }

    fn retry(&mut self, a: usize, aifs: SimTime) -> Result<()> {
        self.cw[a] = self.c.next_cw(self.cw[a]);
        let cw = self.cw[a];
        self.c.contend(a, cw, aifs)
    }

    /// M-Resp heard: build the online fingerprint and pick the serving AP.
    fn measured(&mut self, a: usize) -> Result<()> {
        let ue = self.st[a].ue().expect("measuring");
        let sc = self.c.sc;
        let pos = sc.env.ues[ue];
        let sigma = sc.learning.measurement_noise_db;
        let mut rss = Vec::with_capacity(sc.env.aps.len());
        for ap in &sc.env.aps {
            let mut r = wifi_rss_dbm(ap, pos, &sc.radio, Some(&self.shadowing))?;
            if sigma > 0.0 {
                let n = Normal::new(0.0, sigma).map_err(|e| Error::Config(alloc::format!("measurement noise: {e}")))?;
                r += n.sample(&mut self.noise_rng);
            }
            rss.push(r);
        }
        let fp = OnlineFingerprint { ue_id: ue, rss, timestamp_s: ns_to_secs(self.c.now()) };
        let busy: BTreeSet<usize> =
            (0..self.st.len()).filter(|&n| n != a && !matches!(self.st[n], St::Idle)).collect();
        self.cw[a] = sc.mac.cw_min;
        match select_ap(&fp, &self.learned.catalog, &busy, sc.learning.selection_gate_db2) {
            Some(n) => {
                self.st[a] = St::Idle;
                self.st[n] = St::Switching { ue, fp: fp.rss };
                self.owner[ue] = Some(n);
                let at = self.c.wired(FrameKind::SwitchOn, Endpoint::Controller, Endpoint::Ap(n));
                self.c.schedule(at, Ev::Switched(n))?;
            }
            None => {
                self.c.fail_head(ue);
                self.st[a] = St::Idle;
                self.owner[ue] = None;
            }
        }
        self.dispatch()
    }

    fn switched(&mut self, n: usize) -> Result<()> {
        let St::Switching { ue, fp } = core::mem::replace(&mut self.st[n], St::Idle) else {
            unreachable!("switch-on without a selection")
        };
        let sc = self.c.sc;
        let l = self.learned;
        match BeamPlan::compute(n, ue, &fp, &l.catalog, &l.db, &sc.radio, sc.learning.num_best_beams) {
            Ok(plan) => {
                self.plans.push(plan);
                self.st[n] = St::Nav { ue };
                let (cw, difs) = (self.cw[n], self.c.t.wifi_difs);
                self.c.contend(n, cw, difs)
            }
            Err(Error::Coverage { .. }) => {
                self.c.fail_head(ue);
                self.owner[ue] = None;
                self.dispatch()
            }
            Err(e) => Err(e),
        }
    }

    /// NAVset went out: reserve the refinement window and start probing.
    fn nav_set(&mut self, a: usize) -> Result<()> {
        let now = self.c.now();
        let t = self.c.t;
        let ue = self.st[a].ue().expect("reserving");
        let sc = self.c.sc;
        let best = self.plans.iter().find(|p| p.ap_id == a).expect("plan of the reserving AP").best_beams.clone();
        let elim = eliminated_beams(self.plans.iter(), a);
        let r = brp_refine(&sc.env.aps[a], &best, &elim, sc.env.ues[ue], &sc.radio)?;
        if r.fell_back {
            self.c.m.brp_fallbacks += 1;
        }
        let probes: Vec<u16> = if r.fell_back { best } else { best.into_iter().filter(|b| !elim.contains(b)).collect() };
        let window = t.sifs + probes.len() as SimTime * t.brp_slot + t.sifs + t.ctrl + t.wifi_pifs + t.wifi_ctrl;
        self.nav = Some((a, now + window));
        let mcs = sc.radio.mcs.for_snr(r.rx_power_dbm - sc.radio.noise_dbm()).copied();
        self.st[a] = St::Brp { ue, probes, k: 0, beam: r.beam, mcs };
        self.cw[a] = sc.mac.cw_min;
        self.c.schedule(now + t.sifs, Ev::Probe(a))
    }

    fn probe(&mut self, a: usize) -> Result<()> {
        let now = self.c.now();
        let brp_slot = self.c.t.brp_slot;
        let St::Brp { ue, probes, k, .. } = &mut self.st[a] else { unreachable!("probe outside refinement") };
        let Some(&sector) = probes.get(*k) else {
            return self.c.schedule(now + self.c.t.sifs, Ev::Fbk(a));
        };
        *k += 1;
        let spec = TxSpec {
            kind: FrameKind::Brp,
            beam: Beam::ApSector { ap: a, sector },
            dst: Endpoint::Ue(*ue),
            duration: brp_slot,
            threshold_db: None,
        };
        self.put(spec, MTag::Probe(a))
    }

    fn fbk_done(&mut self, a: usize, ok: bool) -> Result<()> {
        let St::Brp { ue, beam, mcs, .. } = self.st[a] else { unreachable!("feedback outside refinement") };
        match (ok, mcs) {
            (true, Some(mcs)) => {
                self.st[a] = St::Bid { ue, beam, mcs };
                let pifs = self.c.t.wifi_pifs;
                let e = self.c.csma.join(a, 0, pifs, self.c.now());
                self.c.post_expiry(e)
            }
            _ => {
                self.c.fail_head(ue);
                self.release(a)
            }
        }
    }

    fn bid_done(&mut self, a: usize) -> Result<()> {
        let St::Bid { ue, beam, mcs } = self.st[a] else { unreachable!("BID outside refinement") };
        refine_bad_beams_on_bid(&mut self.plans, a, ue, beam)?;
        self.cw[a] = self.c.sc.mac.cw_min;
        // The TXOP clock starts once the 60 GHz channel is won.
        self.st[a] = St::Serving { ue, beam, mcs, until: SimTime::MAX, packets: Vec::new(), got: Vec::new() };
        let now = self.c.now();
        let (cw, difs) = (self.c.sc.mac.cw_min, self.c.t.difs);
        let e = self.cca.cs[a].join_random(a, cw, difs, now, &mut self.c.rng);
        match e {
            Some(e) => self.c.schedule(e.at, Ev::Cca(e)),
            None => Ok(()),
        }
    }

    fn data(&mut self, a: usize) -> Result<()> {
        let now = self.c.now();
        let t = self.c.t;
        let St::Serving { ue, beam, mcs, until, .. } = self.st[a] else { unreachable!("DATA outside a session") };
        let budget = until.saturating_sub(now + t.sifs + t.ctrl);
        let k = self.c.packets_fitting(&mcs, budget);
        if k == 0 || !self.c.ues[ue].has_backlog(now) {
            return self.release(a);
        }
        let packets = self.c.ues[ue].take(now, k);
        let spec = TxSpec {
            kind: FrameKind::Data,
            beam: Beam::ApSector { ap: a, sector: beam },
            dst: Endpoint::Ue(ue),
            duration: self.c.data_duration(&packets, &mcs),
            threshold_db: Some(mcs.min_snr_db),
        };
        if let St::Serving { packets: p, .. } = &mut self.st[a] {
            *p = packets;
        }
        self.put(spec, MTag::Data(a))
    }

    fn resolve(&mut self, a: usize, ok: bool) -> Result<()> {
        let St::Serving { ue, packets, got, .. } = &mut self.st[a] else { unreachable!("ACK outside a session") };
        let (ue, packets, mut got) = (*ue, core::mem::take(packets), core::mem::take(got));
        if !ok {
            got.fill(false);
        }
        if self.c.settle(ue, packets, &got) == 0 {
            // Nothing came through: the plan no longer holds, re-coordinate.
            return self.release(a);
        }
        let at = self.c.now() + self.c.t.sifs;
        self.c.schedule(at, Ev::Data(a))
    }

    fn release(&mut self, a: usize) -> Result<()> {
        if let Some(ue) = self.st[a].ue() {
            self.owner[ue] = None;
        }
        self.st[a] = St::Idle;
        self.cca.cs[a].leave(a);
        self.plans.retain(|p| p.ap_id != a);
        self.dispatch()
    }
}
