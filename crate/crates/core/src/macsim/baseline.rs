//! Uncoordinated access: every AP runs its own beacon header with an
//! exhaustive sector sweep, then serves its UEs with CSMA/CA on 60 GHz.
//! Each AP senses the channel on its own, so directional frames it cannot
//! hear leave it free to transmit into them.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use super::csma::Expiry;
use super::engine::{control, Core, Sensing};
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
use crate::rng::substream;

enum Ev {
    Backoff(Expiry),
    Bhi(usize),
    Sweep { ap: usize, k: usize },
    MmwEnd(u64),
    AckStart(usize),
    /// ACK timeout after a lost DATA frame.
    AckTimeout(usize),
    Wake { ap: usize, gen: u64 },
}

enum OnAir {
    Sweep { ap: usize, k: usize },
    Data(usize),
    Ack(usize),
}

#[derive(Clone, Copy)]
struct Link {
    sector: u16,
    mcs: McsEntry,
    /// Exchanges in a row that delivered nothing.
    fails: u32,
}

struct Exchange {
    ue: usize,
    packets: Vec<Packet>,
    /// Per-packet reception of the DATA aggregate.
    got: Vec<bool>,
}

struct Ap {
    ues: Vec<usize>,
    rr: usize,
    next_bhi: SimTime,
    /// A beacon header or a retraining sweep is on the air.
    in_bhi: bool,
    cw: u32,
    exchange: Option<Exchange>,
    sweep: Vec<TxSpec>,
    /// Frames of the sweep in progress.
    cur: Vec<TxSpec>,
    /// UE whose beam link must be retrained before its next exchange.
    retrain: Option<usize>,
    wake_gen: u64,
    bhi_ns: SimTime,
}

struct Sim<'s> {
    c: Core<'s, Ev>,
    aps: Vec<Ap>,
    links: Vec<Option<(usize, Link)>>,
    on_air: BTreeMap<u64, OnAir>,
    cca: Sensing,
}

pub(super) fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let mut c = Core::new(sc, Protocol::Baseline, opts, None, Ev::Backoff)?;
    let t = c.t;
    let mcs0 = sc.radio.mcs.control().min_snr_db;
    let noise = sc.radio.noise_dbm();

    // Each UE joins the AP with the strongest best sector.
    let mut links = Vec::with_capacity(c.n_ues());
    for &u in &sc.env.ues {
        let mut pick: Option<(usize, f64, Link)> = None;
        for (a, ap) in sc.env.aps.iter().enumerate() {
            let Some(b) = best_sector(ap, u, &sc.radio)? else { continue };
            let Some(mcs) = sc.radio.mcs.for_snr(b.power_dbm - noise) else { continue };
            if pick.as_ref().is_none_or(|p| b.power_dbm > p.1) {
                pick = Some((a, b.power_dbm, Link { sector: b.sector_id, mcs: *mcs, fails: 0 }));
            }
        }
        links.push(pick.map(|(a, _, l)| (a, l)));
    }

    let mut phases = substream(sc.seed, "phases", 0);
    let mut aps = Vec::with_capacity(c.n_aps());
    for (a, ap) in sc.env.aps.iter().enumerate() {
        let ues: Vec<usize> = (0..links.len()).filter(|&u| links[u].is_some_and(|l| l.0 == a)).collect();
        let mut sweep: Vec<TxSpec> = ap
            .sector_ids()
            .map(|s| TxSpec {
                kind: FrameKind::Ssw,
                beam: Beam::ApSector { ap: a, sector: s },
                dst: Endpoint::Broadcast,
                duration: t.ctrl,
                threshold_db: None,
            })
            .collect();
        for &u in &ues {
            for _ in 0..sc.mac.responder_sweep_frames {
                sweep.push(TxSpec {
                    kind: FrameKind::Ssw,
                    beam: Beam::UeOmni { ue: u },
                    dst: Endpoint::Ap(a),
                    duration: t.ctrl,
                    threshold_db: None,
                });
            }
            let sector = links[u].expect("associated").1.sector;
            sweep.push(control(FrameKind::SswFeedback, Beam::ApSector { ap: a, sector }, Endpoint::Ue(u), t.ctrl, mcs0));
        }
        let phase = phases.random_range(0..t.beacon_interval);
        c.schedule(phase, Ev::Bhi(a))?;
        aps.push(Ap {
            ues,
            rr: 0,
            next_bhi: phase,
            in_bhi: false,
            cw: sc.mac.cw_min,
            exchange: None,
            sweep,
            cur: Vec::new(),
            retrain: None,
            wake_gen: 0,
            bhi_ns: 0,
        });
    }

    let cca = Sensing::new(aps.len(), t.slot, sc.mac.cs_threshold_dbm);
    let mut sim = Sim { c, aps, links, on_air: BTreeMap::new(), cca };
    while let Some((_, ev)) = sim.c.q.pop_until(sim.c.horizon) {
        sim.handle(ev)?;
    }
    let bhi: SimTime = sim.aps.iter().map(|a| a.bhi_ns).sum();
    let n = sim.aps.len().max(1) as f64;
    sim.c.m.bhi_overhead_fraction = ns_to_secs(bhi) / n / sc.horizon_s;
    sim.c.m.dti_time_s = sc.horizon_s - ns_to_secs(bhi) / n;
    let held = sim.aps.iter().filter_map(|a| a.exchange.as_ref()).map(|e| e.packets.len() as u64).sum();
    Ok(sim.c.finalize(held))
}

impl Sim<'_> {
    fn handle(&mut self, ev: Ev) -> Result<()> {
        let now = self.c.now();
        match ev {
            Ev::Bhi(a) => {
                let ap = &mut self.aps[a];
                debug_assert!(ap.exchange.is_none());
                ap.in_bhi = true;
                ap.retrain = None;
                ap.cur = ap.sweep.clone();
                ap.next_bhi = now + self.c.t.beacon_interval;
                let len: SimTime =
                    ap.sweep.iter().map(|s| s.duration).sum::<SimTime>() + self.c.t.sbifs * (ap.sweep.len() as SimTime - 1);
                ap.bhi_ns += len.min(self.c.horizon - now);
                self.cca.cs[a].leave(a);
                let next = ap.next_bhi;
                self.c.schedule(next, Ev::Bhi(a))?;
                self.sweep(a, 0)?;
            }
            Ev::Sweep { ap, k } => self.sweep(ap, k)?,
            Ev::MmwEnd(id) => {
                let f = self.c.finish_mmw(id)?;
                self.sense()?;
                match self.on_air.remove(&id).expect("tracked frame") {
                    OnAir::Sweep { ap, k } => {
                        if k + 1 < self.aps[ap].cur.len() {
                            self.c.schedule(now + self.c.t.sbifs, Ev::Sweep { ap, k: k + 1 })?;
                        } else {
                            self.aps[ap].in_bhi = false;
                            self.try_contend(ap)?;
                        }
                    }
                    OnAir::Data(ap) => {
                        let got = match self.aps[ap].exchange.as_ref() {
                            Some(x) => self.c.survivors(&f, x.packets.len()),
                            None => Vec::new(),
                        };
                        if let Some(x) = self.aps[ap].exchange.as_mut() {
                            x.got = got;
                        }
                        self.c.schedule(now + self.c.t.sifs, Ev::AckStart(ap))?;
                    }
                    OnAir::Ack(ap) => self.resolve(ap, f.outcome == Outcome::Success)?,
                }
            }
            Ev::AckStart(a) => {
                let x = self.aps[a].exchange.as_ref().expect("exchange in progress");
                if x.got.iter().any(|&g| g) {
                    let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
                    let spec = control(FrameKind::Ack, Beam::UeToward { ue: x.ue, ap: a }, Endpoint::Ap(a), self.c.t.ctrl, mcs0);
                    self.put(spec, OnAir::Ack(a))?;
                } else {
                    self.c.schedule(now + self.c.t.ctrl, Ev::AckTimeout(a))?;
                }
            }
            Ev::AckTimeout(a) => self.resolve(a, false)?,
            Ev::Wake { ap, gen } => {
                if self.aps[ap].wake_gen == gen {
                    self.try_contend(ap)?;
                }
            }
            Ev::Backoff(e) => {
                if self.cca.cs[e.key].fire(e.key, e.gen) {
                    self.transmit(e.key)?;
                }
            }
        }
        Ok(())
    }

    fn put(&mut self, spec: TxSpec, tag: OnAir) -> Result<()> {
        let end = self.c.now() + spec.duration;
        let id = self.c.start_mmw(spec);
        self.on_air.insert(id, tag);
        self.c.schedule(end, Ev::MmwEnd(id))?;
        self.sense()
    }

    fn sense(&mut self) -> Result<()> {
        let now = self.c.now();
        for e in self.cca.update(&self.c.mmw, &self.c.gains, now) {
            self.c.post_expiry(Some(e))?;
        }
        Ok(())
    }

    fn sweep(&mut self, ap: usize, k: usize) -> Result<()> {
        let spec = self.aps[ap].cur[k];
        self.put(spec, OnAir::Sweep { ap, k })
    }

    fn resolve(&mut self, a: usize, ok: bool) -> Result<()> {
        let mut x = self.aps[a].exchange.take().expect("exchange in progress");
        if !ok {
            x.got.fill(false);
        }
        let delivered = self.c.settle(x.ue, x.packets, &x.got) > 0;
        let limit = self.c.sc.mac.beam_failure_exchanges;
        let (_, link) = self.links[x.ue].as_mut().expect("associated");
        if delivered {
            link.fails = 0;
            self.aps[a].cw = self.c.sc.mac.cw_min;
        } else {
            link.fails += 1;
            if limit > 0 && link.fails >= limit {
                link.fails = 0;
                self.aps[a].retrain = Some(x.ue);
            }
            self.aps[a].cw = self.c.next_cw(self.aps[a].cw);
        }
        self.try_contend(a)
    }

    fn try_contend(&mut self, a: usize) -> Result<()> {
        let now = self.c.now();
        let ap = &self.aps[a];
        if ap.in_bhi || ap.exchange.is_some() || self.cca.cs[a].is_contending(a) {
            return Ok(());
        }
        if ap.ues.iter().any(|&u| self.c.ues[u].has_backlog(now)) {
            let (cw, difs) = (ap.cw, self.c.t.difs);
            let e = self.cca.cs[a].join_random(a, cw, difs, now, &mut self.c.rng);
            return self.c.post_expiry(e);
        }
        let next = ap.ues.iter().map(|&u| self.c.ues[u].next_arrival()).min().unwrap_or(SimTime::MAX);
        if next <= self.c.horizon {
            let ap = &mut self.aps[a];
            ap.wake_gen += 1;
            let gen = ap.wake_gen;
            self.c.schedule(next, Ev::Wake { ap: a, gen })?;
        }
        Ok(())
    }

    /// Backoff expired: send one aggregate to the next backlogged UE.
    fn transmit(&mut self, a: usize) -> Result<()> {
        let now = self.c.now();
        let ap = &self.aps[a];
        if ap.in_bhi {
            return Ok(());
        }
        if let Some(ue) = ap.retrain {
            return self.retrain(a, ue);
        }
        let n = ap.ues.len();
        let Some(i) = (0..n).map(|k| (ap.rr + k) % n).find(|&i| self.c.ues[ap.ues[i]].has_backlog(now)) else {
            return self.try_contend(a);
        };
        let ue = ap.ues[i];
        let link = self.links[ue].expect("associated").1;
        let tail = self.c.t.sifs + self.c.t.ctrl;
        let budget = ap.next_bhi.saturating_sub(now + tail);
        let k = self.c.packets_fitting(&link.mcs, budget);
        if k == 0 {
            // Resumes after the next beacon header.
            return Ok(());
        }
        self.aps[a].rr = (i + 1) % n;
        let packets = self.c.ues[ue].take(now, k);
        let duration = self.c.data_duration(&packets, &link.mcs);
        self.aps[a].exchange = Some(Exchange { ue, packets, got: Vec::new() });
        let spec = TxSpec {
            kind: FrameKind::Data,
            beam: Beam::ApSector { ap: a, sector: link.sector },
            dst: Endpoint::Ue(ue),
            duration,
            threshold_db: Some(link.mcs.min_snr_db),
        };
        self.put(spec, OnAir::Data(a))
    }

    /// Exhaustive sector sweep with one STA after its beam link failed.
    fn retrain(&mut self, a: usize, ue: usize) -> Result<()> {
        let now = self.c.now();
        let t = self.c.t;
        let sector = self.links[ue].expect("associated").1.sector;
        let mcs0 = self.c.sc.radio.mcs.control().min_snr_db;
        let ssw = |beam, dst| TxSpec { kind: FrameKind::Ssw, beam, dst, duration: t.ctrl, threshold_db: None };
        let mut cur: Vec<TxSpec> =
            self.c.sc.env.aps[a].sector_ids().map(|s| ssw(Beam::ApSector { ap: a, sector: s }, Endpoint::Ue(ue))).collect();
        cur.extend((0..self.c.sc.mac.responder_sweep_frames).map(|_| ssw(Beam::UeOmni { ue }, Endpoint::Ap(a))));
        cur.push(control(FrameKind::SswFeedback, Beam::ApSector { ap: a, sector }, Endpoint::Ue(ue), t.ctrl, mcs0));
        let len = cur.iter().map(|s| s.duration).sum::<SimTime>() + t.sbifs * (cur.len() as SimTime - 1);
        let ap = &mut self.aps[a];
        if now + len > ap.next_bhi {
            // The beacon header retrains every STA anyway.
            return Ok(());
        }
        ap.retrain = None;
        ap.in_bhi = true;
        ap.cur = cur;
        ap.bhi_ns += len.min(self.c.horizon - now);
        self.sweep(a, 0)
    }
}
