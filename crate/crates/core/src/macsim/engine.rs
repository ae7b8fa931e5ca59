//! State shared by the three protocol state machines: clock, channels,
//! queues, metrics and trace.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::csma::{Csma, Expiry};
use super::event::{ns_to_secs, EventQueue, SimTime};
use super::frame::{Band, Endpoint, FrameKind, Outcome, TraceRecord};
use super::medium::{Beam, Blockage, Finished, Gains, Mmw, TxSpec, Wifi};
use super::metrics::{MetricsRecord, Protocol};
use super::scenario::{Scenario, Timing};
use super::traffic::{Packet, PoissonArrivals, UeQueue};
use super::{RunOptions, RunOutput};
use crate::error::Result;
use crate::math::ceil;
use crate::radio::{db_to_linear, McsEntry};
use crate::rng::substream;

pub(crate) struct Core<'s, E> {
    pub sc: &'s Scenario,
    pub t: Timing,
    pub q: EventQueue<E>,
    pub gains: Gains,
    pub mmw: Mmw,
    pub wifi: Wifi,
    wifi_frames: BTreeMap<u64, TraceRecord>,
    pub blockage: Blockage,
    pub ues: Vec<UeQueue>,
    pub m: MetricsRecord,
    trace: Option<Vec<TraceRecord>>,
    pub horizon: SimTime,
    pub rng: ChaCha8Rng,
    /// Band whose busy/idle transitions drive `csma`, if any.
    csma_band: Option<Band>,
    pub csma: Csma,
    backoff_event: fn(Expiry) -> E,
}

impl<'s, E> Core<'s, E> {
    pub fn new(
        sc: &'s Scenario,
        protocol: Protocol,
        opts: &RunOptions,
        csma_band: Option<Band>,
        backoff_event: fn(Expiry) -> E,
    ) -> Result<Self> {
        sc.validate()?;
        let t = sc.mac.timing();
        let gains = Gains::new(&sc.env, &sc.radio)?;
        let ues = (0..sc.env.ues.len())
            .map(|u| {
                let rng = substream(sc.seed, "arrivals", u as u64);
                PoissonArrivals::new(sc.traffic.offered_load_bps, sc.traffic.packet_bits, rng)
                    .map(|a| UeQueue::new(u, sc.traffic.packet_bits, a))
            })
            .collect::<Result<Vec<_>>>()?;
        let slot = if csma_band == Some(Band::Wifi5) { t.wifi_slot } else { t.slot };
        Ok(Self {
            sc,
            t,
            q: EventQueue::new(),
            gains,
            mmw: Mmw::default(),
            wifi: Wifi::default(),
            wifi_frames: BTreeMap::new(),
            blockage: Blockage::new(sc.radio.blockage, substream_seed(sc.seed), sc.env.aps.len(), sc.env.ues.len()),
            ues,
            m: MetricsRecord::new(protocol, sc.horizon_s),
            trace: opts.trace.then(Vec::new),
            horizon: sc.horizon_ns(),
            rng: substream(sc.seed, "backoff", 0),
            csma_band,
            csma: Csma::new(slot),
            backoff_event,
        })
    }

    pub fn now(&self) -> SimTime {
        self.q.now()
    }

    pub fn n_aps(&self) -> usize {
        self.sc.env.aps.len()
    }

    pub fn n_ues(&self) -> usize {
        self.sc.env.ues.len()
    }

    pub fn record(&mut self, rec: TraceRecord) {
        if let Some(t) = self.trace.as_mut() {
            t.push(rec);
        }
    }

    /// Logs a fronthaul message and returns its arrival time.
    pub fn wired(&mut self, kind: FrameKind, src: Endpoint, dst: Endpoint) -> SimTime {
        let now = self.now();
        self.record(TraceRecord {
            start_ns: now,
            kind,
            band: Band::Wired,
            src,
            dst,
            sector: None,
            duration_ns: self.t.wired,
            outcome: Outcome::Success,
        });
        now + self.t.wired
    }

    pub fn schedule(&mut self, at: SimTime, e: E) -> Result<()> {
        self.q.schedule(at, e)
    }

    pub fn post_expiry(&mut self, e: Option<Expiry>) -> Result<()> {
        if let Some(e) = e {
            let ev = (self.backoff_event)(e);
            self.q.schedule(e.at, ev)?;
        }
        Ok(())
    }

    /// Puts a 60 GHz frame on the air; the caller schedules its end.
    pub fn start_mmw(&mut self, spec: TxSpec) -> u64 {
        let now = self.now();
        let blocked = match (spec.beam.src(), spec.dst) {
            (Endpoint::Ap(a), Endpoint::Ue(u)) | (Endpoint::Ue(u), Endpoint::Ap(a)) if spec.threshold_db.is_some() => {
                self.blockage.blocked_during(a, u, now, now + spec.duration)
            }
            _ => false,
        };
        let was_busy = self.mmw.busy();
        let id = self.mmw.start(&self.gains, spec, now, blocked);
        if !was_busy && self.csma_band == Some(Band::Mmw60) {
            self.csma.on_busy(now);
        }
        id
    }

    pub fn finish_mmw(&mut self, id: u64) -> Result<Finished> {
        let now = self.now();
        let f = self.mmw.finish(&self.gains, id, now);
        self.record(f.trace());
        match f.outcome {
            Outcome::Collision => {
                self.m.collision_count += 1;
                if f.spec.kind == FrameKind::Data && f.beam_interference {
                    self.m.beam_interference_losses += 1;
                }
            }
            Outcome::Blocked => self.m.blocked_count += 1,
            _ => {}
        }
        if !self.mmw.busy() && self.csma_band == Some(Band::Mmw60) {
            self.resume_csma()?;
        }
        Ok(f)
    }

    pub fn start_wifi(&mut self, kind: FrameKind, src: Endpoint, dst: Endpoint) -> (u64, SimTime) {
        let now = self.now();
        let was_busy = self.wifi.busy();
        let id = self.wifi.start();
        let duration = self.t.wifi_ctrl;
        self.wifi_frames.insert(
            id,
            TraceRecord { start_ns: now, kind, band: Band::Wifi5, src, dst, sector: None, duration_ns: duration, outcome: Outcome::Sent },
        );
        if !was_busy && self.csma_band == Some(Band::Wifi5) {
            self.csma.on_busy(now);
        }
        (id, now + duration)
    }

    /// Ends a 5 GHz frame; returns its trace record with the outcome.
    pub fn finish_wifi(&mut self, id: u64) -> Result<TraceRecord> {
        let ok = self.wifi.finish(id);
        let mut rec = self.wifi_frames.remove(&id).expect("wifi frame was started");
        rec.outcome = match (ok, rec.dst) {
            (true, _) => Outcome::Success,
            (false, _) => Outcome::Collision,
        };
        if !ok {
            self.m.collision_count += 1;
        }
        self.record(rec);
        if !self.wifi.busy() && self.csma_band == Some(Band::Wifi5) {
            self.resume_csma()?;
        }
        Ok(rec)
    }

    fn resume_csma(&mut self) -> Result<()> {
        let now = self.now();
        for e in self.csma.on_idle(now) {
            self.post_expiry(Some(e))?;
        }
        Ok(())
    }

    /// Contends with a random backoff drawn from `[0, cw)`.
    pub fn contend(&mut self, key: usize, cw: u32, aifs: SimTime) -> Result<()> {
        let now = self.now();
        let e = self.csma.join_random(key, cw, aifs, now, &mut self.rng);
        self.post_expiry(e)
    }

    pub fn next_cw(&self, cw: u32) -> u32 {
        (cw.saturating_mul(2)).min(self.sc.mac.cw_max)
    }

    /// Airtime of an aggregate of `packets` at the given MCS.
    pub fn data_duration(&self, packets: &[Packet], mcs: &McsEntry) -> SimTime {
        let bits: u64 = packets.iter().map(|p| u64::from(p.size_bits)).sum();
        self.t.preamble + ceil(bits as f64 * 1e3 / mcs.phy_rate_mbps) as SimTime
    }

    /// Which packets of an aggregate came through: a packet is lost when any
    /// undecodable stretch touches the preamble or its own slice of airtime.
    pub fn survivors(&self, f: &Finished, packets: usize) -> Vec<bool> {
        if f.outcome == Outcome::Blocked {
            return vec![false; packets];
        }
        let body_start = f.start + self.t.preamble.min(f.spec.duration);
        let body = f.start + f.spec.duration - body_start;
        let hit = |from: SimTime, to: SimTime| f.lost.iter().any(|&(s, e)| s < to && e > from);
        if hit(f.start, body_start) {
            return vec![false; packets];
        }
        let n = packets as SimTime;
        (0..n).map(|i| !hit(body_start + body * i / n, body_start + body * (i + 1) / n)).collect()
    }

    /// Largest aggregate (up to the configured cap) whose airtime fits `budget`.
    pub fn packets_fitting(&self, mcs: &McsEntry, budget: SimTime) -> usize {
        if budget <= self.t.preamble {
            return 0;
        }
        let per_packet = f64::from(self.sc.traffic.packet_bits) * 1e3 / mcs.phy_rate_mbps;
        let n = ((budget - self.t.preamble) as f64 / ceil(per_packet).max(1.0)) as usize;
        n.min(self.sc.mac.max_aggregated_packets)
    }

    pub fn deliver(&mut self, packets: Vec<Packet>) {
        let now = self.now();
        for p in packets {
            self.m.delivered += 1;
            self.m.delivered_bits += u64::from(p.size_bits);
            self.m.sum_delay_s += ns_to_secs(now - p.arrival_ns);
        }
    }

    /// Delivers the packets flagged in `ok` and fails the rest; returns how
    /// many got through.
    pub fn settle(&mut self, ue: usize, packets: Vec<Packet>, ok: &[bool]) -> usize {
        let (mut good, mut bad) = (Vec::new(), Vec::new());
        for (p, &k) in packets.into_iter().zip(ok) {
            if k {
                good.push(p);
            } else {
                bad.push(p);
            }
        }
        let n = good.len();
        self.deliver(good);
        if !bad.is_empty() {
            self.fail(ue, bad);
        }
        n
    }

    /// Counts a failed attempt on every packet; drops the exhausted ones and
    /// returns the rest to the head of the UE queue.
    pub fn fail(&mut self, ue: usize, packets: Vec<Packet>) {
        let max = self.sc.mac.max_retx;
        let mut keep = Vec::with_capacity(packets.len());
        for mut p in packets {
            if p.retx_count >= max {
                self.m.dropped += 1;
            } else {
                p.retx_count += 1;
                keep.push(p);
            }
        }
        self.ues[ue].requeue(keep);
    }

    /// Counts a failed attempt on the head packet of `ue`.
    pub fn fail_head(&mut self, ue: usize) {
        let now = self.now();
        if self.ues[ue].bump_head(now, self.sc.mac.max_retx).is_some() {
            self.m.dropped += 1;
        }
    }

    /// Closes the books at the horizon; `held` counts packets inside frames
    /// that had not finished.
    pub fn finalize(mut self, held: u64) -> RunOutput {
        let h = self.horizon;
        self.m.generated = self.ues.iter().map(|q| q.generated() + q.undrawn_at(h)).sum();
        self.m.in_flight = held + self.ues.iter().map(|q| q.pending_at(h)).sum::<u64>();
        let mut trace = self.trace.take().unwrap_or_default();
        trace.sort_by_key(|r| r.start_ns);
        RunOutput { metrics: self.m, trace }
    }
}

fn substream_seed(seed: u64) -> u64 {
    crate::rng::derive_seed(seed, "blockage", 0)
}

/// Base 60 GHz frame spec for control traffic judged at the MCS 0 threshold.
pub(crate) fn control(kind: FrameKind, beam: Beam, dst: Endpoint, duration: SimTime, mcs0: f64) -> TxSpec {
    TxSpec { kind, beam, dst, duration, threshold_db: Some(mcs0) }
}


/// Per-AP 60 GHz clear channel assessment: each AP runs its own backoff and
/// freezes it while the energy it hears is above the threshold.
pub(crate) struct Sensing {
    pub cs: Vec<Csma>,
    busy: Vec<bool>,
    threshold_mw: f64,
}

impl Sensing {
    pub fn new(n_aps: usize, slot: SimTime, threshold_dbm: f64) -> Self {
        Self { cs: vec![Csma::new(slot); n_aps], busy: vec![false; n_aps], threshold_mw: db_to_linear(threshold_dbm) }
    }

    /// Re-reads the channel at every AP; returns the backoffs that resumed.
    pub fn update(&mut self, mmw: &Mmw, gains: &Gains, now: SimTime) -> Vec<Expiry> {
        let mut out = Vec::new();
        for a in 0..self.cs.len() {
            let busy = mmw.sensed_mw(gains, a) >= self.threshold_mw;
            if busy == self.busy[a] {
                continue;
            }
            self.busy[a] = busy;
            if busy {
                self.cs[a].on_busy(now);
            } else {
                out.extend(self.cs[a].on_idle(now));
            }
        }
        out
    }
}
