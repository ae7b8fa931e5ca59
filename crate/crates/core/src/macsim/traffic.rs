//! Poisson downlink traffic and per-UE packet queues.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::event::{SimTime, NS_PER_S};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub ue_id: usize,
    pub size_bits: u32,
    pub arrival_ns: SimTime,
    pub retx_count: u8,
}

/// Exponential inter-arrival stream with mean `packet_bits / rate_bps`.
#[derive(Debug, Clone)]
pub struct PoissonArrivals {
    rng: ChaCha8Rng,
    exp: Exp<f64>,
    mean_s: f64,
    clock_s: f64,
}

impl PoissonArrivals {
    pub fn new(rate_bps: f64, packet_bits: u32, rng: ChaCha8Rng) -> Result<Self> {
        if !(rate_bps > 0.0) || packet_bits == 0 {
            return Err(Error::Config("offered load and packet size must be positive".into()));
        }
        let lambda = rate_bps / f64::from(packet_bits);
        let exp = Exp::new(lambda).map_err(|_| Error::Config("invalid arrival rate".into()))?;
        Ok(Self { rng, exp, mean_s: 1.0 / lambda, clock_s: 0.0 })
    }

    /// Mean inter-arrival time in seconds.
    pub fn mean_interval_s(&self) -> f64 {
        self.mean_s
    }
}

impl Iterator for PoissonArrivals {
    type Item = SimTime;

    fn next(&mut self) -> Option<SimTime> {
        self.clock_s += self.exp.sample(&mut self.rng);
        Some(crate::math::round(self.clock_s * NS_PER_S) as SimTime)
    }
}

/// FIFO of one UE: retries first, then fresh arrivals drawn lazily from the
/// Poisson stream as the clock passes them.
#[derive(Debug, Clone)]
pub struct UeQueue {
    ue_id: usize,
    packet_bits: u32,
    arrivals: PoissonArrivals,
    next_arrival: SimTime,
    retry: VecDeque<Packet>,
    next_id: u64,
}

impl UeQueue {
    pub fn new(ue_id: usize, packet_bits: u32, mut arrivals: PoissonArrivals) -> Self {
        let next_arrival = arrivals.next().unwrap_or(SimTime::MAX);
        Self { ue_id, packet_bits, arrivals, next_arrival, retry: VecDeque::new(), next_id: 0 }
    }

    pub fn ue_id(&self) -> usize {
        self.ue_id
    }

    pub fn next_arrival(&self) -> SimTime {
        self.next_arrival
    }

    pub fn has_backlog(&self, now: SimTime) -> bool {
        !self.retry.is_empty() || self.next_arrival <= now
    }

    /// Arrival time of the head-of-line packet, if any is waiting.
    pub fn head_arrival(&self, now: SimTime) -> Option<SimTime> {
        match self.retry.front() {
            Some(p) => Some(p.arrival_ns),
            None => (self.next_arrival <= now).then_some(self.next_arrival),
        }
    }

    /// Removes up to `max` head packets.
    pub fn take(&mut self, now: SimTime, max: usize) -> Vec<Packet> {
        let mut out = Vec::new();
        while out.len() < max {
            if let Some(p) = self.retry.pop_front() {
                out.push(p);
            } else if self.next_arrival <= now {
                out.push(self.fresh());
            } else {
                break;
            }
        }
        out
    }

    /// Marks the head packet as retried without removing it; returns it if it
    /// exceeded `max_retx` and was dropped.
    pub fn bump_head(&mut self, now: SimTime, max_retx: u8) -> Option<Packet> {
        if self.retry.is_empty() && self.next_arrival <= now {
            let p = self.fresh();
            self.retry.push_back(p);
        }
        let head = self.retry.front_mut()?;
        if head.retx_count >= max_retx {
            return self.retry.pop_front();
        }
        head.retx_count += 1;
        None
    }

    /// Returns failed packets to the head, keeping their order.
    pub fn requeue(&mut self, packets: Vec<Packet>) {
        for p in packets.into_iter().rev() {
            self.retry.push_front(p);
        }
    }

    /// Packets queued here at `horizon`, including arrivals not yet drawn.
    pub fn pending_at(&self, horizon: SimTime) -> u64 {
        self.retry.len() as u64 + self.undrawn_at(horizon)
    }

    /// Arrivals up to `horizon` that have not been handed out yet.
    pub fn undrawn_at(&self, horizon: SimTime) -> u64 {
        if self.next_arrival > horizon {
            return 0;
        }
        let mut probe = self.arrivals.clone();
        1 + probe.by_ref().take_while(|t| *t <= horizon).count() as u64
    }

    /// Packets handed out so far.
    pub fn generated(&self) -> u64 {
        self.next_id
    }

    fn fresh(&mut self) -> Packet {
        let p = Packet {
            id: self.next_id,
            ue_id: self.ue_id,
            size_bits: self.packet_bits,
            arrival_ns: self.next_arrival,
            retx_count: 0,
        };
        self.next_id += 1;
        self.next_arrival = self.arrivals.next().unwrap_or(SimTime::MAX);
        p
    }
}

/// Seeded Poisson arrival stream, `rate_bps` over `packet_bits` packets.
pub fn poisson_traffic(rate_bps: f64, packet_bits: u32, seed: u64) -> Result<PoissonArrivals> {
    PoissonArrivals::new(rate_bps, packet_bits, crate::rng::substream(seed, "arrivals", 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_interval_matches_load() {
        let n = 1_000_000;
        let last = poisson_traffic(1e9, 12_000, 11).unwrap().nth(n - 1).unwrap();
        let mean_us = last as f64 / n as f64 / 1e3;
        assert!((mean_us - 12.0).abs() / 12.0 < 0.01, "mean {mean_us} us");
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<_> = poisson_traffic(1e9, 12_000, 5).unwrap().take(100).collect();
        let b: Vec<_> = poisson_traffic(1e9, 12_000, 5).unwrap().take(100).collect();
        let c: Vec<_> = poisson_traffic(1e9, 12_000, 6).unwrap().take(100).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_zero_rate() {
        assert!(poisson_traffic(0.0, 12_000, 1).is_err());
    }

    #[test]
    fn queue_conserves_packets() {
        let mut q = UeQueue::new(0, 12_000, poisson_traffic(1e9, 12_000, 3).unwrap());
        let horizon = 1_000_000;
        let total = q.pending_at(horizon);
        let mut taken = q.take(500_000, 10);
        assert_eq!(taken.len(), 10);
        taken.truncate(4);
        q.requeue(taken);
        assert_eq!(q.pending_at(horizon) + 6, total);
        let head = q.take(500_000, 1)[0];
        assert_eq!(head.id, 0);
    }

    #[test]
    fn bump_head_drops_after_limit() {
        let mut q = UeQueue::new(0, 12_000, poisson_traffic(1e9, 12_000, 3).unwrap());
        let t = q.next_arrival();
        for _ in 0..3 {
            assert!(q.bump_head(t, 3).is_none());
        }
        let dropped = q.bump_head(t, 3).unwrap();
        assert_eq!((dropped.id, dropped.retx_count), (0, 3));
    }
}
