//! Slotted CSMA/CA backoff bookkeeping for one contention domain.
//!
//! The domain never schedules events itself: callers receive
//! `(key, expiry, generation)` triples and post them to their own queue,
//! then present them back through [`Csma::fire`], which rejects stale ones.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::event::SimTime;

#[derive(Debug, Clone, Copy)]
struct Contender {
    remaining: u64,
    aifs: SimTime,
    gen: u64,
    /// Countdown origin and expiry while the medium is idle.
    running: Option<(SimTime, SimTime)>,
}

/// Expiry to post for a contender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expiry {
    pub key: usize,
    pub at: SimTime,
    pub gen: u64,
}

#[derive(Debug, Clone)]
pub struct Csma {
    slot: SimTime,
    /// Start of the current idle period, `None` while busy.
    idle_since: Option<SimTime>,
    contenders: BTreeMap<usize, Contender>,
    next_gen: u64,
}

impl Csma {
    pub fn new(slot: SimTime) -> Self {
        Self { slot, idle_since: Some(0), contenders: BTreeMap::new(), next_gen: 0 }
    }

    pub fn is_contending(&self, key: usize) -> bool {
        self.contenders.contains_key(&key)
    }

    /// Joins with `slots` backoff slots after an idle gap of `aifs`.
    pub fn join(&mut self, key: usize, slots: u64, aifs: SimTime, now: SimTime) -> Option<Expiry> {
        let gen = self.bump();
        self.contenders.insert(key, Contender { remaining: slots, aifs, gen, running: None });
        let since = self.idle_since?;
        Some(self.run(key, since, now))
    }

    /// Draws a backoff uniformly from `[0, cw)` and joins.
    pub fn join_random(&mut self, key: usize, cw: u32, aifs: SimTime, now: SimTime, rng: &mut ChaCha8Rng) -> Option<Expiry> {
        let slots = rng.random_range(0..u64::from(cw.max(1)));
        self.join(key, slots, aifs, now)
    }

    pub fn leave(&mut self, key: usize) {
        self.contenders.remove(&key);
    }

    /// Medium turned busy at `now`. Countdowns expiring exactly now are left
    /// running: those stations transmit in the same slot and collide.
    pub fn on_busy(&mut self, now: SimTime) {
        self.idle_since = None;
        let slot = self.slot;
        let mut refreshed = Vec::new();
        for (k, c) in self.contenders.iter_mut() {
            let Some((origin, expiry)) = c.running else { continue };
            if expiry == now {
                continue;
            }
            if now > origin {
                c.remaining = c.remaining.saturating_sub((now - origin) / slot);
            }
            c.running = None;
            refreshed.push(*k);
        }
        for k in refreshed {
            let g = self.bump();
            if let Some(c) = self.contenders.get_mut(&k) {
                c.gen = g;
            }
        }
    }

    /// Medium turned idle at `now`; returns the resumed countdowns.
    pub fn on_idle(&mut self, now: SimTime) -> Vec<Expiry> {
        self.idle_since = Some(now);
        let keys: Vec<usize> =
            self.contenders.iter().filter(|(_, c)| c.running.is_none()).map(|(k, _)| *k).collect();
        keys.into_iter().map(|k| self.run(k, now, now)).collect()
    }

    /// Accepts an expiry if it is still current, removing the contender.
    pub fn fire(&mut self, key: usize, gen: u64) -> bool {
        match self.contenders.get(&key) {
            Some(c) if c.gen == gen && c.running.is_some() => {
                self.contenders.remove(&key);
                true
            }
            _ => false,
        }
    }

    fn run(&mut self, key: usize, idle_since: SimTime, now: SimTime) -> Expiry {
        let slot = self.slot;
        let c = self.contenders.get_mut(&key).expect("running a known contender");
        let base = idle_since + c.aifs;
        let origin = if now <= base { base } else { base + (now - base).div_ceil(slot) * slot };
        let at = origin + c.remaining * slot;
        c.running = Some((origin, at));
        Expiry { key, at, gen: c.gen }
    }

    fn bump(&mut self) -> u64 {
        self.next_gen += 1;
        self.next_gen
    }
}
