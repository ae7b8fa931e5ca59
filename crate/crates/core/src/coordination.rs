//! Online coordination: AP selection from a live fingerprint, best-beam
//! estimation, bad-beam candidates and beam refinement.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::environment::{ApNode, Point3};
use crate::error::{Error, Result};
use crate::learning::affinity::sq_distance;
use crate::learning::{ExemplarCatalog, ExemplarSet, FingerprintDatabases};
use crate::radio::{mcs_for_snr, rx_power_mmw, sinr_db, snr_db, McsTable, RadioConfig};

/// Default AP-selection gate on the squared fingerprint distance, dB².
pub const DEFAULT_SELECTION_GATE_DB2: f64 = 100.0;

/// A UE's 5 GHz RSS as heard by every AP.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineFingerprint {
    pub ue_id: usize,
    pub rss: Vec<f64>,
    pub timestamp_s: f64,
}

/// Smallest squared distance from `fp` to any exemplar of `sets`.
pub fn nearest_exemplar_distance(fp: &[f64], sets: &[ExemplarSet]) -> Option<f64> {
    sets.iter()
        .flat_map(|s| s.exemplars.iter())
        .map(|e| sq_distance(fp, e))
        .min_by(f64::total_cmp)
}

/// Idle AP whose nearest exemplar is closest to `fp`, within `gate_db2`.
/// Lowest AP id wins ties.
pub fn select_ap(
    fp: &OnlineFingerprint,
    catalog: &ExemplarCatalog,
    busy: &BTreeSet<usize>,
    gate_db2: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (n, sets) in catalog.per_ap.iter().enumerate() {
        if busy.contains(&n) {
            continue;
        }
        let Some(d) = nearest_exemplar_distance(&fp.rss, sets) else { continue };
        if d <= gate_db2 && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((n, d));
        }
    }
    best.map(|(n, _)| n)
}

/// Best sectors of one AP sorted by the distance from `fp` to their nearest
/// exemplar, lower sector ID first on ties, truncated to `x`.
pub fn estimate_best_beams(fp: &[f64], sets: &[ExemplarSet], x: usize) -> Result<Vec<u16>> {
    if sets.is_empty() {
        return Err(Error::Coverage { ap: usize::MAX });
    }
    let mut scored: Vec<(f64, u16)> = sets
        .iter()
        .filter_map(|s| nearest_exemplar_distance(fp, core::slice::from_ref(s)).map(|d| (d, s.sector_id)))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.dedup_by_key(|e| e.1);
    Ok(scored.into_iter().take(x).map(|(_, s)| s).collect())
}

/// Candidate bad beams of AP `m`, per beam of AP `n`.
pub type BadBeamSets = BTreeMap<u16, BTreeSet<u16>>;

/// For every beam `x` in `beams` of AP `n`, the best sectors of AP `m` that
/// lower the MCS at some LP where both tables record the pair.
///
/// At each such LP the signal is AP `n`'s P_OFF entry and the only
/// interferer is AP `m`'s P_OFF entry.
pub fn bad_beam_candidates(
    n: usize,
    beams: &[u16],
    m: usize,
    db: &FingerprintDatabases,
    mcs: &McsTable,
    noise_dbm: f64,
) -> BadBeamSets {
    let mut out = BadBeamSets::new();
    for &x in beams {
        let set = out.entry(x).or_default();
        for z in 0..db.num_lps() {
            let (Some(sn), Some(sm)) = (db.best(z, n), db.best(z, m)) else { continue };
            if sn.sector_id != x || set.contains(&sm.sector_id) {
                continue;
            }
            if degrades(sn.power_dbm, sm.power_dbm, mcs, noise_dbm) {
                set.insert(sm.sector_id);
            }
        }
    }
    out
}

/// Whether one interferer drops the link to a lower MCS than its SNR allows.
pub fn degrades(signal_dbm: f64, interferer_dbm: f64, mcs: &McsTable, noise_dbm: f64) -> bool {
    let clean = mcs_for_snr(mcs, snr_db(signal_dbm, noise_dbm));
    let dirty = mcs_for_snr(mcs, sinr_db(signal_dbm, &[interferer_dbm], noise_dbm));
    dirty < clean
}

/// Best-beam list for one (AP, UE) link plus the bad-beam candidates it
/// imposes on every other AP.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPlan {
    pub ap_id: usize,
    pub ue_id: usize,
    pub best_beams: Vec<u16>,
    /// Other AP id to candidate sets keyed by this link's beam.
    pub candidates: BTreeMap<usize, BadBeamSets>,
    /// Beam announced by BID, once known.
    pub confirmed: Option<u16>,
}

impl BeamPlan {
    /// Computes the best beams and the candidates against every other AP.
    pub fn compute(
        ap_id: usize,
        ue_id: usize,
        fp: &[f64],
        catalog: &ExemplarCatalog,
        db: &FingerprintDatabases,
        radio: &RadioConfig,
        x: usize,
    ) -> Result<Self> {
        let best_beams =
            estimate_best_beams(fp, catalog.for_ap(ap_id), x).map_err(|_| Error::Coverage { ap: ap_id })?;
        let noise = radio.noise_dbm();
        let candidates = (0..db.num_aps())
            .filter(|&m| m != ap_id)
            .map(|m| (m, bad_beam_candidates(ap_id, &best_beams, m, db, &radio.mcs, noise)))
            .collect();
        Ok(Self { ap_id, ue_id, best_beams, candidates, confirmed: None })
    }

    /// Records the BID-confirmed beam.
    pub fn confirm(&mut self, beam: u16) -> Result<()> {
        if !self.best_beams.contains(&beam) {
            return Err(Error::Protocol(format!(
                "BID for beam {beam} not in the plan of AP {} / UE {}",
                self.ap_id, self.ue_id
            )));
        }
        self.confirmed = Some(beam);
        Ok(())
    }

    /// Beams AP `m` must avoid: the candidates tied to the confirmed beam, or
    /// the union over all best beams before confirmation.
    pub fn bad_beams_for(&self, m: usize) -> BTreeSet<u16> {
        let Some(sets) = self.candidates.get(&m) else { return BTreeSet::new() };
        match self.confirmed {
            Some(x) => sets.get(&x).cloned().unwrap_or_default(),
            None => sets.values().flatten().copied().collect(),
        }
    }
}

/// Applies a BID to the plan of the announcing link.
pub fn refine_bad_beams_on_bid(plans: &mut [BeamPlan], ap_id: usize, ue_id: usize, beam: u16) -> Result<()> {
    let plan = plans
        .iter_mut()
        .find(|p| p.ap_id == ap_id && p.ue_id == ue_id)
        .ok_or_else(|| Error::Protocol(format!("BID from unknown link AP {ap_id} / UE {ue_id}")))?;
    plan.confirm(beam)
}

/// Union of the refined bad beams every active plan imposes on AP `m`.
pub fn eliminated_beams<'a>(plans: impl IntoIterator<Item = &'a BeamPlan>, m: usize) -> BTreeSet<u16> {
    plans.into_iter().filter(|p| p.ap_id != m).flat_map(|p| p.bad_beams_for(m)).collect()
}

/// Outcome of beam refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrpResult {
    pub beam: u16,
    pub rx_power_dbm: f64,
    pub probed: usize,
    /// Every candidate was eliminated and the full list was probed instead.
    pub fell_back: bool,
}

/// Probes the best beams not in `eliminated` against the true channel and
/// keeps the strongest, lowest ID on ties.
pub fn brp_refine(
    ap: &ApNode,
    best_beams: &[u16],
    eliminated: &BTreeSet<u16>,
    ue: Point3,
    radio: &RadioConfig,
) -> Result<BrpResult> {
    if best_beams.is_empty() {
        return Err(Error::Coverage { ap: ap.id });
    }
    let kept: Vec<u16> = best_beams.iter().copied().filter(|b| !eliminated.contains(b)).collect();
    let (probe, fell_back) = if kept.is_empty() { (best_beams.to_vec(), true) } else { (kept, false) };
    let mut best: Option<(u16, f64)> = None;
    for &b in &probe {
        let p = rx_power_mmw(ap, b, ue, radio)?;
        if best.is_none_or(|(bb, bp)| p > bp || (p == bp && b < bb)) {
            best = Some((b, p));
        }
    }
    let (beam, rx_power_dbm) = best.expect("probe list is non-empty");
    Ok(BrpResult { beam, rx_power_dbm, probed: probe.len(), fell_back })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{AffinityParams, BestSector};
    use alloc::vec;
    use proptest::prelude::*;

    fn set(ap: usize, sector: u16, ex: Vec<Vec<f64>>) -> ExemplarSet {
        let k = ex.len();
        ExemplarSet {
            ap_id: ap,
            sector_id: sector,
            exemplars: ex,
            exemplar_lps: (0..k).collect(),
            member_lps: (0..k).map(|i| vec![i]).collect(),
        }
    }

    fn fp(rss: Vec<f64>) -> OnlineFingerprint {
        OnlineFingerprint { ue_id: 0, rss, timestamp_s: 0.0 }
    }

    #[test]
    fn select_ap_examples() {
        let cat = ExemplarCatalog {
            per_ap: vec![
                vec![set(0, 1, vec![vec![-60.0, -60.0]])],
                vec![set(1, 1, vec![vec![-40.0, -50.0]])],
                vec![set(2, 1, vec![vec![-40.0, -52.0]])],
                vec![set(3, 1, vec![vec![-41.0, -51.0]])],
            ],
        };
        let none = BTreeSet::new();
        assert_eq!(select_ap(&fp(vec![-41.0, -51.0]), &cat, &none, 100.0), Some(3));
        // Equidistant from APs 1 and 2.
        assert_eq!(select_ap(&fp(vec![-40.0, -51.0]), &cat, &none, 100.0), Some(1));
        let all: BTreeSet<usize> = (0..4).collect();
        assert_eq!(select_ap(&fp(vec![-41.0, -51.0]), &cat, &all, 100.0), None);
        assert_eq!(select_ap(&fp(vec![0.0, 0.0]), &cat, &none, 100.0), None);
    }

    #[test]
    fn best_beam_examples() {
        let sets = vec![set(0, 7, vec![vec![-45.0, -50.0]]), set(0, 2, vec![vec![-40.0, -50.0]])];
        assert_eq!(estimate_best_beams(&[-40.0, -50.0], &sets, 6).unwrap(), vec![2, 7]);
        assert_eq!(estimate_best_beams(&[-40.0, -50.0], &sets, 1).unwrap(), vec![2]);
        assert!(matches!(estimate_best_beams(&[-40.0], &[], 6), Err(Error::Coverage { .. })));
    }

    fn cell(s: u16, p: f64) -> Option<BestSector> {
        Some(BestSector { sector_id: s, power_dbm: p })
    }

    #[test]
    fn bad_beam_examples() {
        let table = McsTable::default();
        let noise = -80.0;
        // LP 0: signal -64 dBm (SNR 16, MCS 9); interferer -74 gives SINR ~9.6 (MCS 4).
        // LP 1: interferer 60 dB below signal.
        // LP 2: different serving beam.
        let best = vec![cell(1, -64.0), cell(4, -74.0), cell(1, -62.0), cell(7, -122.0), cell(2, -60.0), cell(9, -60.0)];
        let db = FingerprintDatabases::from_parts(3, vec![8, 9], vec![-40.0; 6], best).unwrap();
        let c = bad_beam_candidates(0, &[1, 2, 3], 1, &db, &table, noise);
        assert_eq!(c[&1], BTreeSet::from([4]));
        assert_eq!(c[&2], BTreeSet::from([9]));
        assert!(c[&3].is_empty());
    }

    #[test]
    fn bid_refinement() {
        let mut sets = BTreeMap::new();
        sets.insert(1u16, BTreeSet::from([4u16]));
        sets.insert(2u16, BTreeSet::from([7u16]));
        let mut plans = vec![BeamPlan {
            ap_id: 0,
            ue_id: 5,
            best_beams: vec![1, 2],
            candidates: BTreeMap::from([(1usize, sets)]),
            confirmed: None,
        }];
        assert_eq!(eliminated_beams(&plans, 1), BTreeSet::from([4, 7]));
        refine_bad_beams_on_bid(&mut plans, 0, 5, 1).unwrap();
        assert_eq!(eliminated_beams(&plans, 1), BTreeSet::from([4]));
        assert!(matches!(refine_bad_beams_on_bid(&mut plans, 0, 5, 3), Err(Error::Protocol(_))));
        assert!(matches!(refine_bad_beams_on_bid(&mut plans, 2, 5, 1), Err(Error::Protocol(_))));
        assert!(eliminated_beams(&plans, 0).is_empty());
    }

    #[test]
    fn brp_fallback_and_argmax() {
        let radio = RadioConfig::default();
        let ap = ApNode::new(
            0,
            Point3::new(6.0, 3.0, 3.0),
            crate::environment::default_sector_layout(36).unwrap(),
            10.0,
            20.0,
        )
        .unwrap();
        let ue = Point3::new(9.0, 3.0, 1.0);
        let all: Vec<u16> = ap.sector_ids().collect();
        let r = brp_refine(&ap, &all, &BTreeSet::new(), ue, &radio).unwrap();
        let oracle = crate::learning::best_sector(&ap, ue, &radio).unwrap().unwrap();
        assert_eq!((r.beam, r.rx_power_dbm, r.probed, r.fell_back), (oracle.sector_id, oracle.power_dbm, 36, false));
        let one = brp_refine(&ap, &[5], &BTreeSet::new(), ue, &radio).unwrap();
        assert_eq!(one.beam, 5);
        let fb = brp_refine(&ap, &[5, 6], &BTreeSet::from([5, 6]), ue, &radio).unwrap();
        assert!(fb.fell_back);
        assert_eq!(fb.probed, 2);
    }

    #[test]
    fn plan_from_catalog() {
        let best = vec![cell(1, -50.0), cell(2, -50.0), cell(2, -50.0), cell(2, -50.0)];
        let db = FingerprintDatabases::from_parts(2, vec![2, 2], vec![-40.0, -60.0, -60.0, -40.0], best).unwrap();
        let cat = ExemplarCatalog::build(&db, &AffinityParams::default()).unwrap();
        let plan = BeamPlan::compute(0, 0, &[-40.0, -60.0], &cat, &db, &RadioConfig::default(), 6).unwrap();
        assert_eq!(plan.best_beams, vec![1, 2]);
        assert!(plan.candidates.contains_key(&1));
    }

    proptest! {
        #[test]
        fn sort_order_invariant_under_common_offset(
            vals in proptest::collection::vec(-90.0f64..-30.0, 12),
            offset in -20.0f64..20.0,
        ) {
            let sets: Vec<ExemplarSet> = (0..4)
                .map(|s| set(0, s as u16 + 1, vec![vals[s * 2..s * 2 + 2].to_vec()]))
                .collect();
            let probe = vals[8..10].to_vec();
            let shifted_sets: Vec<ExemplarSet> = sets
                .iter()
                .map(|s| set(0, s.sector_id, s.exemplars.iter().map(|e| e.iter().map(|v| v + offset).collect()).collect()))
                .collect();
            let shifted: Vec<f64> = probe.iter().map(|v| v + offset).collect();
            let a = estimate_best_beams(&probe, &sets, 4).unwrap();
            let b = estimate_best_beams(&shifted, &shifted_sets, 4).unwrap();
            // Distances are equal up to rounding; compare the induced order.
            let d = |p: &[f64], s: &[ExemplarSet], id: u16| sq_distance(p, &s[id as usize - 1].exemplars[0]);
            for w in a.windows(2) {
                prop_assert!(d(&probe, &sets, w[0]) <= d(&probe, &sets, w[1]) + 1e-9);
            }
            for w in b.windows(2) {
                prop_assert!(d(&probe, &sets, w[0]) <= d(&probe, &sets, w[1]) + 1e-9);
            }
        }

        #[test]
        fn exemplar_order_within_sector_is_irrelevant(
            vals in proptest::collection::vec(-90.0f64..-30.0, 14),
        ) {
            let ex: Vec<Vec<f64>> = vals[..12].chunks(2).map(|c| c.to_vec()).collect();
            let fwd = vec![set(0, 1, ex[..3].to_vec()), set(0, 2, ex[3..].to_vec())];
            let mut rev_a = ex[..3].to_vec();
            rev_a.reverse();
            let mut rev_b = ex[3..].to_vec();
            rev_b.reverse();
            let rev = vec![set(0, 1, rev_a), set(0, 2, rev_b)];
            prop_assert_eq!(
                estimate_best_beams(&vals[12..], &fwd, 2).unwrap(),
                estimate_best_beams(&vals[12..], &rev, 2).unwrap()
            );
        }

        #[test]
        fn more_interference_never_removes_a_candidate(
            powers in proptest::collection::vec(-80.0f64..-40.0, 8),
            sectors in proptest::collection::vec(1u16..=4, 8),
            bump in 0.0f64..30.0,
            which in 0usize..4,
        ) {
            let mut best = Vec::new();
            for z in 0..4 {
                best.push(cell(sectors[z], powers[z]));
                best.push(cell(sectors[z + 4], powers[z + 4]));
            }
            let table = McsTable::default();
            let db = FingerprintDatabases::from_parts(4, vec![4, 4], vec![-40.0; 8], best.clone()).unwrap();
            let before = bad_beam_candidates(0, &[1, 2, 3, 4], 1, &db, &table, -73.5);
            best[which * 2 + 1] = cell(sectors[which + 4], powers[which + 4] + bump);
            let db2 = FingerprintDatabases::from_parts(4, vec![4, 4], vec![-40.0; 8], best).unwrap();
            let after = bad_beam_candidates(0, &[1, 2, 3, 4], 1, &db2, &table, -73.5);
            for (x, s) in before {
                prop_assert!(s.is_subset(&after[&x]));
            }
        }
    }
}
