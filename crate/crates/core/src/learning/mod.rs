//! Offline learning: fingerprint databases, best-sector grouping and
//! fingerprint exemplars.

pub mod affinity;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::environment::{ApNode, Environment, Point3};
use crate::error::{Error, Result};
use crate::radio::{db_to_linear, rx_power_mmw, snr_db, wifi_rss_dbm, RadioConfig, ShadowingField};

pub use affinity::{affinity_propagation, AffinityParams, Clustering, Preference, SimilarityMatrix};

/// Best sector of one AP toward one point, with the power it delivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSector {
    pub sector_id: u16,
    pub power_dbm: f64,
}

/// Strongest sector of `ap` toward `target`, lowest ID on ties.
///
/// `None` when even the strongest sector falls below the MCS 0 threshold.
pub fn best_sector(ap: &ApNode, target: Point3, radio: &RadioConfig) -> Result<Option<BestSector>> {
    let mut best: Option<BestSector> = None;
    for s in ap.sector_ids() {
        let p = rx_power_mmw(ap, s, target, radio)?;
        if best.is_none_or(|b| p > b.power_dbm) {
            best = Some(BestSector { sector_id: s, power_dbm: p });
        }
    }
    let floor = radio.mcs.control().min_snr_db;
    Ok(best.filter(|b| snr_db(b.power_dbm, radio.noise_dbm()) >= floor))
}

/// The Ψ, Φ and P_OFF tables, L rows by N columns.
///
/// Φ and P_OFF share one cell type so that a null sector always carries zero
/// power.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDatabases {
    num_lps: usize,
    num_aps: usize,
    sectors_per_ap: Vec<u16>,
    psi: Vec<f64>,
    best: Vec<Option<BestSector>>,
}

impl FingerprintDatabases {
    /// Assembles tables from row-major parts, checking shapes and sector ranges.
    pub fn from_parts(
        num_lps: usize,
        sectors_per_ap: Vec<u16>,
        psi: Vec<f64>,
        best: Vec<Option<BestSector>>,
    ) -> Result<Self> {
        let num_aps = sectors_per_ap.len();
        if num_lps == 0 || num_aps == 0 {
            return Err(Error::Config("databases need at least one LP and one AP".into()));
        }
        if psi.len() != num_lps * num_aps || best.len() != num_lps * num_aps {
            return Err(Error::Config(format!(
                "table sizes {} / {} do not match {num_lps} x {num_aps}",
                psi.len(),
                best.len()
            )));
        }
        for (i, cell) in best.iter().enumerate() {
            if let Some(b) = cell {
                let d = sectors_per_ap[i % num_aps];
                if b.sector_id == 0 || b.sector_id > d {
                    return Err(Error::Config(format!(
                        "sector {} at LP {} AP {} outside 1..={d}",
                        b.sector_id,
                        i / num_aps,
                        i % num_aps
                    )));
                }
                if !b.power_dbm.is_finite() {
                    return Err(Error::Config("best-sector power must be finite".into()));
                }
            }
        }
        Ok(Self { num_lps, num_aps, sectors_per_ap, psi, best })
    }

    pub fn num_lps(&self) -> usize {
        self.num_lps
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn sectors_per_ap(&self) -> &[u16] {
        &self.sectors_per_ap
    }

    pub fn psi(&self, l: usize, n: usize) -> f64 {
        self.psi[l * self.num_aps + n]
    }

    /// Fingerprint of LP `l`, one reading per AP.
    pub fn psi_row(&self, l: usize) -> &[f64] {
        &self.psi[l * self.num_aps..(l + 1) * self.num_aps]
    }

    pub fn best(&self, l: usize, n: usize) -> Option<BestSector> {
        self.best[l * self.num_aps + n]
    }

    pub fn phi(&self, l: usize, n: usize) -> Option<u16> {
        self.best(l, n).map(|b| b.sector_id)
    }

    /// P_OFF in dBm, `None` for zero power.
    pub fn p_off_dbm(&self, l: usize, n: usize) -> Option<f64> {
        self.best(l, n).map(|b| b.power_dbm)
    }

    /// P_OFF in milliwatts; exactly 0 where Φ is null.
    pub fn p_off_mw(&self, l: usize, n: usize) -> f64 {
        self.p_off_dbm(l, n).map_or(0.0, db_to_linear)
    }
}

/// Builds Ψ from noiseless mean 5 GHz RSS (shadowing included when given)
/// and Φ / P_OFF from the exhaustive best-sector search at every LP.
pub fn build_databases(
    env: &Environment,
    radio: &RadioConfig,
    shadowing: Option<&ShadowingField>,
) -> Result<FingerprintDatabases> {
    let (l_count, n_count) = (env.learning_points.len(), env.aps.len());
    let mut psi = Vec::with_capacity(l_count * n_count);
    let mut best = Vec::with_capacity(l_count * n_count);
    for &lp in &env.learning_points {
        for ap in &env.aps {
            psi.push(wifi_rss_dbm(ap, lp, radio, shadowing)?);
            best.push(best_sector(ap, lp, radio)?);
        }
    }
    let sectors = env.aps.iter().map(|a| a.num_sectors() as u16).collect();
    FingerprintDatabases::from_parts(l_count, sectors, psi, best)
}

/// LPs with a non-null Φ entry for `ap_id`, keyed by that sector.
pub fn group_by_best_sector(db: &FingerprintDatabases, ap_id: usize) -> Result<BTreeMap<u16, Vec<usize>>> {
    if ap_id >= db.num_aps() {
        return Err(Error::Config(format!("AP {ap_id} not in databases with {} APs", db.num_aps())));
    }
    let mut groups: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for l in 0..db.num_lps() {
        if let Some(s) = db.phi(l, ap_id) {
            groups.entry(s).or_default().push(l);
        }
    }
    Ok(groups)
}

/// Fingerprint exemplars for one (AP, best sector) group.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarSet {
    pub ap_id: usize,
    pub sector_id: u16,
    /// Ψ rows of the exemplar LPs.
    pub exemplars: Vec<Vec<f64>>,
    pub exemplar_lps: Vec<usize>,
    /// Member LP indices per cluster, parallel to `exemplars`.
    pub member_lps: Vec<Vec<usize>>,
}

/// Clusters each best-sector group of `ap_id` over its Ψ rows, one
/// [`ExemplarSet`] per non-empty group in ascending sector order.
pub fn build_exemplars(db: &FingerprintDatabases, ap_id: usize, params: &AffinityParams) -> Result<Vec<ExemplarSet>> {
    let groups = group_by_best_sector(db, ap_id)?;
    let mut out = Vec::with_capacity(groups.len());
    for (sector_id, lps) in groups {
        let rows: Vec<&[f64]> = lps.iter().map(|&l| db.psi_row(l)).collect();
        let sim = SimilarityMatrix::neg_sq_euclidean(&rows);
        let c = affinity_propagation(&sim, params)?;
        let member_lps = c
            .exemplars
            .iter()
            .map(|&e| lps.iter().zip(&c.assignment).filter(|(_, a)| **a == e).map(|(l, _)| *l).collect())
            .collect();
        out.push(ExemplarSet {
            ap_id,
            sector_id,
            exemplars: c.exemplars.iter().map(|&e| rows[e].to_vec()).collect(),
            exemplar_lps: c.exemplars.iter().map(|&e| lps[e]).collect(),
            member_lps,
        });
    }
    Ok(out)
}

/// Exemplar sets of every AP, indexed by AP id.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarCatalog {
    pub per_ap: Vec<Vec<ExemplarSet>>,
}

impl ExemplarCatalog {
    pub fn build(db: &FingerprintDatabases, params: &AffinityParams) -> Result<Self> {
        let per_ap = (0..db.num_aps()).map(|n| build_exemplars(db, n, params)).collect::<Result<_>>()?;
        Ok(Self { per_ap })
    }

    pub fn for_ap(&self, ap_id: usize) -> &[ExemplarSet] {
        self.per_ap.get(ap_id).map_or(&[], |v| v.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{default_sector_layout, generate_lp_grid, Room};
    use alloc::vec;
    use proptest::prelude::*;

    fn ap_at(id: usize, p: Point3, sectors: usize) -> ApNode {
        ApNode::new(id, p, default_sector_layout(sectors).unwrap(), 10.0, 20.0).unwrap()
    }

    #[test]
    fn straight_down_lp_picks_brute_force_sector() {
        let radio = RadioConfig::default();
        let ap = ap_at(0, Point3::new(6.0, 3.0, 3.0), 36);
        let lp = Point3::new(6.0, 3.0, 1.0);
        let powers: Vec<f64> = ap.sector_ids().map(|s| rx_power_mmw(&ap, s, lp, &radio).unwrap()).collect();
        let max = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let oracle = powers.iter().position(|p| *p == max).unwrap() as u16 + 1;
        let b = best_sector(&ap, lp, &radio).unwrap().unwrap();
        assert_eq!(b.sector_id, oracle);
        // 70 degree tilt row, first azimuth step.
        assert_eq!(b.sector_id, 3);
    }

    #[test]
    fn far_lp_is_null() {
        let radio = RadioConfig::default();
        let ap = ap_at(0, Point3::new(0.0, 0.0, 3.0), 36);
        assert_eq!(best_sector(&ap, Point3::new(10_000.0, 0.0, 1.0), &radio).unwrap(), None);
    }

    #[test]
    fn grouping_examples() {
        let cell = |s: u16| Some(BestSector { sector_id: s, power_dbm: -50.0 });
        let db = FingerprintDatabases::from_parts(4, vec![2], vec![-40.0; 4], vec![cell(1), cell(1), cell(2), None])
            .unwrap();
        let g = group_by_best_sector(&db, 0).unwrap();
        assert_eq!(g.get(&1), Some(&vec![0, 1]));
        assert_eq!(g.get(&2), Some(&vec![2]));
        assert_eq!(g.len(), 2);
        assert_eq!(db.p_off_mw(3, 0), 0.0);

        let empty = FingerprintDatabases::from_parts(2, vec![2], vec![-40.0; 2], vec![None, None]).unwrap();
        assert!(group_by_best_sector(&empty, 0).unwrap().is_empty());
        assert!(group_by_best_sector(&empty, 1).is_err());
    }

    #[test]
    fn from_parts_rejects_out_of_range_sector() {
        let bad = FingerprintDatabases::from_parts(
            1,
            vec![4],
            vec![-40.0],
            vec![Some(BestSector { sector_id: 5, power_dbm: -50.0 })],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn two_clouds_in_one_group() {
        let cell = Some(BestSector { sector_id: 1, power_dbm: -50.0 });
        let psi = vec![-40.0, -60.0, -40.5, -60.2, -70.0, -30.0, -70.3, -30.1];
        let db = FingerprintDatabases::from_parts(4, vec![1, 1], psi, vec![cell, None, cell, None, cell, None, cell, None])
            .unwrap();
        let sets = build_exemplars(&db, 0, &AffinityParams::default()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].exemplars.len(), 2);
        let mut members = sets[0].member_lps.clone();
        members.sort();
        assert_eq!(members, vec![vec![0, 1], vec![2, 3]]);
    }

    fn small_env(ap_positions: &[Point3], sectors: usize, lps: usize) -> Environment {
        let room = Room::default();
        let aps = ap_positions.iter().enumerate().map(|(i, p)| ap_at(i, *p, sectors)).collect();
        Environment::new(room, aps, generate_lp_grid(&room, lps, 1.0).unwrap(), vec![]).unwrap()
    }

    #[test]
    fn database_invariants_on_default_room() {
        let env = small_env(&[Point3::new(3.0, 3.0, 3.0), Point3::new(9.0, 3.0, 3.0)], 36, 90);
        let radio = RadioConfig::default();
        let field = radio.shadowing(7);
        let db = build_databases(&env, &radio, Some(&field)).unwrap();
        assert_eq!(db, build_databases(&env, &radio, Some(&field)).unwrap());
        for l in 0..db.num_lps() {
            for (n, ap) in env.aps.iter().enumerate() {
                let b = db.best(l, n).expect("every LP is covered in a 12 m room");
                let lp = env.learning_points[l];
                assert_eq!(b.power_dbm, rx_power_mmw(ap, b.sector_id, lp, &radio).unwrap());
                for s in ap.sector_ids() {
                    assert!(rx_power_mmw(ap, s, lp, &radio).unwrap() <= b.power_dbm);
                }
            }
        }
        let cat = ExemplarCatalog::build(&db, &AffinityParams::default()).unwrap();
        for n in 0..2 {
            let mut seen: Vec<usize> = Vec::new();
            for set in cat.for_ap(n) {
                assert!(!set.exemplars.is_empty());
                for (e, lp) in set.exemplars.iter().zip(&set.exemplar_lps) {
                    assert_eq!(e.as_slice(), db.psi_row(*lp));
                }
                for m in &set.member_lps {
                    seen.extend(m);
                }
            }
            seen.sort();
            let covered: Vec<usize> = (0..db.num_lps()).filter(|l| db.phi(*l, n).is_some()).collect();
            assert_eq!(seen, covered);
        }
    }

    proptest! {
        #[test]
        fn members_join_their_most_similar_exemplar(seed in 0u64..500) {
            let env = small_env(&[Point3::new(2.0, 2.0, 3.0), Point3::new(10.0, 4.0, 3.0)], 8, 20);
            let radio = RadioConfig::default();
            let db = build_databases(&env, &radio, Some(&radio.shadowing(seed))).unwrap();
            for n in 0..2 {
                for set in build_exemplars(&db, n, &AffinityParams::default()).unwrap() {
                    for (ci, members) in set.member_lps.iter().enumerate() {
                        for &l in members {
                            let row = db.psi_row(l);
                            if set.exemplar_lps.contains(&l) {
                                prop_assert_eq!(set.exemplar_lps[ci], l);
                                continue;
                            }
                            let own = affinity::sq_distance(row, &set.exemplars[ci]);
                            for e in &set.exemplars {
                                prop_assert!(own <= affinity::sq_distance(row, e));
                            }
                        }
                    }
                }
            }
        }
    }
}
