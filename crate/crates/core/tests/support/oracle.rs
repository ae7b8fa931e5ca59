//! Brute-force references for best-sector selection, best-beam ranking and
//! bad-beam candidates, checked on small random rooms.

use std::collections::{BTreeMap, BTreeSet};

use mmwlan_core::coordination::{bad_beam_candidates, estimate_best_beams};
use mmwlan_core::environment::{default_sector_layout, ApNode, Environment, Point3, Room};
use mmwlan_core::learning::affinity::sq_distance;
use mmwlan_core::learning::{build_databases, AffinityParams, ExemplarCatalog, FingerprintDatabases};
use mmwlan_core::radio::{rx_power_mmw, RadioConfig, ShadowingField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub env: Environment,
    pub radio: RadioConfig,
    pub shadowing: ShadowingField,
    pub fps: Vec<Vec<f64>>,
    pub rng: ChaCha8Rng,
}

/// N <= 3 APs, L <= 20 LPs, D <= 8 sectors per AP, all drawn from `seed`.
pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = Room::default();
    let n = rng.random_range(1..=3);
    let aps = (0..n)
        .map(|i| {
            let d = rng.random_range(1..=8);
            let p = Point3::new(rng.random_range(0.5..11.5), rng.random_range(0.5..5.5), room.height);
            ApNode::new(i, p, default_sector_layout(d).unwrap(), 10.0, 20.0).unwrap()
        })
        .collect();
    let l = rng.random_range(2..=20);
    let lps: Vec<Point3> = (0..l)
        .map(|_| Point3::new(rng.random_range(0.0..12.0), rng.random_range(0.0..6.0), rng.random_range(0.5..1.5)))
        .collect();
    let env = Environment::new(room, aps, lps, Vec::new()).unwrap();
    let radio = RadioConfig::default();
    let shadowing = radio.shadowing(seed);
    let fps = (0..4)
        .map(|_| (0..n).map(|_| rng.random_range(-80.0..-20.0)).collect())
        .collect();
    Instance { env, radio, shadowing, fps, rng }
}

/// Highest entry whose threshold the value reaches, -1 below all of them.
fn mcs_rank(radio: &RadioConfig, db: f64) -> i32 {
    radio.mcs.entries().iter().filter(|e| db >= e.min_snr_db).map(|e| e.index as i32).max().unwrap_or(-1)
}

fn db(mw: f64) -> f64 {
    10.0 * mw.log10()
}

fn mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Best sector and its power by scanning every sector, or `None` when the
/// best one misses the control-rate threshold.
fn oracle_best(ap: &ApNode, target: Point3, radio: &RadioConfig) -> Option<(u16, f64)> {
    let powers: Vec<f64> = ap.sector_ids().map(|s| rx_power_mmw(ap, s, target, radio).unwrap()).collect();
    let mut best = 0;
    for (i, p) in powers.iter().enumerate() {
        if *p > powers[best] {
            best = i;
        }
    }
    let control = radio.mcs.control().min_snr_db;
    (powers[best] - radio.noise_dbm() >= control).then_some((best as u16 + 1, powers[best]))
}

fn check_argmax(inst: &Instance, tables: &FingerprintDatabases) -> Result<(), String> {
    for (l, lp) in inst.env.learning_points.iter().enumerate() {
        for ap in &inst.env.aps {
            let want = oracle_best(ap, *lp, &inst.radio);
            let got = tables.best(l, ap.id).map(|b| (b.sector_id, b.power_dbm));
            if want != got {
                return Err(format!("best sector at LP {l}, AP {}: {got:?} != {want:?}", ap.id));
            }
        }
    }
    Ok(())
}

fn check_ordering(inst: &mut Instance, catalog: &ExemplarCatalog) -> Result<(), String> {
    for fp in inst.fps.clone() {
        for ap in &inst.env.aps {
            let sets = catalog.for_ap(ap.id);
            if sets.is_empty() {
                continue;
            }
            let x = inst.rng.random_range(1..=ap.num_sectors());
            let mut left: Vec<(u16, f64)> = Vec::new();
            for s in ap.sector_ids() {
                let d = sets
                    .iter()
                    .filter(|e| e.sector_id == s)
                    .flat_map(|e| e.exemplars.iter())
                    .map(|e| sq_distance(&fp, e))
                    .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))));
                if let Some(d) = d {
                    left.push((s, d));
                }
            }
            let mut want = Vec::new();
            while want.len() < x && !left.is_empty() {
                let mut k = 0;
                for (i, e) in left.iter().enumerate() {
                    if e.1 < left[k].1 || (e.1 == left[k].1 && e.0 < left[k].0) {
                        k = i;
                    }
                }
                want.push(left.remove(k).0);
            }
            let got = estimate_best_beams(&fp, sets, x).map_err(|e| e.to_string())?;
            if got != want {
                return Err(format!("beam order for AP {}: {got:?} != {want:?}", ap.id));
            }
        }
    }
    Ok(())
}

fn check_candidates(inst: &Instance, tables: &FingerprintDatabases) -> Result<(), String> {
    let noise = inst.radio.noise_dbm();
    for n in &inst.env.aps {
        for m in &inst.env.aps {
            if n.id == m.id {
                continue;
            }
            let beams: Vec<u16> = n.sector_ids().collect();
            let mut want: BTreeMap<u16, BTreeSet<u16>> = BTreeMap::new();
            for &x in &beams {
                let set = want.entry(x).or_default();
                for s in m.sector_ids() {
                    let hit = inst.env.learning_points.iter().any(|&z| {
                        let (Some(bn), Some(bm)) = (oracle_best(n, z, &inst.radio), oracle_best(m, z, &inst.radio))
                        else {
                            return false;
                        };
                        if bn.0 != x || bm.0 != s {
                            return false;
                        }
                        let clean = mcs_rank(&inst.radio, bn.1 - noise);
                        let dirty = mcs_rank(&inst.radio, db(mw(bn.1) / (mw(bm.1) + mw(noise))));
                        dirty < clean
                    });
                    if hit {
                        set.insert(s);
                    }
                }
            }
            let got = bad_beam_candidates(n.id, &beams, m.id, tables, &inst.radio.mcs, noise);
            if got != want {
                return Err(format!("bad beams of AP {} against AP {}: {got:?} != {want:?}", m.id, n.id));
            }
        }
    }
    Ok(())
}

/// Runs the three comparisons on instance `seed`.
pub fn check(seed: u64) -> Result<(), String> {
    let mut inst = instance(seed);
    let tables = build_databases(&inst.env, &inst.radio, Some(&inst.shadowing)).map_err(|e| e.to_string())?;
    let catalog = ExemplarCatalog::build(&tables, &AffinityParams::default()).map_err(|e| e.to_string())?;
    check_argmax(&inst, &tables)?;
    check_ordering(&mut inst, &catalog)?;
    check_candidates(&inst, &tables)?;
    Ok(())
}

/// Exemplars are members, exemplars join themselves and every member sits
/// with its most similar exemplar.
pub fn check_clusters(seed: u64) -> Result<(), String> {
    let inst = instance(seed);
    let tables = build_databases(&inst.env, &inst.radio, Some(&inst.shadowing)).map_err(|e| e.to_string())?;
    let catalog = ExemplarCatalog::build(&tables, &AffinityParams::default()).map_err(|e| e.to_string())?;
    for sets in &catalog.per_ap {
        for set in sets {
            let group: BTreeSet<usize> = (0..tables.num_lps())
                .filter(|&l| tables.phi(l, set.ap_id) == Some(set.sector_id))
                .collect();
            let members: BTreeSet<usize> = set.member_lps.iter().flatten().copied().collect();
            if members != group || set.member_lps.iter().map(Vec::len).sum::<usize>() != group.len() {
                return Err(format!("AP {} sector {}: members do not partition the group", set.ap_id, set.sector_id));
            }
            for (k, &e) in set.exemplar_lps.iter().enumerate() {
                if !set.member_lps[k].contains(&e) || set.exemplars[k].as_slice() != tables.psi_row(e) {
                    return Err(format!("exemplar LP {e} is not a member of its own cluster"));
                }
                for &l in &set.member_lps[k] {
                    let own = sq_distance(tables.psi_row(l), tables.psi_row(e));
                    let best = set
                        .exemplar_lps
                        .iter()
                        .map(|&o| sq_distance(tables.psi_row(l), tables.psi_row(o)))
                        .fold(f64::INFINITY, f64::min);
                    if own > best {
                        return Err(format!("LP {l} sits with exemplar {e} but a closer one exists"));
                    }
                }
            }
        }
    }
    Ok(())
}
