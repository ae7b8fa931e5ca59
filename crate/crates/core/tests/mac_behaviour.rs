mod support;

use mmwlan_core::environment::{Point3, Room};
use mmwlan_core::macsim::{
    compute_metrics, run, Band, Endpoint, FrameKind, LayoutConfig, LearningConfig, MacConfig, Protocol, RunOptions,
    RunOutput, Scenario, TrafficConfig, UePlacement,
};
use mmwlan_core::radio::RadioConfig;

fn scenario(layout: LayoutConfig, load_bps: f64, horizon_s: f64, seed: u64) -> Scenario {
    Scenario {
        env: layout.build_environment(seed).unwrap(),
        radio: RadioConfig::default(),
        mac: MacConfig::default(),
        traffic: TrafficConfig { offered_load_bps: load_bps, ..TrafficConfig::default() },
        learning: LearningConfig::default(),
        horizon_s,
        seed,
    }
}

fn layout(aps: Vec<Point3>, ues: Vec<Point3>, room: Room) -> LayoutConfig {
    LayoutConfig {
        room,
        num_aps: aps.len(),
        ap_positions: Some(aps),
        num_ues: ues.len(),
        ue_positions: Some(ues),
        ..LayoutConfig::default()
    }
}

fn traced(sc: &Scenario, p: Protocol) -> RunOutput {
    let out = run(sc, p, RunOptions { trace: true }).unwrap();
    assert!(out.metrics.is_conserved(), "{p:?}: {:?}", out.metrics);
    out
}

fn default_layout(num_aps: usize) -> LayoutConfig {
    LayoutConfig { num_aps, ..LayoutConfig::default() }
}

#[test]
fn lone_link_carries_light_load() {
    let l = layout(vec![Point3::new(6.0, 3.0, 3.0)], vec![Point3::new(7.0, 3.5, 1.0)], Room::default());
    let mut sc = scenario(l, 100e6, 0.5, 3);
    sc.mac.beacon_interval_s = 0.02;
    for p in Protocol::ALL {
        let out = traced(&sc, p);
        let (gbps, delay) = compute_metrics(&out.metrics);
        assert_eq!(out.metrics.collision_count, 0, "{p:?}");
        assert!((gbps - 0.1).abs() < 0.005, "{p:?} carried {gbps} Gbps");
        // Nothing moves before the first beacon, at most one interval in.
        assert!(delay.unwrap() < 0.02, "{p:?}");
    }
}

#[test]
fn colocated_aps_collide() {
    let aps = vec![Point3::new(6.0, 3.0, 3.0), Point3::new(6.2, 3.0, 3.0)];
    let ues = vec![Point3::new(4.0, 3.0, 1.0), Point3::new(8.0, 3.0, 1.0), Point3::new(6.0, 1.0, 1.0)];
    let mut sc = scenario(layout(aps, ues, Room::default()), 1e9, 0.2, 5);
    // Short beacon intervals so both sweeps keep landing on each other.
    sc.mac.beacon_interval_s = 0.002;
    let out = traced(&sc, Protocol::Baseline);
    assert!(out.metrics.collision_count >= 1);
}

#[test]
fn centralized_header_sweeps_everyone_in_turn() {
    let aps = vec![Point3::new(3.0, 3.0, 3.0), Point3::new(9.0, 3.0, 3.0)];
    let ues = vec![Point3::new(2.0, 2.0, 1.0), Point3::new(6.0, 4.0, 1.0), Point3::new(10.0, 2.5, 1.0)];
    let sc = scenario(layout(aps, ues, Room::default()), 200e6, 0.05, 2);
    let out = traced(&sc, Protocol::Rrh);
    let cli = out.trace.iter().find(|r| r.kind == FrameKind::Cli).expect("CLI sent").start_ns;
    let header: Vec<_> = out.trace.iter().filter(|r| r.band == Band::Mmw60 && r.start_ns < cli).collect();
    let mut phases: Vec<Endpoint> = Vec::new();
    for r in header.iter().filter(|r| r.kind == FrameKind::Ssw) {
        if phases.last() != Some(&r.src) {
            phases.push(r.src);
        }
    }
    assert_eq!(
        phases,
        vec![Endpoint::Ap(0), Endpoint::Ap(1), Endpoint::Ue(0), Endpoint::Ue(1), Endpoint::Ue(2)]
    );
    for (i, a) in header.iter().enumerate() {
        assert!(header[i + 1..].iter().all(|b| !a.overlaps(b)), "{a:?} overlaps in the header");
    }
}

#[test]
fn single_ap_header_share_matches_trace() {
    let l = layout(vec![Point3::new(6.0, 3.0, 3.0)], vec![Point3::new(5.0, 2.0, 1.0)], Room::default());
    let mut sc = scenario(l, 1e9, 0.35, 4);
    sc.mac.beacon_interval_s = 0.1;
    let out = traced(&sc, Protocol::Rrh);
    let starts = out.trace.iter().filter(|r| r.kind == FrameKind::TriggerSweep).map(|r| r.start_ns);
    let ends = out.trace.iter().filter(|r| r.kind == FrameKind::Cli).map(|r| r.end_ns());
    let header_ns: u64 = starts.zip(ends).map(|(s, e)| e - s).sum();
    let share = header_ns as f64 * 1e-9 / sc.horizon_s;
    assert_eq!(out.trace.iter().filter(|r| r.kind == FrameKind::TriggerSweep).count(), 4);
    assert!((share - out.metrics.bhi_overhead_fraction).abs() < 1e-12, "{share} vs {}", out.metrics.bhi_overhead_fraction);
}

#[test]
fn refinement_respects_foreign_nav() {
    let sc = scenario(default_layout(4), 1e9, 0.1, 7);
    let out = traced(&sc, Protocol::Dualband);
    assert!(out.trace.iter().any(|r| r.kind == FrameKind::NavSet));
    assert_eq!(support::trace::nav_violations(&out.trace, &sc.mac.timing()), 0);
}

#[test]
fn separated_pairs_transmit_concurrently() {
    let room = Room { width: 30.0, depth: 6.0, height: 3.0 };
    let aps = vec![Point3::new(4.0, 3.0, 3.0), Point3::new(26.0, 3.0, 3.0)];
    let ues = vec![Point3::new(5.0, 3.5, 1.0), Point3::new(25.0, 2.5, 1.0)];
    let l = LayoutConfig { num_lps: 120, ..layout(aps, ues, room) };
    let sc = scenario(l, 1e9, 0.05, 8);
    for p in [Protocol::Dualband, Protocol::Rrh] {
        let out = traced(&sc, p);
        let data = |a: usize| {
            out.trace.iter().filter(move |r| r.kind == FrameKind::Data && r.src == Endpoint::Ap(a)).collect::<Vec<_>>()
        };
        let (d0, d1) = (data(0), data(1));
        assert!(d0.iter().any(|a| d1.iter().any(|b| a.overlaps(b))), "{p:?}: no concurrent DATA");
    }
}

/// Two cells 12 m apart with three UEs each: every UE stays with its own AP
/// and the pair carries twice what one cell does.
#[test]
fn rrh_cells_keep_their_own_ues() {
    let room = Room { width: 24.0, depth: 6.0, height: 3.0 };
    let aps = vec![Point3::new(6.0, 3.0, 3.0), Point3::new(18.0, 3.0, 3.0)];
    let offsets = [(-1.0, -0.5), (0.8, 0.6), (0.2, -1.2)];
    let ues: Vec<Point3> =
        aps.iter().flat_map(|a| offsets.iter().map(move |(dx, dy)| Point3::new(a.x + dx, a.y + dy, 1.0))).collect();
    let one = scenario(layout(aps[..1].to_vec(), ues[..3].to_vec(), room), 1e9, 0.2, 4);
    let two = scenario(layout(aps, ues, room), 1e9, 0.2, 4);
    let (t1, _) = compute_metrics(&traced(&one, Protocol::Rrh).metrics);
    let out = traced(&two, Protocol::Rrh);
    for r in out.trace.iter().filter(|r| r.kind == FrameKind::Data) {
        let (Endpoint::Ap(a), Endpoint::Ue(u)) = (r.src, r.dst) else { panic!("DATA {r:?}") };
        assert_eq!(a, u / 3, "AP {a} served UE {u}");
    }
    let (t2, _) = compute_metrics(&out.metrics);
    assert!((t2 / t1 - 2.0).abs() < 0.1, "one cell {t1} Gbps, two cells {t2} Gbps");
}

#[test]
fn identical_seed_identical_run() {
    let sc = scenario(default_layout(4), 1e9, 0.05, 11);
    for p in Protocol::ALL {
        let a = traced(&sc, p);
        let b = traced(&sc, p);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn every_protocol_conserves_packets() {
    for (aps, seed) in [(2, 1), (5, 2), (8, 3)] {
        let l = LayoutConfig { ue_placement: UePlacement::Lps, ..default_layout(aps) };
        let sc = scenario(l, 1e9, 0.05, seed);
        for p in Protocol::ALL {
            let m = run(&sc, p, RunOptions::default()).unwrap().metrics;
            assert!(m.is_conserved(), "{p:?} {aps} APs: {m:?}");
            assert!(m.generated > 0);
        }
    }
}

/// Dual-band is left out: a coordination session costs about a millisecond
/// whatever its length, and lighter load can split one session into several.
#[test]
fn halving_load_never_raises_delay() {
    for seed in 1..=5 {
        let l = LayoutConfig { num_ues: 4, ..default_layout(2) };
        for p in [Protocol::Baseline, Protocol::Rrh] {
            let delay = |load: f64| {
                let mut sc = scenario(l.clone(), load, 0.5, seed);
                sc.mac.beacon_interval_s = 0.1;
                let m = run(&sc, p, RunOptions::default()).unwrap().metrics;
                compute_metrics(&m).1.unwrap()
            };
            let delays: Vec<f64> = [800e6, 400e6, 200e6, 100e6].into_iter().map(delay).collect();
            for w in delays.windows(2) {
                assert!(w[1] <= w[0], "{p:?} seed {seed}: {delays:?}");
            }
        }
    }
}
