use mmwlan_core::environment::{default_sector_layout, ApNode, Point3};
use mmwlan_core::radio::{
    antenna_gain, db_to_linear, linear_to_db, mcs_for_snr, path_loss_db, rx_power_mmw, sinr_db, snr_db, AntennaPattern,
    RadioConfig, MMW_CARRIER_HZ, WIFI_CARRIER_HZ,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn sinr_bounded_by_snr(
        s in -100.0f64..20.0,
        noise in -100.0f64..-50.0,
        interferers in proptest::collection::vec(-150.0f64..20.0, 0..6),
    ) {
        let sinr = sinr_db(s, &interferers, noise);
        let snr = snr_db(s, noise);
        prop_assert!(sinr <= snr);
        if interferers.is_empty() {
            prop_assert_eq!(sinr, snr);
        }
    }

    #[test]
    fn gain_falls_off_with_offset(a in 0.0f64..std::f64::consts::PI, b in 0.0f64..std::f64::consts::PI) {
        let p = AntennaPattern::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(antenna_gain(&p, lo) >= antenna_gain(&p, hi));
        prop_assert!(antenna_gain(&p, hi) >= p.sidelobe_floor_dbi);
    }

    #[test]
    fn mcs_is_monotone_in_snr(a in -10.0f64..40.0, b in -10.0f64..40.0) {
        let t = RadioConfig::default().mcs;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(mcs_for_snr(&t, lo) <= mcs_for_snr(&t, hi));
    }

    #[test]
    fn db_round_trip(db in -200.0f64..100.0) {
        prop_assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-9);
    }

    #[test]
    fn doubling_distance_costs_six_db(d in 0.1f64..100.0) {
        let step = path_loss_db(2.0 * d, MMW_CARRIER_HZ) - path_loss_db(d, MMW_CARRIER_HZ);
        prop_assert!((step - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn rx_power_never_exceeds_boresight_budget(x in 0.0f64..12.0, y in 0.0f64..6.0, s in 1u16..=36) {
        let radio = RadioConfig::default();
        let ap = ApNode::new(0, Point3::new(6.0, 3.0, 3.0), default_sector_layout(36).unwrap(), 10.0, 20.0).unwrap();
        let target = Point3::new(x, y, 1.0);
        let p = rx_power_mmw(&ap, s, target, &radio).unwrap();
        let d = ap.position.distance(target);
        let bound = 10.0 + radio.pattern.peak_gain_dbi + radio.rx_gain_dbi - path_loss_db(d, radio.mmw_freq_hz);
        prop_assert!(p <= bound + 1e-9);
    }
}

#[test]
fn hand_computed_friis() {
    // 20 log10(4 pi d f / c) worked by hand.
    assert!((path_loss_db(5.0, MMW_CARRIER_HZ) - 82.05).abs() < 0.05);
    assert!((path_loss_db(10.0, WIFI_CARRIER_HZ) - 66.7).abs() < 0.05);
}

#[test]
fn half_power_at_half_beamwidth() {
    let p = AntennaPattern::default();
    assert_eq!(antenna_gain(&p, p.hpbw_rad / 2.0), p.peak_gain_dbi - 3.0);
    assert_eq!(antenna_gain(&p, 0.0), p.peak_gain_dbi);
}
