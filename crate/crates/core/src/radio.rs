//! Propagation, antenna gain, SNR/SINR and MCS mapping.
//!
//! The channel is narrowband line-of-sight: free-space loss plus the
//! transmit sector's directivity. Receivers are quasi-omni.

use alloc::format;
use alloc::vec::Vec;

use crate::environment::{angle_offset, ApNode, Point3};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{derive_seed, hashed_standard_normal, mix64};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
/// 802.11ad channel 2 center frequency.
pub const MMW_CARRIER_HZ: f64 = 60.48e9;
/// 5 GHz Wi-Fi channel 36 center frequency.
pub const WIFI_CARRIER_HZ: f64 = 5.18e9;
pub const THERMAL_DENSITY_DBM_HZ: f64 = -174.0;
/// Path loss is evaluated no closer than this.
pub const MIN_DISTANCE_M: f64 = 0.1;

pub fn db_to_linear(db: f64) -> f64 {
    math::powf(10.0, db / 10.0)
}

/// Linear power ratio to dB; zero maps to negative infinity.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * math::log10(lin)
}

/// Sectored transmit pattern: Gaussian main lobe over a sidelobe floor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AntennaPattern {
    pub peak_gain_dbi: f64,
    pub hpbw_rad: f64,
    pub sidelobe_floor_dbi: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self { peak_gain_dbi: 25.0, hpbw_rad: 30f64.to_radians(), sidelobe_floor_dbi: -10.0 }
    }
}

impl AntennaPattern {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_gain_dbi > self.sidelobe_floor_dbi) {
            return Err(Error::Config("antenna peak gain must exceed the sidelobe floor".into()));
        }
        if !(self.hpbw_rad > 0.0 && self.hpbw_rad < core::f64::consts::PI) {
            return Err(Error::Config(format!("half-power beamwidth {} rad outside (0, pi)", self.hpbw_rad)));
        }
        Ok(())
    }
}

/// Gain toward a direction `offset` radians off boresight.
pub fn antenna_gain(pattern: &AntennaPattern, offset: f64) -> f64 {
    let r = offset / pattern.hpbw_rad;
    (pattern.peak_gain_dbi - 12.0 * r * r).max(pattern.sidelobe_floor_dbi)
}

/// Friis free-space loss `20 log10(4 pi d f / c)`, distance clamped at 0.1 m.
pub fn path_loss_db(distance_m: f64, freq_hz: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    20.0 * math::log10(4.0 * core::f64::consts::PI * d * freq_hz / SPEED_OF_LIGHT_M_S)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McsEntry {
    pub index: u8,
    pub phy_rate_mbps: f64,
    pub min_snr_db: f64,
}

/// MCS ladder ordered by rate; entry 0 is the control MCS.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl Default for McsTable {
    /// SC-PHY rates with artifact SNR thresholds (not measured values).
    fn default() -> Self {
        let e = |index, phy_rate_mbps, min_snr_db| McsEntry { index, phy_rate_mbps, min_snr_db };
        Self {
            entries: alloc::vec![
                e(0, 27.5, 1.0),
                e(1, 385.0, 5.0),
                e(4, 1155.0, 9.0),
                e(5, 1251.25, 10.0),
                e(9, 2502.5, 15.0),
                e(12, 4620.0, 20.0),
            ],
        }
    }
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() || entries[0].index != 0 {
            return Err(Error::Config("MCS table must start with the control entry MCS 0".into()));
        }
        for w in entries.windows(2) {
            if !(w[1].phy_rate_mbps > w[0].phy_rate_mbps) || !(w[1].min_snr_db > w[0].min_snr_db) {
                return Err(Error::Config(format!(
                    "MCS {} -> {}: rates and thresholds must be strictly increasing",
                    w[0].index, w[1].index
                )));
            }
        }
        if entries.iter().any(|e| !e.phy_rate_mbps.is_finite() || !e.min_snr_db.is_finite()) {
            return Err(Error::Config("MCS table values must be finite".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn control(&self) -> &McsEntry {
        &self.entries[0]
    }

    pub fn by_index(&self, index: u8) -> Option<&McsEntry> {
        self.entries.iter().find(|e| e.index == index)
    }

    /// Highest-rate entry whose threshold is met, if any.
    pub fn for_snr(&self, snr_db: f64) -> Option<&McsEntry> {
        self.entries.iter().rev().find(|e| e.min_snr_db <= snr_db)
    }
}

/// MCS index supported at `snr_db`, `None` when even MCS 0 fails.
pub fn mcs_for_snr(table: &McsTable, snr_db: f64) -> Option<u8> {
    table.for_snr(snr_db).map(|e| e.index)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { noise_figure_db: 7.1, bandwidth_hz: 2.16e9 }
    }
}

pub fn noise_power_dbm(nm: &NoiseModel) -> f64 {
    THERMAL_DENSITY_DBM_HZ + 10.0 * math::log10(nm.bandwidth_hz) + nm.noise_figure_db
}

pub fn snr_db(p_signal_dbm: f64, p_noise_dbm: f64) -> f64 {
    p_signal_dbm - p_noise_dbm
}

/// Signal over the linear sum of interference and noise, in dB.
pub fn sinr_db(p_signal_dbm: f64, interferers_dbm: &[f64], p_noise_dbm: f64) -> f64 {
    let i_over_n: f64 = interferers_dbm.iter().map(|p| db_to_linear(*p - p_noise_dbm)).sum();
    snr_db(p_signal_dbm, p_noise_dbm) - linear_to_db(1.0 + i_over_n)
}

/// Received power and the MCS it supports, for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub rx_power_dbm: f64,
    pub snr_db: f64,
    pub mcs: Option<u8>,
}

impl LinkBudget {
    pub fn evaluate(rx_power_dbm: f64, noise_dbm: f64, table: &McsTable) -> Self {
        let snr = snr_db(rx_power_dbm, noise_dbm);
        Self { rx_power_dbm, snr_db: snr, mcs: mcs_for_snr(table, snr) }
    }
}

/// Optional per-link human blockage, off by default.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockageConfig {
    pub enabled: bool,
    pub mean_blocked_s: f64,
    pub mean_unblocked_s: f64,
    pub loss_db: f64,
}

impl Default for BlockageConfig {
    fn default() -> Self {
        Self { enabled: false, mean_blocked_s: 0.3, mean_unblocked_s: 3.0, loss_db: 30.0 }
    }
}

/// Spatially correlated log-normal shadowing for the 5 GHz band.
///
/// Standard normal values are hashed onto a square lattice per AP and
/// blended bilinearly, renormalized so the marginal deviation stays
/// `sigma_db` everywhere. Equal positions always see equal shadowing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingField {
    pub sigma_db: f64,
    pub cell_m: f64,
    pub seed: u64,
}

impl ShadowingField {
    pub fn at(&self, ap_id: usize, p: Point3) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let (gx, gy) = (p.x / self.cell_m, p.y / self.cell_m);
        let (ix, iy) = (math::floor(gx), math::floor(gy));
        let (fx, fy) = (gx - ix, gy - iy);
        let base = derive_seed(self.seed, "shadowing", ap_id as u64);
        let node = |i: f64, j: f64| {
            let key = mix64(base ^ mix64(i as i64 as u64)) ^ mix64((j as i64 as u64).wrapping_mul(0x9e37_79b9));
            hashed_standard_normal(key)
        };
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        let g = [node(ix, iy), node(ix + 1.0, iy), node(ix, iy + 1.0), node(ix + 1.0, iy + 1.0)];
        let num: f64 = w.iter().zip(g).map(|(w, g)| w * g).sum();
        let norm = math::sqrt(w.iter().map(|w| w * w).sum());
        self.sigma_db * num / norm
    }
}

/// Radio parameters shared by learning, coordination and the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub pattern: AntennaPattern,
    pub mcs: McsTable,
    pub noise: NoiseModel,
    pub mmw_freq_hz: f64,
    pub wifi_freq_hz: f64,
    /// Quasi-omni receive gain at every node.
    pub rx_gain_dbi: f64,
    /// UEs transmit quasi-omni at this power on 60 GHz.
    pub ue_tx_power_mmw_dbm: f64,
    pub wifi_shadowing_sigma_db: f64,
    pub shadowing_cell_m: f64,
    pub blockage: BlockageConfig,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            pattern: AntennaPattern::default(),
            mcs: McsTable::default(),
            noise: NoiseModel::default(),
            mmw_freq_hz: MMW_CARRIER_HZ,
            wifi_freq_hz: WIFI_CARRIER_HZ,
            rx_gain_dbi: 0.0,
            ue_tx_power_mmw_dbm: 10.0,
            wifi_shadowing_sigma_db: 2.0,
            shadowing_cell_m: 1.0,
            blockage: BlockageConfig::default(),
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        self.pattern.validate()?;
        if !(self.noise.bandwidth_hz > 0.0) {
            return Err(Error::Config("noise bandwidth must be positive".into()));
        }
        if !(self.mmw_freq_hz > 0.0 && self.wifi_freq_hz > 0.0) {
            return Err(Error::Config("carrier frequencies must be positive".into()));
        }
        if !(self.shadowing_cell_m > 0.0) || self.wifi_shadowing_sigma_db < 0.0 {
            return Err(Error::Config("shadowing cell must be positive and sigma non-negative".into()));
        }
        let b = &self.blockage;
        if b.enabled && !(b.mean_blocked_s > 0.0 && b.mean_unblocked_s > 0.0) {
            return Err(Error::Config("blockage durations must be positive".into()));
        }
        Ok(())
    }

    pub fn noise_dbm(&self) -> f64 {
        noise_power_dbm(&self.noise)
    }

    pub fn shadowing(&self, seed: u64) -> ShadowingField {
        ShadowingField { sigma_db: self.wifi_shadowing_sigma_db, cell_m: self.shadowing_cell_m, seed }
    }
}

/// 60 GHz power at `target` when `ap` transmits on `sector_id`.
pub fn rx_power_mmw(ap: &ApNode, sector_id: u16, target: Point3, radio: &RadioConfig) -> Result<f64> {
    let offset = angle_offset(ap, sector_id, target)?;
    let gain = antenna_gain(&radio.pattern, offset);
    let pl = path_loss_db(ap.position.distance(target), radio.mmw_freq_hz);
    Ok(ap.tx_power_mmw_dbm + gain + radio.rx_gain_dbi - pl)
}

/// 5 GHz RSS at `target` from an omni AP, with optional shadowing.
pub fn wifi_rss_dbm(ap: &ApNode, target: Point3, radio: &RadioConfig, shadowing: Option<&ShadowingField>) -> Result<f64> {
    let d = ap.position.distance(target);
    if d <= 1e-9 {
        return Err(Error::Geometry(format!("target coincides with AP {} position", ap.id)));
    }
    let shadow = shadowing.map_or(0.0, |s| s.at(ap.id, target));
    Ok(ap.tx_power_wifi_dbm - path_loss_db(d, radio.wifi_freq_hz) + shadow)
}
