//! Scenario parameters: layout, MAC timing, traffic and online learning.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::event::{secs_to_ns, us_to_ns, SimTime};
use crate::environment::{
    auto_ap_positions, default_sector_layout, generate_lp_grid, ApNode, Environment, Point3, Room,
    DEFAULT_TERMINAL_HEIGHT_M,
};
use crate::error::{Error, Result};
use crate::learning::AffinityParams;
use crate::radio::RadioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum UePlacement {
    /// Uniform over the floor at terminal height, away from the walls.
    #[default]
    Random,
    /// On learning points, spread evenly over the LP list.
    Lps,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LayoutConfig {
    pub room: Room,
    pub num_aps: usize,
    /// Explicit AP positions; the ceiling grid is used when absent.
    pub ap_positions: Option<Vec<Point3>>,
    pub num_ues: usize,
    pub ue_placement: UePlacement,
    /// Explicit UE positions, overriding `ue_placement`.
    pub ue_positions: Option<Vec<Point3>>,
    pub num_lps: usize,
    pub num_sectors: usize,
    pub terminal_height_m: f64,
    pub tx_power_mmw_dbm: f64,
    pub tx_power_wifi_dbm: f64,
    /// Minimum distance of random UEs from the walls.
    pub wall_margin_m: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            room: Room::default(),
            num_aps: 8,
            ap_positions: None,
            num_ues: 24,
            ue_placement: UePlacement::Random,
            ue_positions: None,
            num_lps: 90,
            num_sectors: 36,
            terminal_height_m: DEFAULT_TERMINAL_HEIGHT_M,
            tx_power_mmw_dbm: 10.0,
            tx_power_wifi_dbm: 20.0,
            wall_margin_m: 0.5,
        }
    }
}

impl LayoutConfig {
    /// Builds the environment; random UE positions come from the
    /// `placement` substream of `seed`.
    pub fn build_environment(&self, seed: u64) -> Result<Environment> {
        let room = self.room;
        let ap_pos = match &self.ap_positions {
            Some(p) if p.len() != self.num_aps => {
                return Err(Error::Config(format!(
                    "{} AP positions given for num_aps = {}",
                    p.len(),
                    self.num_aps
                )));
            }
            Some(p) => p.clone(),
            None => auto_ap_positions(&room, self.num_aps)?,
        };
        let sectors = default_sector_layout(self.num_sectors)?;
        let aps = ap_pos
            .into_iter()
            .enumerate()
            .map(|(i, p)| ApNode::new(i, p, sectors.clone(), self.tx_power_mmw_dbm, self.tx_power_wifi_dbm))
            .collect::<Result<Vec<_>>>()?;
        let lps = generate_lp_grid(&room, self.num_lps, self.terminal_height_m)?;
        let ues = match &self.ue_positions {
            Some(p) if p.len() != self.num_ues => {
                return Err(Error::Config(format!(
                    "{} UE positions given for num_ues = {}",
                    p.len(),
                    self.num_ues
                )));
            }
            Some(p) => p.clone(),
            None => match self.ue_placement {
                UePlacement::Lps => {
                    (0..self.num_ues).map(|i| lps[(2 * i + 1) * lps.len() / (2 * self.num_ues.max(1))]).collect()
                }
                UePlacement::Random => {
                    let m = self.wall_margin_m;
                    if !(2.0 * m < room.width && 2.0 * m < room.depth) {
                        return Err(Error::Config("wall margin leaves no floor for UEs".into()));
                    }
                    let mut rng = crate::rng::substream(seed, "placement", 0);
                    (0..self.num_ues)
                        .map(|_| {
                            let x = rng.random_range(m..room.width - m);
                            let y = rng.random_range(m..room.depth - m);
                            Point3::new(x, y, self.terminal_height_m)
                        })
                        .collect()
                }
            },
        };
        Environment::new(room, aps, lps, ues)
    }
}

/// MAC timing and protocol knobs. Durations are in microseconds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MacConfig {
    pub sifs_us: f64,
    pub slot_us: f64,
    /// Gap between consecutive sweep frames.
    pub sbifs_us: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub ctrl_frame_us: f64,
    pub data_preamble_us: f64,
    pub brp_slot_us: f64,
    pub wifi_sifs_us: f64,
    pub wifi_slot_us: f64,
    pub wifi_ctrl_frame_us: f64,
    pub wired_delay_us: f64,
    pub beacon_interval_s: f64,
    pub max_retx: u8,
    pub max_aggregated_packets: usize,
    /// Longest DATA session one AP holds for one UE.
    pub txop_limit_us: f64,
    /// Frames in each responder sweep.
    pub responder_sweep_frames: usize,
    /// Minimum SINR a link needs to enter a centralized combination.
    pub rrh_min_sinr_db: f64,
    /// Association floor for centralized coordination.
    pub rrh_rss_floor_dbm: f64,
    /// Energy an uncoordinated AP must hear before it defers.
    pub cs_threshold_dbm: f64,
    /// Failed exchanges in a row after which an uncoordinated AP retrains
    /// the beam link with an exhaustive sweep; 0 never retrains.
    pub beam_failure_exchanges: u32,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            sifs_us: 3.0,
            slot_us: 5.0,
            sbifs_us: 1.0,
            cw_min: 16,
            cw_max: 1024,
            ctrl_frame_us: 15.0,
            data_preamble_us: 2.0,
            brp_slot_us: 10.0,
            wifi_sifs_us: 16.0,
            wifi_slot_us: 9.0,
            wifi_ctrl_frame_us: 40.0,
            wired_delay_us: 1.0,
            beacon_interval_s: 1.0,
            max_retx: 10,
            max_aggregated_packets: 64,
            txop_limit_us: 5000.0,
            responder_sweep_frames: 8,
            rrh_min_sinr_db: 5.0,
            rrh_rss_floor_dbm: -68.0,
            cs_threshold_dbm: -68.0,
            beam_failure_exchanges: 2,
        }
    }
}

/// [`MacConfig`] resolved to nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub sifs: SimTime,
    pub slot: SimTime,
    pub difs: SimTime,
    pub sbifs: SimTime,
    pub ctrl: SimTime,
    pub preamble: SimTime,
    pub brp_slot: SimTime,
    pub wifi_sifs: SimTime,
    pub wifi_slot: SimTime,
    pub wifi_difs: SimTime,
    pub wifi_pifs: SimTime,
    pub wifi_ctrl: SimTime,
    pub wired: SimTime,
    pub beacon_interval: SimTime,
    pub txop: SimTime,
}

impl MacConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sifs_us", self.sifs_us),
            ("slot_us", self.slot_us),
            ("ctrl_frame_us", self.ctrl_frame_us),
            ("brp_slot_us", self.brp_slot_us),
            ("wifi_sifs_us", self.wifi_sifs_us),
            ("wifi_slot_us", self.wifi_slot_us),
            ("wifi_ctrl_frame_us", self.wifi_ctrl_frame_us),
            ("beacon_interval_s", self.beacon_interval_s),
            ("txop_limit_us", self.txop_limit_us),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("{k} must be positive, got {v}")));
        }
        let non_negative =
            [("sbifs_us", self.sbifs_us), ("data_preamble_us", self.data_preamble_us), ("wired_delay_us", self.wired_delay_us)];
        if let Some((k, v)) = non_negative.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("{k} must be non-negative, got {v}")));
        }
        if self.cw_min == 0 || self.cw_max < self.cw_min {
            return Err(Error::Config(format!("need 0 < cw_min <= cw_max, got {} / {}", self.cw_min, self.cw_max)));
        }
        if self.max_aggregated_packets == 0 {
            return Err(Error::Config("max_aggregated_packets must be at least 1".into()));
        }
        Ok(())
    }

    pub fn timing(&self) -> Timing {
        let (sifs, slot) = (us_to_ns(self.sifs_us), us_to_ns(self.slot_us));
        let (wifi_sifs, wifi_slot) = (us_to_ns(self.wifi_sifs_us), us_to_ns(self.wifi_slot_us));
        Timing {
            sifs,
            slot,
            difs: sifs + 2 * slot,
            sbifs: us_to_ns(self.sbifs_us),
            ctrl: us_to_ns(self.ctrl_frame_us),
            preamble: us_to_ns(self.data_preamble_us),
            brp_slot: us_to_ns(self.brp_slot_us),
            wifi_sifs,
            wifi_slot,
            wifi_difs: wifi_sifs + 2 * wifi_slot,
            wifi_pifs: wifi_sifs + wifi_slot,
            wifi_ctrl: us_to_ns(self.wifi_ctrl_frame_us),
            wired: us_to_ns(self.wired_delay_us),
            beacon_interval: secs_to_ns(self.beacon_interval_s),
            txop: us_to_ns(self.txop_limit_us),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrafficConfig {
    /// Downlink offered load per UE.
    pub offered_load_bps: f64,
    pub packet_bits: u32,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { offered_load_bps: 1e9, packet_bits: 12_000 }
    }
}

/// Offline clustering and online coordination parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LearningConfig {
    pub damping: f64,
    pub max_iter: usize,
    pub convergence_window: usize,
    /// Number of estimated best beams, X.
    pub num_best_beams: usize,
    pub selection_gate_db2: f64,
    /// Standard deviation of each online RSS reading; 0 disables it.
    pub measurement_noise_db: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 200,
            convergence_window: 15,
            num_best_beams: 6,
            selection_gate_db2: crate::coordination::DEFAULT_SELECTION_GATE_DB2,
            measurement_noise_db: 1.0,
        }
    }
}

impl LearningConfig {
    pub fn affinity(&self) -> AffinityParams {
        AffinityParams {
            damping: self.damping,
            max_iter: self.max_iter,
            convergence_window: self.convergence_window,
            ..AffinityParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.damping) {
            return Err(Error::Config(format!("damping must be in [0.5, 1), got {}", self.damping)));
        }
        if self.num_best_beams == 0 || self.max_iter == 0 || self.convergence_window == 0 {
            return Err(Error::Config("num_best_beams, max_iter and convergence_window must be at least 1".into()));
        }
        if !(self.measurement_noise_db >= 0.0) || !(self.selection_gate_db2 >= 0.0) {
            return Err(Error::Config("measurement noise and selection gate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub env: Environment,
    pub radio: RadioConfig,
    pub mac: MacConfig,
    pub traffic: TrafficConfig,
    pub learning: LearningConfig,
    pub horizon_s: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.mac.validate()?;
        self.learning.validate()?;
        if !(self.horizon_s > 0.0) || !self.horizon_s.is_finite() {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon_s)));
        }
        if !(self.traffic.offered_load_bps > 0.0) || self.traffic.packet_bits == 0 {
            return Err(Error::Config("offered load and packet size must be positive".into()));
        }
        Ok(())
    }

    pub fn horizon_ns(&self) -> SimTime {
        secs_to_ns(self.horizon_s)
    }
}
