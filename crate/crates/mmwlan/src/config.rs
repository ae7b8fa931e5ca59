//! TOML run configuration with every default filled in.

use mmwlan_core::environment::Point3;
use mmwlan_core::macsim::{LayoutConfig, LearningConfig, MacConfig, Protocol, Scenario, TrafficConfig};
use mmwlan_core::radio::{AntennaPattern, BlockageConfig, McsEntry, McsTable, NoiseModel, RadioConfig};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error};

/// Radio parameters as written in the file. The beamwidth is in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub peak_gain_dbi: f64,
    pub hpbw_deg: f64,
    pub sidelobe_floor_dbi: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub mmw_freq_hz: f64,
    pub wifi_freq_hz: f64,
    pub rx_gain_dbi: f64,
    pub ue_tx_power_mmw_dbm: f64,
    pub wifi_shadowing_sigma_db: f64,
    pub shadowing_cell_m: f64,
    pub blockage_enabled: bool,
    pub blockage_mean_blocked_s: f64,
    pub blockage_mean_unblocked_s: f64,
    pub blockage_loss_db: f64,
    pub mcs: Vec<McsEntry>,
}

impl Default for RadioSection {
    fn default() -> Self {
        let r = RadioConfig::default();
        Self {
            peak_gain_dbi: r.pattern.peak_gain_dbi,
            hpbw_deg: r.pattern.hpbw_rad.to_degrees(),
            sidelobe_floor_dbi: r.pattern.sidelobe_floor_dbi,
            noise_figure_db: r.noise.noise_figure_db,
            bandwidth_hz: r.noise.bandwidth_hz,
            mmw_freq_hz: r.mmw_freq_hz,
            wifi_freq_hz: r.wifi_freq_hz,
            rx_gain_dbi: r.rx_gain_dbi,
            ue_tx_power_mmw_dbm: r.ue_tx_power_mmw_dbm,
            wifi_shadowing_sigma_db: r.wifi_shadowing_sigma_db,
            shadowing_cell_m: r.shadowing_cell_m,
            blockage_enabled: r.blockage.enabled,
            blockage_mean_blocked_s: r.blockage.mean_blocked_s,
            blockage_mean_unblocked_s: r.blockage.mean_unblocked_s,
            blockage_loss_db: r.blockage.loss_db,
            mcs: r.mcs.entries().to_vec(),
        }
    }
}

impl RadioSection {
    pub fn to_radio(&self) -> mmwlan_core::Result<RadioConfig> {
        let radio = RadioConfig {
            pattern: AntennaPattern {
                peak_gain_dbi: self.peak_gain_dbi,
                hpbw_rad: self.hpbw_deg.to_radians(),
                sidelobe_floor_dbi: self.sidelobe_floor_dbi,
            },
            mcs: McsTable::new(self.mcs.clone())?,
            noise: NoiseModel { noise_figure_db: self.noise_figure_db, bandwidth_hz: self.bandwidth_hz },
            mmw_freq_hz: self.mmw_freq_hz,
            wifi_freq_hz: self.wifi_freq_hz,
            rx_gain_dbi: self.rx_gain_dbi,
            ue_tx_power_mmw_dbm: self.ue_tx_power_mmw_dbm,
            wifi_shadowing_sigma_db: self.wifi_shadowing_sigma_db,
            shadowing_cell_m: self.shadowing_cell_m,
            blockage: BlockageConfig {
                enabled: self.blockage_enabled,
                mean_blocked_s: self.blockage_mean_blocked_s,
                mean_unblocked_s: self.blockage_mean_unblocked_s,
                loss_db: self.blockage_loss_db,
            },
        };
        radio.validate()?;
        Ok(radio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// First CSV column of every row.
    pub scenario_id: String,
    pub protocols: Vec<Protocol>,
    /// AP counts swept by `sweep`; `run` uses `environment.num_aps`.
    pub ap_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub horizon_s: f64,
    pub out_dir: String,
    pub trace: bool,
    /// Worker threads for sweeps; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            scenario_id: "default".into(),
            protocols: vec![Protocol::Baseline, Protocol::Dualband],
            ap_counts: vec![2, 4, 6, 8],
            seeds: vec![1, 2, 3, 4, 5],
            horizon_s: 2.0,
            out_dir: "results".into(),
            trace: false,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub environment: LayoutConfig,
    pub radio: RadioSection,
    pub learning: LearningConfig,
    pub mac: MacConfig,
    pub traffic: TrafficConfig,
    pub run: RunSection,
}

impl RunConfig {
    /// Parses and validates `text`; errors carry the offending key and line.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let key = line.and_then(|l| key_on_line(text, l));
            ConfigError { key, line, message: e.message().to_string() }
        })?;
        cfg.check().map_err(|(section, message)| {
            let (key, line) = locate(text, section, &message);
            ConfigError { key, line, message: format!("[{section}] {message}") }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config { path: path.display().to_string(), error: e })
    }

    /// The resolved configuration, every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn check(&self) -> Result<(), (&'static str, String)> {
        let core = |section: &'static str| move |e: mmwlan_core::Error| (section, e.to_string());
        self.radio.to_radio().map_err(core("radio"))?;
        self.mac.validate().map_err(core("mac"))?;
        self.learning.validate().map_err(core("learning"))?;
        let env = &self.environment;
        if env.num_aps == 0 || env.num_lps == 0 || env.num_sectors == 0 {
            return Err(("environment", "num_aps, num_lps and num_sectors must be at least 1".into()));
        }
        let t = &self.traffic;
        if !(t.offered_load_bps > 0.0) || t.packet_bits == 0 {
            return Err(("traffic", "offered_load_bps and packet_bits must be positive".into()));
        }
        let r = &self.run;
        if !(r.horizon_s > 0.0 && r.horizon_s.is_finite()) {
            return Err(("run", format!("horizon_s must be positive, got {}", r.horizon_s)));
        }
        if r.protocols.is_empty() || r.seeds.is_empty() || r.ap_counts.is_empty() {
            return Err(("run", "protocols, seeds and ap_counts must not be empty".into()));
        }
        if r.ap_counts.contains(&0) {
            return Err(("run", "ap_counts entries must be at least 1".into()));
        }
        if r.threads == Some(0) {
            return Err(("run", "threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Scenario for one sweep point. Explicit AP positions are kept when
    /// their count matches, otherwise the ceiling grid is used.
    pub fn scenario(&self, num_aps: usize, seed: u64) -> mmwlan_core::Result<Scenario> {
        let mut layout = self.environment.clone();
        if layout.ap_positions.as_ref().is_some_and(|p| p.len() != num_aps) {
            layout.ap_positions = None;
        }
        layout.num_aps = num_aps;
        let sc = Scenario {
            env: layout.build_environment(seed)?,
            radio: self.radio.to_radio()?,
            mac: self.mac.clone(),
            traffic: self.traffic,
            learning: self.learning,
            horizon_s: self.run.horizon_s,
            seed,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn with_ap_positions(mut self, aps: Vec<Point3>) -> Self {
        self.environment.num_aps = aps.len();
        self.environment.ap_positions = Some(aps);
        self
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn key_on_line(text: &str, line: usize) -> Option<String> {
    let l = text.lines().nth(line - 1)?;
    let (k, _) = l.split_once('=')?;
    Some(k.trim().to_string())
}

/// Line of the first key in `[section]` that `message` names, else the
/// section header.
fn locate(text: &str, section: &str, message: &str) -> (Option<String>, Option<usize>) {
    let header = format!("[{section}]");
    let mut inside = false;
    let mut header_line = None;
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if t.starts_with('[') {
            inside = t == header;
            if inside {
                header_line = Some(i + 1);
            }
            continue;
        }
        if !inside {
            continue;
        }
        if let Some((k, _)) = t.split_once('=') {
            let k = k.trim();
            let named = message
                .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .any(|w| w == k);
            if named {
                return (Some(k.to_string()), Some(i + 1));
            }
        }
    }
    (None, header_line)
}
