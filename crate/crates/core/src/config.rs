//! Experiment configuration files.
//!
//! A config is a TOML document with `[network]`, `[channel]`, `[service]`,
//! `[simulation]`, optional `[sweep]` and `[output]` sections. Omitted keys
//! take the desk-scale defaults. Ratios are written in dB (`snr_db`,
//! `sinr_threshold_db`, `shadowing_std_db`) and converted to linear values
//! once, when the file is validated.

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, ChannelConfig};
use crate::engine::{ServiceModel, SimulationPlan};
use crate::error::{Result, SimError};
use crate::routing::Protocol;
use crate::topology::NetworkConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub num_relays: usize,
    pub net_radius: f64,
    pub exclusion_radius: f64,
    pub source_dest_distance: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            num_relays: 200,
            net_radius: 1.0,
            exclusion_radius: 0.05,
            source_dest_distance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
    pub los_radius: f64,
    pub snr_db: f64,
    pub spreading_over_chip: f64,
    pub sinr_threshold_db: f64,
    pub reference_distance: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            path_loss_exponent: 3.5,
            shadowing_std_db: 8.0,
            los_radius: 0.2,
            snr_db: 0.0,
            spreading_over_chip: 48.0,
            sinr_threshold_db: 3.0,
            reference_distance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub relay_prob: f64,
    pub transmit_prob: f64,
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection {
            relay_prob: 0.3,
            transmit_prob: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub num_topologies: usize,
    pub trials_per_topology: usize,
    pub max_attempts: u32,
    pub link_delay: f64,
    pub excess_delay: f64,
    pub seed: u64,
    pub protocols: Vec<Protocol>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            num_topologies: 100,
            trials_per_topology: 400,
            max_attempts: 4,
            link_delay: 1.0,
            excess_delay: 1.0,
            seed: 1,
            protocols: Protocol::ALL.to_vec(),
        }
    }
}

/// One sweep axis, optionally repeated for each value of a series parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series_values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// The file as written, before unit conversion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentFile {
    pub network: NetworkSection,
    pub channel: ChannelSection,
    pub service: ServiceSection,
    pub simulation: SimulationSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    pub output: OutputSection,
}

/// Scalar keys that can be swept or overridden from the command line.
pub const PARAMETER_KEYS: [&str; 19] = [
    "num_relays",
    "net_radius",
    "exclusion_radius",
    "source_dest_distance",
    "path_loss_exponent",
    "shadowing_std_db",
    "los_radius",
    "snr_db",
    "spreading_over_chip",
    "sinr_threshold_db",
    "reference_distance",
    "relay_prob",
    "transmit_prob",
    "num_topologies",
    "trials_per_topology",
    "max_attempts",
    "link_delay",
    "excess_delay",
    "seed",
];

fn as_count(key: &str, v: f64) -> Result<u64> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(SimError::InvalidConfig(format!("{key} must be a non-negative integer, got {v}")))
    }
}

impl ExperimentFile {
    /// Sets a scalar parameter by key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "num_relays" => self.network.num_relays = as_count(key, value)? as usize,
            "net_radius" => self.network.net_radius = value,
            "exclusion_radius" => self.network.exclusion_radius = value,
            "source_dest_distance" => self.network.source_dest_distance = value,
            "path_loss_exponent" => self.channel.path_loss_exponent = value,
            "shadowing_std_db" => self.channel.shadowing_std_db = value,
            "los_radius" => self.channel.los_radius = value,
            "snr_db" => self.channel.snr_db = value,
            "spreading_over_chip" => self.channel.spreading_over_chip = value,
            "sinr_threshold_db" => self.channel.sinr_threshold_db = value,
            "reference_distance" => self.channel.reference_distance = value,
            "relay_prob" => self.service.relay_prob = value,
            "transmit_prob" => self.service.transmit_prob = value,
            "num_topologies" => self.simulation.num_topologies = as_count(key, value)? as usize,
            "trials_per_topology" => self.simulation.trials_per_topology = as_count(key, value)? as usize,
            "max_attempts" => {
                self.simulation.max_attempts = u32::try_from(as_count(key, value)?)
                    .map_err(|_| SimError::InvalidConfig(format!("{key} out of range: {value}")))?
            }
            "link_delay" => self.simulation.link_delay = value,
            "excess_delay" => self.simulation.excess_delay = value,
            "seed" => self.simulation.seed = as_count(key, value)?,
            other => return Err(SimError::InvalidConfig(format!("unknown parameter {other:?}"))),
        }
        Ok(())
    }

    /// Command-line form of [`set`](Self::set). Seeds are parsed as integers
    /// so that the full 64-bit range survives.
    pub fn set_str(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "seed" {
            self.simulation.seed = value
                .trim()
                .parse()
                .map_err(|e| SimError::InvalidConfig(format!("seed: {e}")))?;
            return Ok(());
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|e| SimError::InvalidConfig(format!("{key}: cannot parse {value:?}: {e}")))?;
        self.set(key, v)
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        Ok(match key {
            "num_relays" => self.network.num_relays as f64,
            "net_radius" => self.network.net_radius,
            "exclusion_radius" => self.network.exclusion_radius,
            "source_dest_distance" => self.network.source_dest_distance,
            "path_loss_exponent" => self.channel.path_loss_exponent,
            "shadowing_std_db" => self.channel.shadowing_std_db,
            "los_radius" => self.channel.los_radius,
            "snr_db" => self.channel.snr_db,
            "spreading_over_chip" => self.channel.spreading_over_chip,
            "sinr_threshold_db" => self.channel.sinr_threshold_db,
            "reference_distance" => self.channel.reference_distance,
            "relay_prob" => self.service.relay_prob,
            "transmit_prob" => self.service.transmit_prob,
            "num_topologies" => self.simulation.num_topologies as f64,
            "trials_per_topology" => self.simulation.trials_per_topology as f64,
            "max_attempts" => self.simulation.max_attempts as f64,
            "link_delay" => self.simulation.link_delay,
            "excess_delay" => self.simulation.excess_delay,
            "seed" => self.simulation.seed as f64,
            other => return Err(SimError::InvalidConfig(format!("unknown parameter {other:?}"))),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::Parse(e.to_string()))
    }
}

/// A validated experiment: the file as written plus the derived linear-scale
/// configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub file: ExperimentFile,
    pub network: NetworkConfig,
    pub channel: ChannelConfig,
    pub service: ServiceModel,
    pub plan: SimulationPlan,
}

impl ExperimentConfig {
    pub fn from_file(file: ExperimentFile) -> Result<Self> {
        let cfg = Self::base(file)?;
        if let Some(sweep) = &cfg.file.sweep {
            validate_sweep(&cfg.file, sweep)?;
        }
        Ok(cfg)
    }

    /// Validates a single point, ignoring any sweep.
    fn base(file: ExperimentFile) -> Result<Self> {
        let n = &file.network;
        let network = NetworkConfig::new(n.num_relays, n.net_radius, n.exclusion_radius, n.source_dest_distance);
        network.validate()?;
        let c = &file.channel;
        let channel = ChannelConfig {
            path_loss_exponent: c.path_loss_exponent,
            shadowing_std_db: c.shadowing_std_db,
            los_radius: c.los_radius,
            snr: db_to_linear(c.snr_db),
            spreading_over_chip: c.spreading_over_chip,
            sinr_threshold: db_to_linear(c.sinr_threshold_db),
            reference_distance: c.reference_distance,
        };
        channel.validate(&network)?;
        let service = ServiceModel {
            relay_prob: file.service.relay_prob,
            transmit_prob: file.service.transmit_prob,
        };
        service.validate()?;
        let s = &file.simulation;
        let plan = SimulationPlan {
            num_topologies: s.num_topologies,
            trials_per_topology: s.trials_per_topology,
            max_attempts: s.max_attempts,
            slot_delay: s.link_delay,
            excess_delay: s.excess_delay,
            master_seed: s.seed,
            protocols: s.protocols.clone(),
        };
        plan.validate()?;
        Ok(ExperimentConfig {
            file,
            network,
            channel,
            service,
            plan,
        })
    }

    /// The configuration at one sweep point, with the sweep removed.
    pub fn at_point(&self, series_value: Option<f64>, sweep_value: f64) -> Result<Self> {
        let sweep = self
            .file
            .sweep
            .as_ref()
            .ok_or_else(|| SimError::InvalidConfig("config has no [sweep] section".into()))?;
        let mut file = self.file.clone();
        file.sweep = None;
        if let (Some(key), Some(v)) = (&sweep.series_parameter, series_value) {
            file.set(key, v)?;
        }
        file.set(&sweep.parameter, sweep_value)?;
        Self::base(file)
    }

    /// The configuration with any sweep section dropped.
    pub fn single_point(&self) -> Self {
        let mut c = self.clone();
        c.file.sweep = None;
        c
    }

    pub fn to_toml(&self) -> Result<String> {
        self.file.to_toml()
    }
}

fn validate_sweep(file: &ExperimentFile, sweep: &SweepSection) -> Result<()> {
    if !PARAMETER_KEYS.contains(&sweep.parameter.as_str()) {
        return Err(SimError::InvalidConfig(format!(
            "unknown sweep parameter {:?}",
            sweep.parameter
        )));
    }
    if sweep.values.is_empty() {
        return Err(SimError::InvalidConfig("sweep needs at least one value".into()));
    }
    let series: Vec<Option<f64>> = match &sweep.series_parameter {
        Some(key) => {
            if key == &sweep.parameter {
                return Err(SimError::InvalidConfig(
                    "series parameter must differ from the sweep parameter".into(),
                ));
            }
            if !PARAMETER_KEYS.contains(&key.as_str()) {
                return Err(SimError::InvalidConfig(format!("unknown series parameter {key:?}")));
            }
            if sweep.series_values.is_empty() {
                return Err(SimError::InvalidConfig("series needs at least one value".into()));
            }
            sweep.series_values.iter().map(|&v| Some(v)).collect()
        }
        None => {
            if !sweep.series_values.is_empty() {
                return Err(SimError::InvalidConfig(
                    "series_values given without series_parameter".into(),
                ));
            }
            vec![None]
        }
    };
    for s in &series {
        for &v in &sweep.values {
            let mut point = file.clone();
            point.sweep = None;
            if let (Some(key), Some(sv)) = (&sweep.series_parameter, s) {
                point.set(key, *sv)?;
            }
            point.set(&sweep.parameter, v)?;
            ExperimentConfig::base(point).map_err(|e| match e {
                SimError::InvalidConfig(msg) => SimError::InvalidConfig(format!(
                    "sweep point {}={v}: {msg}",
                    sweep.parameter
                )),
                other => other,
            })?;
        }
    }
    Ok(())
}

/// Parses and validates a config document. Syntax errors carry the line and
/// column reported by the TOML parser.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let file: ExperimentFile = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    ExperimentConfig::from_file(file)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// Names of the shipped figure presets.
        pub const PRESET_NAMES: &[&str] = &[$($name),*];

        /// Source text of a shipped preset.
        pub fn preset_text(name: &str) -> Option<&'static str> {
            match name {
                $($name => Some(include_str!(concat!("../presets/", $name, ".toml"))),)*
                _ => None,
            }
        }
    };
}

presets!(
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6",
    "desk-fig1", "desk-fig2", "desk-fig3", "desk-fig4", "desk-fig5", "desk-fig6",
);

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| {
        SimError::InvalidConfig(format!(
            "unknown preset {name:?}; available: {}",
            PRESET_NAMES.join(", ")
        ))
    })?;
    parse_config(text)
}
