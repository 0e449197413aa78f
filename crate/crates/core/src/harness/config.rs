//! Experiment configuration files (TOML).

use crate::asymptotic::AchGrid;
use crate::error::{Error, Result};
use crate::joint::JointDecoderConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Monte-Carlo trials per point: slots or frames for simulations, draws for bounds.
    pub trials: usize,
    /// Output directory for data files and the result record.
    pub output: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Data-file stem (or prefix for multi-curve experiments).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    SimulateSlot(SlotExperiment),
    SimulateFrame(FrameExperiment),
    BoundFblAch(FblAchExperiment),
    BoundConverse(ConverseExperiment),
    BoundAsymptotic(AsymptoticExperiment),
    OptimizeAloha(AlohaExperiment),
    BoundShamaiBettesh(ShamaiBetteshExperiment),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::SimulateSlot(_) => "simulate-slot",
            Experiment::SimulateFrame(_) => "simulate-frame",
            Experiment::BoundFblAch(_) => "bound-fbl-ach",
            Experiment::BoundConverse(_) => "bound-converse",
            Experiment::BoundAsymptotic(_) => "bound-asymptotic",
            Experiment::OptimizeAloha(_) => "optimize-aloha",
            Experiment::BoundShamaiBettesh(_) => "bound-shamai-bettesh",
        }
    }
}

/// What the slot decoder is told.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotMode {
    /// `max_users` branches, unknown occupancy.
    #[default]
    Blind,
    /// One branch per transmitted user.
    KnownK,
    /// Known occupancy and fading coefficients.
    KnownH,
}

/// Slot PUPE of the joint decoder versus Eb/N0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotExperiment {
    /// Bundled code name or alist path.
    pub code: String,
    pub users: usize,
    #[serde(default)]
    pub mode: SlotMode,
    pub ebn0_db: Vec<f64>,
    #[serde(default)]
    pub decoder: JointDecoderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FrameDecoder {
    /// Per-user miss probability `miss[r - 1]` for occupancy `r`.
    Genie { miss: Vec<f64> },
    /// Joint LDPC decoder; the slot length must equal the code length.
    Ldpc {
        code: String,
        #[serde(default)]
        mode: SlotMode,
        #[serde(default)]
        config: JointDecoderConfig,
    },
}

/// Frame PUPE of T-fold ALOHA versus Eb/N0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameExperiment {
    pub frame_length: usize,
    pub slots: usize,
    pub active_users: usize,
    pub max_per_slot: usize,
    pub payload_bits: usize,
    pub ebn0_db: Vec<f64>,
    pub decoder: FrameDecoder,
}

/// Projection-decoder random-coding bound for one slot versus Eb/N0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FblAchExperiment {
    pub slot_length: usize,
    pub payload_bits: usize,
    pub users: usize,
    pub ebn0_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConverseSweep {
    /// Smallest Eb/N0 meeting `target_pupe`, per user count.
    MinEbn0 { active_users: Vec<usize>, target_pupe: f64 },
    /// Smallest achievable error with `users` users, per Eb/N0.
    ErrorCurve { users: usize, ebn0_db: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverseExperiment {
    pub block_length: usize,
    pub payload_bits: usize,
    pub sweep: ConverseSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticCurve {
    Achievability,
    Optimal,
    Converse,
    ConverseIid,
}

impl AsymptoticCurve {
    pub const ALL: [AsymptoticCurve; 4] =
        [AsymptoticCurve::Achievability, AsymptoticCurve::Optimal, AsymptoticCurve::Converse, AsymptoticCurve::ConverseIid];

    pub fn file_stem(&self) -> &'static str {
        match self {
            AsymptoticCurve::Achievability => "achievability",
            AsymptoticCurve::Optimal => "optimal",
            AsymptoticCurve::Converse => "converse",
            AsymptoticCurve::ConverseIid => "converse_iid",
        }
    }
}

fn all_curves() -> Vec<AsymptoticCurve> {
    AsymptoticCurve::ALL.to_vec()
}

/// Energy-per-bit curves versus user density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticExperiment {
    pub log2_m1: f64,
    pub target_pupe: f64,
    pub user_density: Vec<f64>,
    #[serde(default = "all_curves")]
    pub curves: Vec<AsymptoticCurve>,
    #[serde(default)]
    pub grid: AchGrid,
    /// When set, rows are emitted against `K_a = μ n` for this block length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_length: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SlotModel {
    /// Normal approximation averaged over fading.
    NormalApprox,
    /// Treating interference as noise.
    Tin,
    /// Projection-decoder bound at the slot count chosen by the normal approximation.
    Fbl,
    /// Measured joint-decoder slot errors; the slot length is fixed by each code.
    Ldpc {
        codes: Vec<String>,
        #[serde(default)]
        mode: SlotMode,
        #[serde(default)]
        config: JointDecoderConfig,
    },
}

/// Minimum Eb/N0 of T-fold ALOHA per user count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlohaExperiment {
    pub frame_length: usize,
    pub payload_bits: usize,
    pub max_per_slot: usize,
    pub target_pupe: f64,
    pub active_users: Vec<usize>,
    /// Use the genie-aided bound.
    #[serde(default)]
    pub genie: bool,
    pub model: SlotModel,
    #[serde(default = "default_min_slot_length")]
    pub min_slot_length: usize,
    pub ebn0_min_db: f64,
    pub ebn0_max_db: f64,
    #[serde(default = "default_step_db")]
    pub ebn0_step_db: f64,
}

fn default_min_slot_length() -> usize {
    100
}

fn default_step_db() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShamaiBetteshExperiment {
    pub frame_length: usize,
    pub payload_bits: usize,
    pub target_pupe: f64,
    pub active_users: Vec<usize>,
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

/// The backticked name following `marker` in a deserializer message.
fn quoted_after<'a>(message: &'a str, marker: &str) -> Option<&'a str> {
    let rest = &message[message.find(marker)? + marker.len()..];
    let start = rest.find('`')? + 1;
    let len = rest[start..].find('`')?;
    Some(&rest[start..start + len])
}

fn check_grid(key: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(config_error(key, "grid is empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(config_error(key, "grid values must be finite"));
    }
    Ok(())
}

fn check_fraction(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(config_error(key, "must lie in (0, 1)"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let key = quoted_after(&msg, "unknown field")
                .or_else(|| quoted_after(&msg, "missing field"))
                .or_else(|| quoted_after(&msg, "unknown variant"))
                .map(str::to_string)
                .unwrap_or_default();
            config_error(&key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, ignoring where and how it runs.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { output: PathBuf::new(), workers: None, ..self.clone() };
        let digest = Sha256::digest(serde_json::to_vec(&canonical).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_error("trials", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(config_error("workers", "must be positive"));
        }
        match &self.experiment {
            Experiment::SimulateSlot(s) => {
                check_grid("ebn0_db", &s.ebn0_db)?;
                if s.users == 0 {
                    return Err(config_error("users", "must be positive"));
                }
                s.decoder.validate().map_err(|e| config_error("decoder", e.to_string()))?;
            }
            Experiment::SimulateFrame(f) => {
                check_grid("ebn0_db", &f.ebn0_db)?;
                if f.slots == 0 || f.frame_length / f.slots == 0 {
                    return Err(config_error("slots", "need 1 <= slots <= frame_length"));
                }
                if f.payload_bits == 0 || f.payload_bits > 127 {
                    return Err(config_error("payload_bits", "must lie in 1..=127"));
                }
                match &f.decoder {
                    FrameDecoder::Genie { miss } => {
                        if miss.len() < f.max_per_slot || miss.iter().any(|p| !(0.0..=1.0).contains(p)) {
                            return Err(config_error("miss", "need max_per_slot probabilities in [0, 1]"));
                        }
                    }
                    FrameDecoder::Ldpc { config, .. } => {
                        config.validate().map_err(|e| config_error("config", e.to_string()))?;
                    }
                }
            }
            Experiment::BoundFblAch(b) => {
                check_grid("ebn0_db", &b.ebn0_db)?;
                if b.users == 0 || b.slot_length <= b.users {
                    return Err(config_error("users", "need 1 <= users < slot_length"));
                }
            }
            Experiment::BoundConverse(c) => {
                if c.block_length < 2 || c.payload_bits == 0 {
                    return Err(config_error("block_length", "need block_length >= 2 and payload_bits >= 1"));
                }
                match &c.sweep {
                    ConverseSweep::MinEbn0 { active_users, target_pupe } => {
                        check_fraction("target_pupe", *target_pupe)?;
                        if active_users.is_empty() || active_users.contains(&0) {
                            return Err(config_error("active_users", "need a nonempty list of positive counts"));
                        }
                    }
                    ConverseSweep::ErrorCurve { users, ebn0_db } => {
                        check_grid("ebn0_db", ebn0_db)?;
                        if *users == 0 {
                            return Err(config_error("users", "must be positive"));
                        }
                    }
                }
            }
            Experiment::BoundAsymptotic(a) => {
                check_fraction("target_pupe", a.target_pupe)?;
                check_grid("user_density", &a.user_density)?;
                if a.user_density.iter().any(|&m| m <= 0.0) {
                    return Err(config_error("user_density", "must be positive"));
                }
                if !(a.log2_m1 >= 1.0) {
                    return Err(config_error("log2_m1", "must be at least 1"));
                }
                if a.curves.is_empty() {
                    return Err(config_error("curves", "no curves requested"));
                }
            }
            Experiment::OptimizeAloha(a) => {
                check_fraction("target_pupe", a.target_pupe)?;
                if a.active_users.is_empty() || a.active_users.contains(&0) {
                    return Err(config_error("active_users", "need a nonempty list of positive counts"));
                }
                if a.max_per_slot == 0 {
                    return Err(config_error("max_per_slot", "must be positive"));
                }
                if !(a.ebn0_max_db > a.ebn0_min_db && a.ebn0_step_db > 0.0) {
                    return Err(config_error("ebn0_max_db", "need an increasing Eb/N0 window and a positive step"));
                }
                if a.payload_bits == 0 || a.payload_bits > 1000 {
                    return Err(config_error("payload_bits", "must lie in 1..=1000"));
                }
                if let SlotModel::Ldpc { codes, config, .. } = &a.model {
                    if codes.is_empty() {
                        return Err(config_error("codes", "need at least one code"));
                    }
                    config.validate().map_err(|e| config_error("config", e.to_string()))?;
                }
            }
            Experiment::BoundShamaiBettesh(s) => {
                check_fraction("target_pupe", s.target_pupe)?;
                if s.active_users.is_empty() || s.active_users.contains(&0) {
                    return Err(config_error("active_users", "need a nonempty list of positive counts"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SLOT: &str = r#"
seed = 7
trials = 100
output = "out/slot"

[experiment]
kind = "simulate-slot"
code = "ldpc_128_64"
users = 2
ebn0_db = [4.0, 6.5]

[experiment.decoder]
max_users = 4
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SLOT).unwrap();
        assert_eq!(cfg.experiment.kind(), "simulate-slot");
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn hash_ignores_output_and_workers() {
        let cfg = ExperimentConfig::from_toml(SLOT).unwrap();
        let moved = ExperimentConfig { output: "elsewhere".into(), workers: Some(3), ..cfg.clone() };
        assert_eq!(cfg.hash(), moved.hash());
        let reseeded = ExperimentConfig { seed: 8, ..cfg.clone() };
        assert_ne!(cfg.hash(), reseeded.hash());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = SLOT.replace("users = 2", "users = 2\nfading_db = 3.0");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "fading_db"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = SLOT.replace("max_users = 4", "max_users = 4\nspeed = 1");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "speed"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_named() {
        let text = SLOT.replace("ebn0_db = [4.0, 6.5]", "ebn0_db = []");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "ebn0_db"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = SLOT.replace("kind = \"simulate-slot\"", "kind = \"simulate-everything\"");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn nested_tagged_sections() {
        let text = r#"
seed = 1
trials = 1000
output = "out/conv"

[experiment]
kind = "bound-converse"
block_length = 30000
payload_bits = 100

[experiment.sweep]
mode = "min-ebn0"
active_users = [50, 100]
target_pupe = 0.1
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
