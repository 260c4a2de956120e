//! Run configuration shared by every command.
//!
//! A TOML file with one section per stage. Every section is optional and
//! falls back to its defaults. The SHA-256 of the canonical JSON form, after
//! command-line overrides, stamps every output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aggregation::{GbdtParams, ModelKind, WalkForwardPlan};
use crate::attribution::{NwLags, Units};
use crate::backtest::CostModel;
use crate::discovery::{CampaignConfig, LlmConfig, SplitSpec};
use crate::panel::ScreenConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Raw panel CSV read by `ingest`.
    pub panel: PathBuf,
    /// Benchmark factor returns read by `attribute`.
    pub benchmark: Option<PathBuf>,
    /// Optional comparison factor set, one expression per line.
    pub baseline_factors: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            panel: PathBuf::from("panel.csv"),
            benchmark: None,
            baseline_factors: None,
            out: PathBuf::from("out"),
        }
    }
}

/// `preset = "..."` or the four explicit dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSection {
    Preset { preset: String },
    Dates(SplitSpec),
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection::Preset {
            preset: "oos-2021".into(),
        }
    }
}

impl SplitSection {
    pub fn resolve(&self) -> Result<SplitSpec, ConfigError> {
        match self {
            SplitSection::Preset { preset } => SplitSpec::preset(preset)
                .ok_or_else(|| ConfigError::Invalid(format!("unknown split preset {preset:?}"))),
            SplitSection::Dates(s) => {
                s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(*s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Equal,
    Linear,
    #[default]
    Gbdt,
}

impl std::str::FromStr for ModelChoice {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equal" => Ok(ModelChoice::Equal),
            "linear" => Ok(ModelChoice::Linear),
            "gbdt" => Ok(ModelChoice::Gbdt),
            _ => Err(ConfigError::Invalid(format!("unknown model {s:?}; use linear, gbdt or equal"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationSection {
    pub model: ModelChoice,
    pub ridge: f64,
    pub gbdt: GbdtParams,
    pub walk_forward: WalkForwardPlan,
}

impl Default for AggregationSection {
    fn default() -> Self {
        Self {
            model: ModelChoice::Gbdt,
            ridge: 0.0,
            gbdt: GbdtParams::default(),
            walk_forward: WalkForwardPlan::default(),
        }
    }
}

impl AggregationSection {
    pub fn kind(&self, choice: ModelChoice) -> ModelKind {
        match choice {
            ModelChoice::Equal => ModelKind::EqualWeight,
            ModelChoice::Linear => ModelKind::Linear { ridge: self.ridge },
            ModelChoice::Gbdt => ModelKind::Gbdt(self.gbdt.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributionSection {
    /// Newey-West lag count; absent means the automatic rule.
    pub nw_lags: Option<usize>,
    pub units: Units,
}

impl Default for AttributionSection {
    fn default() -> Self {
        Self {
            nw_lags: Some(crate::attribution::DEFAULT_NW_LAGS),
            units: Units::Percent,
        }
    }
}

impl AttributionSection {
    pub fn lags(&self) -> NwLags {
        self.nw_lags.map_or(NwLags::Auto, NwLags::Fixed)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub split: SplitSection,
    pub screen: ScreenConfig,
    pub campaign: CampaignConfig,
    pub llm: LlmConfig,
    pub aggregation: AggregationSection,
    pub cost: CostModel,
    pub attribution: AttributionSection,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })
    }

    /// Reads `path`; relative paths inside the file resolve against its directory.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.paths.panel);
        rebase(&mut cfg.paths.out);
        if let Some(p) = cfg.paths.benchmark.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.paths.baseline_factors.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    /// Checks every section that has its own validation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.split.resolve()?;
        self.screen.validate().map_err(|e| invalid(e.to_string()))?;
        self.campaign.gate.validate().map_err(|e| invalid(e.to_string()))?;
        self.aggregation.gbdt.validate().map_err(|e| invalid(e.to_string()))?;
        self.aggregation.walk_forward.validate().map_err(|e| invalid(e.to_string()))?;
        self.cost.validate().map_err(|e| invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.campaign.generator.p_exploit) {
            return Err(invalid("generator.p_exploit must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, truncated to 16 characters.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let c = RunConfig::parse("", Path::new("x.toml")).unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
            [paths]
            panel = "data/p.csv"
            [split]
            is_start = "2010-01-01"
            is_end = "2015-12-31"
            oos_start = "2016-01-01"
            oos_end = "2017-12-31"
            [campaign]
            rounds = 2
            [campaign.gate]
            tau_sig = 2.5
            [aggregation]
            model = "linear"
            [aggregation.walk_forward]
            train_window = 100
            [cost]
            one_way_bps = 5.0
        "#;
        let c = RunConfig::parse(text, Path::new("x.toml")).unwrap();
        assert_eq!(c.campaign.rounds, 2);
        assert_eq!(c.campaign.gate.tau_sig, 2.5);
        assert_eq!(c.aggregation.model, ModelChoice::Linear);
        assert_eq!(c.aggregation.walk_forward.train_window, 100);
        assert_eq!(c.aggregation.walk_forward.embargo, 1);
        assert_eq!(c.cost.one_way_bps, 5.0);
        assert_eq!(c.split.resolve().unwrap().oos_end.to_string(), "2017-12-31");
    }

    #[test]
    fn preset_split_and_unknown_fields() {
        let c = RunConfig::parse("[split]\npreset = \"oos-2023\"\n", Path::new("x.toml")).unwrap();
        assert_eq!(c.split.resolve().unwrap().oos_start.to_string(), "2023-01-01");
        let bad = RunConfig::parse("[split]\npreset = \"nope\"\n", Path::new("x.toml")).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.campaign.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
