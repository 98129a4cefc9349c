//! Pipeline configuration shared by the library entry points and the CLI.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::knn::{ContextMode, FeatureMask};
use crate::segment::SegmenterConfig;
use crate::trace::Action;

/// `k` for retrieval: a fixed value, or the count of the most frequent class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for KChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Auto => s.serialize_str("auto"),
            KChoice::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(usize),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(k) => Ok(KChoice::Fixed(k)),
            Repr::S(s) if s == "auto" => Ok(KChoice::Auto),
            Repr::S(s) => s
                .parse()
                .map(KChoice::Fixed)
                .map_err(|_| serde::de::Error::custom(format!("k must be a positive integer or \"auto\", got `{s}`"))),
        }
    }
}

/// How per-occurrence matching scores are combined within a class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingMode {
    /// Mean of the per-occurrence scores.
    #[default]
    PerOccurrence,
    /// Total matched overlap over total ground-truth length.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub segmenter: SegmenterConfig,
    pub features: FeatureConfig,
    /// Per-class mask overrides; classes not listed get the duration rule.
    pub masks: BTreeMap<Action, FeatureMask>,
    /// Classes whose mean annotated duration is below this many seconds use
    /// the Boolean-only mask by default.
    pub short_action_threshold: f64,
    pub k: KChoice,
    /// Per-class query segment (global id in dataset order).
    pub exemplars: BTreeMap<Action, usize>,
    pub context: ContextMode,
    pub matching: MatchingMode,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            segmenter: SegmenterConfig::default(),
            features: FeatureConfig::default(),
            masks: BTreeMap::new(),
            short_action_threshold: 2.0,
            k: KChoice::Auto,
            exemplars: BTreeMap::new(),
            context: ContextMode::PairwiseMax,
            matching: MatchingMode::PerOccurrence,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.segmenter.validate()?;
        self.features.validate()?;
        for m in self.masks.values() {
            m.validate()?;
        }
        if self.k == KChoice::Fixed(0) {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.short_action_threshold >= 0.0) {
            return Err(Error::InvalidConfig("short_action_threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: PipelineConfig = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Mask for `action` given its mean annotated duration.
    pub fn mask_for(&self, action: Action, mean_duration: f64) -> FeatureMask {
        self.masks.get(&action).copied().unwrap_or(if mean_duration < self.short_action_threshold {
            FeatureMask::BOOLEAN_ONLY
        } else {
            FeatureMask::FULL
        })
    }
}
