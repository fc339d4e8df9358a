//! Harness configuration file and CSV formatting conventions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::LossBenchConfig;
use crate::error::{Error, Result};
use crate::synth::SyntheticSpec;
use crate::tracker::TrackerConfig;

/// Top-level config: one JSON object mirroring the typed configs.
/// Unknown keys are rejected; omitted sections take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub tracker: TrackerConfig,
    pub synth: SyntheticSpec,
    pub bench: LossBenchConfig,
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: HarnessConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.synth.validate()?;
        self.bench.validate()
    }

    /// Apply one seed to every seeded component.
    pub fn override_seed(&mut self, seed: u64) {
        self.tracker.train.seed = seed;
        self.tracker.extractor.seed = seed;
        self.synth.seed = seed;
        self.bench.seed = seed;
    }
}

/// Canonical real formatting for emitted CSVs: "." decimal separator,
/// 17 significant digits, round-trip exact.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}
