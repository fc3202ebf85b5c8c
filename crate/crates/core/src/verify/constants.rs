//! Regression constants: the largest ratios observed by a pilot search, and
//! the thresholds derived from them.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verify::eval::Objective;
use crate::verify::params::InstanceParams;
use crate::verify::search::{search, SearchConfig};
use crate::weights::Regime;

/// The committed pilot output.
pub const EMBEDDED_PILOT: &str = include_str!("../../data/pilot_constants.json");

pub const DEFAULT_TOLERANCE: f64 = 0.05;

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

pub fn theorem_key(m: usize, regime: Regime) -> String {
    format!("m{m}/{regime}")
}

pub fn maximal_key(m: usize) -> String {
    format!("m{m}")
}

/// A list of searches; theorem searches must each name a regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub theorem: Vec<SearchConfig>,
    #[serde(default)]
    pub maximal: Vec<SearchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotEntry {
    pub ratio: f64,
    pub instance: InstanceParams,
    pub resolution: u32,
    pub restarts: usize,
    pub steps: usize,
    pub seed: u64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotConstants {
    pub tolerance: f64,
    pub theorem: BTreeMap<String, PilotEntry>,
    pub maximal: BTreeMap<String, PilotEntry>,
}

impl PilotConstants {
    pub fn reference(&self) -> ReferenceConstants {
        ReferenceConstants {
            tolerance: self.tolerance,
            theorem: self
                .theorem
                .iter()
                .map(|(k, e)| (k.clone(), e.ratio))
                .collect(),
            maximal: self
                .maximal
                .iter()
                .map(|(k, e)| (k.clone(), e.ratio))
                .collect(),
        }
    }
}

pub fn run_pilot(cfg: &PilotConfig) -> Result<PilotConstants> {
    let entry = |s: &SearchConfig, ratio: f64, instance: InstanceParams, evaluations| PilotEntry {
        ratio,
        instance,
        resolution: s.space.resolution,
        restarts: s.restarts,
        steps: s.steps,
        seed: s.seed,
        evaluations,
    };
    let mut theorem = BTreeMap::new();
    for s in &cfg.theorem {
        let regime = s
            .regime()?
            .ok_or_else(|| Error::Config("every theorem pilot search must name a regime".into()))?;
        if s.objective != Objective::Theorem {
            return Err(Error::Config(
                "theorem pilot searches need objective \"theorem\"".into(),
            ));
        }
        let r = search(s)?;
        let best = r.per_regime.get(&regime.label()).cloned().ok_or_else(|| {
            Error::Config(format!(
                "pilot search for {regime} produced no valid instance"
            ))
        })?;
        theorem.insert(
            theorem_key(s.space.m, regime),
            entry(s, best.ratio, best.instance, r.evaluations),
        );
    }
    let mut maximal = BTreeMap::new();
    for s in &cfg.maximal {
        if s.objective != Objective::Maximal {
            return Err(Error::Config(
                "maximal pilot searches need objective \"maximal\"".into(),
            ));
        }
        let r = search(s)?;
        let best = r.best.ok_or_else(|| {
            Error::Config("maximal pilot search produced no valid instance".into())
        })?;
        maximal.insert(
            maximal_key(s.space.m),
            entry(s, best.ratio, best.instance, r.evaluations),
        );
    }
    Ok(PilotConstants {
        tolerance: cfg.tolerance,
        theorem,
        maximal,
    })
}

/// Largest admissible ratios before tolerance, keyed like the pilot output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConstants {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub theorem: BTreeMap<String, f64>,
    #[serde(default)]
    pub maximal: BTreeMap<String, f64>,
}

impl ReferenceConstants {
    pub fn embedded() -> Result<Self> {
        let pilot: PilotConstants = serde_json::from_str(EMBEDDED_PILOT)
            .map_err(|e| Error::Config(format!("embedded pilot constants: {e}")))?;
        Ok(pilot.reference())
    }

    pub fn theorem_threshold(&self, m: usize, regime: Regime) -> Option<f64> {
        self.theorem
            .get(&theorem_key(m, regime))
            .map(|c| c * (1.0 + self.tolerance))
    }

    pub fn maximal_threshold(&self, m: usize) -> Option<f64> {
        self.maximal
            .get(&maximal_key(m))
            .map(|c| c * (1.0 + self.tolerance))
    }
}

/// Where a suite takes its thresholds from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantsSource {
    /// A pilot output file.
    File(PathBuf),
    Inline(ReferenceConstants),
}

impl ConstantsSource {
    pub fn load(&self) -> Result<ReferenceConstants> {
        match self {
            ConstantsSource::Inline(c) => Ok(c.clone()),
            ConstantsSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let pilot: PilotConstants = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                Ok(pilot.reference())
            }
        }
    }
}
