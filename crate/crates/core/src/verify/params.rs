//! Serializable descriptions of weights, functions, families and whole
//! theorem instances.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::Cube;
use crate::error::{Error, Result};
use crate::sparse::{parse_family, random_sparse, Branching, SparseFamily};
use crate::verify::theorem::TheoremInstance;
use crate::weights::{power_weight, ExponentTuple};
use crate::{StepFn, Weight};

/// A nonnegative step function, built at whatever resolution is asked for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// Cell averages of `x^α`, `α > -1`.
    Power { alpha: f64 },
    /// Explicit cell values; the count must be `2^L`.
    Cells { values: Vec<f64> },
    /// Cells `e^u` with `u` uniform on `[-logrange, logrange]`.
    Random { seed: u64, logrange: f64 },
    /// `2^k 1_{[0, 2^-k)}`, unit mass on the leftmost level-`k` cube.
    Indicator { k: u32 },
    /// Only meaningful for `w`: the product `∏ w_i^{p/p_i}` of the dual weights.
    Dual,
}

impl FunctionSpec {
    pub fn build(&self, resolution: u32) -> Result<StepFn> {
        match self {
            FunctionSpec::Power { alpha } => power_weight(*alpha, resolution),
            FunctionSpec::Cells { values } => StepFn::new(resolution, values.clone()),
            FunctionSpec::Random { seed, logrange } => {
                if !(logrange.is_finite() && *logrange >= 0.0) {
                    return Err(Error::Config(format!(
                        "logrange = {logrange} must be finite and >= 0"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                StepFn::from_fn(resolution, |_| (rng.gen_range(-1.0..=1.0) * logrange).exp())
            }
            FunctionSpec::Indicator { k } => {
                if *k > resolution {
                    return Err(Error::CubeTooFine {
                        cube: Cube::new(*k, 0)?,
                        resolution,
                    });
                }
                Ok(StepFn::indicator(resolution, Cube::new(*k, 0)?)?.scale((*k as f64).exp2()))
            }
            FunctionSpec::Dual => Err(Error::Config("\"dual\" is only valid for w".into())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FunctionSpec::Power { alpha } => format!("power({alpha})"),
            FunctionSpec::Cells { values } => format!("cells[{}]", values.len()),
            FunctionSpec::Random { seed, logrange } => format!("random({seed},{logrange})"),
            FunctionSpec::Indicator { k } => format!("indicator({k})"),
            FunctionSpec::Dual => "dual".to_string(),
        }
    }
}

fn dual() -> FunctionSpec {
    FunctionSpec::Dual
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `{[0, 1)}`.
    Root,
    Random {
        seed: u64,
        #[serde(default)]
        branching: Branching,
    },
    /// Cubes in the `level index` line format.
    Text {
        text: String,
    },
    File {
        path: PathBuf,
    },
}

impl FamilySpec {
    pub fn build(&self, resolution: u32) -> Result<SparseFamily> {
        match self {
            FamilySpec::Root => Ok(SparseFamily::root_only(resolution)),
            FamilySpec::Random { seed, branching } => random_sparse(*seed, resolution, branching),
            FamilySpec::Text { text } => parse_family(text, resolution),
            FamilySpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                parse_family(&text, resolution)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            FamilySpec::Root => "root".to_string(),
            FamilySpec::Random { seed, .. } => format!("random({seed})"),
            FamilySpec::Text { text } => format!(
                "text[{}]",
                text.lines().filter(|l| !l.trim().is_empty()).count()
            ),
            FamilySpec::File { path } => format!("file({})", path.display()),
        }
    }
}

/// Everything needed to rebuild a theorem instance at a given resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParams {
    pub family: FamilySpec,
    pub functions: Vec<FunctionSpec>,
    pub sigmas: Vec<FunctionSpec>,
    #[serde(default = "dual")]
    pub w: FunctionSpec,
    pub exponents: ExponentTuple,
}

impl InstanceParams {
    pub fn build(&self, resolution: u32) -> Result<TheoremInstance<f64>> {
        let family = self.family.build(resolution)?;
        let functions = self
            .functions
            .iter()
            .map(|f| f.build(resolution))
            .collect::<Result<Vec<_>>>()?;
        let sigmas = self
            .sigmas
            .iter()
            .map(|f| f.build(resolution))
            .collect::<Result<Vec<_>>>()?;
        match &self.w {
            FunctionSpec::Dual => {
                TheoremInstance::with_dual_w(family, functions, sigmas, self.exponents.clone())
            }
            spec => {
                let w: Weight = spec.build(resolution)?;
                TheoremInstance::new(family, functions, sigmas, w, self.exponents.clone())
            }
        }
    }

    /// Compact description used in report rows.
    pub fn label(&self) -> String {
        let join = |v: &[FunctionSpec]| {
            v.iter()
                .map(FunctionSpec::label)
                .collect::<Vec<_>>()
                .join("|")
        };
        format!(
            "sigma={};w={};f={};family={}",
            join(&self.sigmas),
            self.w.label(),
            join(&self.functions),
            self.family.label()
        )
    }
}
