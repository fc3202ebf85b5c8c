//! Declarative experiment suites and their report rows.
//!
//! Every trial gets its own ChaCha8 generator seeded from the master seed, the
//! check's position and the trial index, and trials run in parallel with rows
//! merged in trial order.

use std::collections::BTreeSet;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{all_cubes, Cube};
use crate::error::{Error, Result};
use crate::operators::{rescale_identity_check, SparseOperatorSpec};
use crate::sparse::{carleson_sum, random_sparse, Branching};
use crate::stopping::{carleson_embedding_bound, carleson_embedding_check, principal_cubes};
use crate::verify::constants::{ConstantsSource, ReferenceConstants};
use crate::verify::eval::{evaluate, Objective};
use crate::verify::params::{FunctionSpec, InstanceParams};
use crate::verify::pool;
use crate::verify::search::SearchSpace;
use crate::verify::theorem::bucket_reconstruction;
use crate::weights::{a_infty, Regime};
use crate::StepFn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Thresholds for ratio checks; the committed pilot output when absent.
    #[serde(default)]
    pub constants: Option<ConstantsSource>,
    #[serde(default)]
    pub suite: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    RescaleIdentity(RescaleCheck),
    SparseCarleson(SparseCarlesonCheck),
    PrincipalCarleson(PrincipalCarlesonCheck),
    TheoremRatio(RatioCheck),
    MaximalRatio(RatioCheck),
    BucketReconstruction(BucketCheck),
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::RescaleIdentity(_) => "rescale_identity",
            Check::SparseCarleson(_) => "sparse_carleson",
            Check::PrincipalCarleson(_) => "principal_carleson",
            Check::TheoremRatio(_) => "theorem_ratio",
            Check::MaximalRatio(_) => "maximal_ratio",
            Check::BucketReconstruction(_) => "bucket_reconstruction",
        }
    }
}

/// `T_{p0,γ}(f⃗)` against `T_{1,γ/p0}(f⃗^{p0})^{1/p0}` on random families and
/// log-uniform inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescaleCheck {
    pub trials: usize,
    pub resolution: u32,
    pub m: usize,
    pub p0: Vec<f64>,
    pub gamma: Vec<f64>,
    pub logrange: f64,
    pub branching: Branching,
    pub tolerance: f64,
}

impl Default for RescaleCheck {
    fn default() -> Self {
        RescaleCheck {
            trials: 100,
            resolution: 8,
            m: 2,
            p0: vec![1.5, 2.0, 3.0],
            gamma: vec![1.0, 2.0, 4.0],
            logrange: 2.0,
            branching: Branching::default(),
            tolerance: 1e-9,
        }
    }
}

/// `∑_{Q ∈ S, Q ⊆ R} σ(Q) <= 2 [σ]_{A∞} σ(R)`, compared without tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparseCarlesonCheck {
    pub trials: usize,
    /// Resolutions are drawn from `1..=max_resolution`.
    pub max_resolution: u32,
    pub logrange: f64,
    pub alpha_range: [f64; 2],
    pub branching: Branching,
}

impl Default for SparseCarlesonCheck {
    fn default() -> Self {
        SparseCarlesonCheck {
            trials: 200,
            max_resolution: 10,
            logrange: 3.0,
            alpha_range: [-0.9, 3.0],
            branching: Branching::default(),
        }
    }
}

/// `∑_F (⟨f⟩^σ_F)^p σ(F) <= 2 (p')^p ‖f‖^p_{L^p(σ)}` over principal cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrincipalCarlesonCheck {
    pub trials: usize,
    pub resolution: u32,
    pub p: Vec<f64>,
    pub logrange: f64,
    pub alpha_range: [f64; 2],
    pub branching: Branching,
}

impl Default for PrincipalCarlesonCheck {
    fn default() -> Self {
        PrincipalCarlesonCheck {
            trials: 200,
            resolution: 10,
            p: vec![1.5, 2.0, 4.0],
            logrange: 3.0,
            alpha_range: [-0.9, 3.0],
            branching: Branching::default(),
        }
    }
}

/// Ratio rows from explicit instances and from `trials` samples of `space`,
/// compared against `(1 + tolerance) C*` for the instance's key.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatioCheck {
    pub trials: usize,
    pub space: SearchSpace,
    /// Keep only sampled tuples of this regime.
    pub regime: Option<String>,
    /// Resolution for the explicit instances; the space's when absent.
    pub resolution: Option<u32>,
    pub instances: Vec<InstanceParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BucketCheck {
    pub trials: usize,
    pub space: SearchSpace,
    pub tolerance: f64,
}

impl Default for BucketCheck {
    fn default() -> Self {
        BucketCheck {
            trials: 50,
            space: SearchSpace::default(),
            tolerance: 1e-12,
        }
    }
}

/// One line of the report. Ratio checks pass when `ratio <= threshold`;
/// the sparse Carleson check compares `lhs <= rhs` directly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub trial: usize,
    pub check: String,
    pub resolution: u32,
    pub m: usize,
    pub p: Vec<f64>,
    pub p0: f64,
    pub gamma: f64,
    pub weight_params: String,
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub a_inf_w: Option<f64>,
    pub a_inf_sigma: Vec<f64>,
    pub a_vec_p: Option<f64>,
    pub regime: Option<String>,
    pub pass: bool,
    pub note: String,
}

impl ReportRow {
    fn blank(check: &str, resolution: u32, seed: u64) -> Self {
        ReportRow {
            trial: 0,
            check: check.to_string(),
            resolution,
            m: 0,
            p: Vec::new(),
            p0: f64::NAN,
            gamma: f64::NAN,
            weight_params: String::new(),
            seed,
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: f64::NAN,
            threshold: f64::NAN,
            a_inf_w: None,
            a_inf_sigma: Vec::new(),
            a_vec_p: None,
            regime: None,
            pass: false,
            note: String::new(),
        }
    }

    fn failed(mut self, err: &Error) -> Self {
        self.pass = false;
        self.note = err.to_string();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Regime labels of the theorem rows.
    pub fn regimes(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .filter(|r| r.check == "theorem_ratio")
            .filter_map(|r| r.regime.clone())
            .collect()
    }
}

/// Seed of trial `trial` of the `check`-th suite entry.
pub fn trial_seed(master: u64, check: usize, trial: usize) -> u64 {
    let mut z = master ^ ((check as u64) << 40) ^ (trial as u64);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let constants = match &cfg.constants {
        Some(src) => src.load()?,
        None => ReferenceConstants::embedded()?,
    };
    for check in &cfg.suite {
        validate(check)?;
    }
    let mut rows = Vec::new();
    for (ci, check) in cfg.suite.iter().enumerate() {
        let mut part = run_check(check, ci, cfg.seed, &constants)?;
        rows.append(&mut part);
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r.trial = i;
    }
    Ok(Report { rows })
}

fn validate(check: &Check) -> Result<()> {
    let positive = |name: &str, v: &[f64], min: f64| -> Result<()> {
        if v.is_empty() || v.iter().any(|&x| !(x.is_finite() && x > min)) {
            return Err(Error::Config(format!(
                "{name} must be a nonempty list of values > {min}"
            )));
        }
        Ok(())
    };
    match check {
        Check::RescaleIdentity(c) => {
            positive("p0", &c.p0, 0.0)?;
            if c.p0.iter().any(|&p| p < 1.0) {
                return Err(Error::Config("p0 values must be >= 1".into()));
            }
            positive("gamma", &c.gamma, 0.0)?;
            if c.m == 0 {
                return Err(Error::Config("m must be at least 1".into()));
            }
        }
        Check::SparseCarleson(c) => {
            if c.max_resolution == 0 || c.max_resolution > crate::dyadic::MAX_RESOLUTION {
                return Err(Error::ResolutionTooLarge(c.max_resolution));
            }
        }
        Check::PrincipalCarleson(c) => positive("p", &c.p, 1.0)?,
        Check::TheoremRatio(c) | Check::MaximalRatio(c) => {
            if c.trials > 0 {
                c.space.validate()?;
            }
            if let Some(r) = &c.regime {
                Regime::from_label(r)
                    .ok_or_else(|| Error::Config(format!("unknown regime label {r:?}")))?;
            }
        }
        Check::BucketReconstruction(c) => c.space.validate()?,
    }
    Ok(())
}

fn run_check(
    check: &Check,
    ci: usize,
    master: u64,
    constants: &ReferenceConstants,
) -> Result<Vec<ReportRow>> {
    let name = check.name();
    let par = |n: usize, f: &(dyn Fn(u64) -> ReportRow + Sync)| -> Vec<ReportRow> {
        pool::install(|| {
            (0..n)
                .into_par_iter()
                .map(|t| f(trial_seed(master, ci, t)))
                .collect()
        })
    };
    Ok(match check {
        Check::RescaleIdentity(c) => par(c.trials, &|seed| rescale_row(c, seed)),
        Check::SparseCarleson(c) => par(c.trials, &|seed| sparse_carleson_row(c, seed)),
        Check::PrincipalCarleson(c) => par(c.trials, &|seed| principal_carleson_row(c, seed)),
        Check::BucketReconstruction(c) => {
            let tuples = c.space.exponent_tuples(None)?;
            par(c.trials, &|seed| bucket_row(c, &tuples, seed))
        }
        Check::TheoremRatio(c) | Check::MaximalRatio(c) => {
            let objective = if name == "theorem_ratio" {
                Objective::Theorem
            } else {
                Objective::Maximal
            };
            let resolution = c.resolution.unwrap_or(c.space.resolution);
            let mut rows: Vec<ReportRow> = c
                .instances
                .iter()
                .map(|inst| ratio_row(name, inst, resolution, objective, constants, master))
                .collect();
            if c.trials > 0 {
                let regime = c.regime.as_deref().and_then(Regime::from_label);
                let tuples = c.space.exponent_tuples(regime)?;
                rows.extend(par(c.trials, &|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut last = None;
                    for _ in 0..100 {
                        let inst = c.space.sample(&tuples, &mut rng);
                        let row =
                            ratio_row(name, &inst, c.space.resolution, objective, constants, seed);
                        if !row.lhs.is_nan() {
                            return row;
                        }
                        last = Some(row);
                    }
                    last.expect("at least one attempt")
                }));
            }
            rows
        }
    })
}

fn log_uniform(rng: &mut ChaCha8Rng, resolution: u32, logrange: f64) -> Result<StepFn> {
    FunctionSpec::Random {
        seed: rng.gen(),
        logrange,
    }
    .build(resolution)
}

/// Strictly positive weight: a power weight or log-uniform cells, by coin flip.
fn random_weight(
    rng: &mut ChaCha8Rng,
    resolution: u32,
    logrange: f64,
    alpha: [f64; 2],
) -> Result<(StepFn, String)> {
    if rng.gen_bool(0.5) {
        let a = rng.gen_range(alpha[0]..=alpha[1]);
        Ok((
            FunctionSpec::Power { alpha: a }.build(resolution)?,
            format!("power({a})"),
        ))
    } else {
        let spec = FunctionSpec::Random {
            seed: rng.gen(),
            logrange,
        };
        Ok((spec.build(resolution)?, spec.label()))
    }
}

fn rescale_row(c: &RescaleCheck, seed: u64) -> ReportRow {
    let mut row = ReportRow::blank("rescale_identity", c.resolution, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p0 = *c.p0.choose(&mut rng).expect("validated");
    let gamma = *c.gamma.choose(&mut rng).expect("validated");
    row.m = c.m;
    row.p0 = p0;
    row.gamma = gamma;
    row.rhs = c.tolerance;
    row.threshold = 1.0;
    let out = (|| -> Result<f64> {
        let family = random_sparse(rng.gen(), c.resolution, &c.branching)?;
        let fs = (0..c.m)
            .map(|_| log_uniform(&mut rng, c.resolution, c.logrange))
            .collect::<Result<Vec<_>>>()?;
        row.weight_params = format!("family_size={};logrange={}", family.len(), c.logrange);
        rescale_identity_check(&SparseOperatorSpec::new(family, p0, gamma, c.m)?, &fs)
    })();
    match out {
        Ok(dev) => {
            row.lhs = dev;
            row.ratio = dev / c.tolerance;
            row.pass = dev <= c.tolerance;
            row
        }
        Err(e) => row.failed(&e),
    }
}

fn sparse_carleson_row(c: &SparseCarlesonCheck, seed: u64) -> ReportRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resolution = rng.gen_range(1..=c.max_resolution);
    let mut row = ReportRow::blank("sparse_carleson", resolution, seed);
    row.m = 1;
    row.threshold = 1.0;
    let out = (|| -> Result<()> {
        let family = random_sparse(rng.gen(), resolution, &c.branching)?;
        let (sigma, label) = random_weight(&mut rng, resolution, c.logrange, c.alpha_range)?;
        let r = family
            .iter()
            .choose(&mut rng)
            .expect("families contain the root");
        let a = a_infty(&sigma)?.value;
        let mass = sigma.pyramid().integral(r);
        row.weight_params = format!("sigma={label};R={r};family_size={}", family.len());
        row.lhs = carleson_sum(&family, &sigma, r)?;
        row.rhs = 2.0 * a * mass;
        row.ratio = row.lhs / row.rhs;
        row.a_inf_sigma = vec![a];
        row.pass = row.lhs <= row.rhs;
        Ok(())
    })();
    match out {
        Ok(()) => row,
        Err(e) => row.failed(&e),
    }
}

fn principal_carleson_row(c: &PrincipalCarlesonCheck, seed: u64) -> ReportRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = ReportRow::blank("principal_carleson", c.resolution, seed);
    let p = *c.p.choose(&mut rng).expect("validated");
    row.m = 1;
    row.p = vec![p];
    row.threshold = carleson_embedding_bound(p);
    let out = (|| -> Result<()> {
        let full = rng.gen_bool(0.5);
        let base: BTreeSet<Cube> = if full {
            all_cubes(c.resolution).collect()
        } else {
            random_sparse(rng.gen(), c.resolution, &c.branching)?
                .cubes()
                .clone()
        };
        let (sigma, label) = random_weight(&mut rng, c.resolution, c.logrange, c.alpha_range)?;
        let f = if rng.gen_bool(0.3) {
            let k = rng.gen_range(0..=c.resolution);
            FunctionSpec::Indicator { k }.build(c.resolution)?
        } else {
            log_uniform(&mut rng, c.resolution, c.logrange)?
        };
        let forest = principal_cubes(&base, &f, &sigma)?;
        let ratio = carleson_embedding_check(&forest, &f, &sigma, p)?;
        row.weight_params = format!(
            "sigma={label};base={};stopping_cubes={}",
            if full {
                "all".to_string()
            } else {
                format!("sparse[{}]", base.len())
            },
            forest.len()
        );
        row.lhs = ratio;
        row.rhs = 1.0;
        row.ratio = ratio;
        row.a_inf_sigma = vec![a_infty(&sigma)?.value];
        row.pass = ratio <= row.threshold;
        Ok(())
    })();
    match out {
        Ok(()) => row,
        Err(e) => row.failed(&e),
    }
}

fn describe(row: &mut ReportRow, inst: &InstanceParams) {
    let e = &inst.exponents;
    row.m = e.m();
    row.p = e.p_i().to_vec();
    row.p0 = e.p0();
    row.gamma = e.gamma();
    row.weight_params = inst.label();
}

fn bucket_row(c: &BucketCheck, tuples: &[crate::weights::ExponentTuple], seed: u64) -> ReportRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = ReportRow::blank("bucket_reconstruction", c.space.resolution, seed);
    let params = c.space.sample(tuples, &mut rng);
    describe(&mut row, &params);
    row.rhs = c.tolerance;
    row.threshold = 1.0;
    row.regime = Some(params.exponents.regime().label());
    match params
        .build(c.space.resolution)
        .and_then(|inst| bucket_reconstruction(&inst))
    {
        Ok(dev) => {
            row.lhs = dev;
            row.ratio = dev / c.tolerance;
            row.pass = dev <= c.tolerance;
            row
        }
        Err(e) => row.failed(&e),
    }
}

pub(crate) fn ratio_row(
    name: &str,
    inst: &InstanceParams,
    resolution: u32,
    objective: Objective,
    constants: &ReferenceConstants,
    seed: u64,
) -> ReportRow {
    let mut row = ReportRow::blank(name, resolution, seed);
    describe(&mut row, inst);
    let m = inst.exponents.m();
    match evaluate(inst, resolution, objective) {
        Ok(ev) => {
            let threshold = match objective {
                Objective::Theorem => {
                    constants.theorem_threshold(m, ev.regime.expect("theorem regime"))
                }
                Objective::Maximal => constants.maximal_threshold(m),
            };
            row.lhs = ev.lhs;
            row.rhs = ev.rhs;
            row.ratio = ev.ratio;
            row.a_inf_w = Some(ev.a_infty_w);
            row.a_inf_sigma = ev.a_infty_sigmas;
            row.a_vec_p = Some(ev.a_vec_p);
            row.regime = ev.regime.map(Regime::label);
            match threshold {
                Some(t) => {
                    row.threshold = t;
                    row.pass = ev.ratio <= t;
                }
                None => {
                    row.pass = false;
                    row.note = "no reference constant for this key".to_string();
                }
            }
            row
        }
        Err(e) => row.failed(&e),
    }
}
