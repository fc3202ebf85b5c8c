//! Random-restart coordinate ascent for the largest observed ratio.
//!
//! Each restart samples a point of the search space and then cycles through
//! four coordinate groups (weight exponents, input functions, the sparse
//! family seed, the exponent tuple), keeping a proposal only when it strictly
//! raises the ratio. Restarts run in parallel; each owns a ChaCha8 stream
//! derived from `(seed, restart)` and results are merged in restart order, so
//! the outcome does not depend on the thread count.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::Branching;
use crate::verify::eval::{evaluate, Evaluation, Objective};
use crate::verify::params::{FamilySpec, FunctionSpec, InstanceParams};
use crate::verify::pool;
use crate::weights::{ExponentTuple, Regime};

/// Smallest admissible distance of a power exponent from `-1`.
pub const MIN_ALPHA_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `w = ∏ w_i^{p/p_i}`.
    #[default]
    Dual,
    /// `w` is a power weight with its own exponent.
    Independent,
    /// Either of the above, switchable during the ascent.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub resolution: u32,
    pub m: usize,
    pub p_grid: Vec<f64>,
    pub p0_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    /// Exponents of the power weights `σ_i` (and `w` when independent).
    pub alpha_range: [f64; 2],
    pub coupling: Coupling,
    /// Exponents of power-type inputs `f_i`.
    pub beta_range: [f64; 2],
    /// Inputs may be `2^k 1_{[0,2^-k)}` for `k <= indicator_max_k`.
    pub indicator_max_k: u32,
    pub indicator_probability: f64,
    pub branching: Branching,
    /// Family seeds are drawn from `0..family_seeds`; zero means `{[0,1)}` only.
    pub family_seeds: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            resolution: crate::dyadic::DEFAULT_RESOLUTION,
            m: 2,
            p_grid: vec![1.5, 2.0, 3.0, 4.0],
            p0_grid: vec![1.0],
            gamma_grid: vec![0.5, 1.0, 2.0],
            alpha_range: [-0.9, 2.0],
            coupling: Coupling::Dual,
            beta_range: [-0.9, 2.0],
            indicator_max_k: 6,
            indicator_probability: 0.25,
            branching: Branching::default(),
            family_seeds: 32,
        }
    }
}

fn check_range(name: &str, [lo, hi]: [f64; 2]) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Config(format!(
            "{name} = [{lo}, {hi}] is not a finite interval"
        )));
    }
    if lo < -1.0 + MIN_ALPHA_MARGIN {
        return Err(Error::Config(format!(
            "{name} starts at {lo}; power exponents must stay >= {}",
            -1.0 + MIN_ALPHA_MARGIN
        )));
    }
    Ok(())
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution > crate::dyadic::MAX_RESOLUTION {
            return Err(Error::ResolutionTooLarge(self.resolution));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        check_range("alpha_range", self.alpha_range)?;
        check_range("beta_range", self.beta_range)?;
        if self.indicator_max_k > self.resolution {
            return Err(Error::Config(format!(
                "indicator_max_k = {} exceeds the resolution {}",
                self.indicator_max_k, self.resolution
            )));
        }
        if !(0.0..=1.0).contains(&self.indicator_probability) {
            return Err(Error::Config(
                "indicator_probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Every grid tuple that is valid, applicable and, if given, in `regime`.
    pub fn exponent_tuples(&self, regime: Option<Regime>) -> Result<Vec<ExponentTuple>> {
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.m];
        if self.p_grid.is_empty() {
            return Err(Error::Config("p_grid is empty".into()));
        }
        loop {
            let p: Vec<f64> = idx.iter().map(|&i| self.p_grid[i]).collect();
            for &p0 in &self.p0_grid {
                for &gamma in &self.gamma_grid {
                    if let Ok(e) = ExponentTuple::new(p.clone(), p0, gamma) {
                        if e.is_applicable() && regime.is_none_or(|r| e.regime() == r) {
                            out.push(e);
                        }
                    }
                }
            }
            let mut k = 0;
            while k < self.m {
                idx[k] += 1;
                if idx[k] < self.p_grid.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == self.m {
                break;
            }
        }
        if out.is_empty() {
            return Err(Error::Config(match regime {
                Some(r) => format!("no applicable exponent tuple in the grid falls in regime {r}"),
                None => "no applicable exponent tuple in the grid".into(),
            }));
        }
        Ok(out)
    }

    fn alpha(&self, rng: &mut ChaCha8Rng) -> f64 {
        uniform(rng, self.alpha_range)
    }

    fn function(&self, rng: &mut ChaCha8Rng) -> FunctionSpec {
        if self.indicator_probability > 0.0 && rng.gen_bool(self.indicator_probability) {
            FunctionSpec::Indicator {
                k: rng.gen_range(0..=self.indicator_max_k),
            }
        } else {
            FunctionSpec::Power {
                alpha: uniform(rng, self.beta_range),
            }
        }
    }

    fn family(&self, rng: &mut ChaCha8Rng) -> FamilySpec {
        if self.family_seeds == 0 {
            FamilySpec::Root
        } else {
            FamilySpec::Random {
                seed: rng.gen_range(0..self.family_seeds),
                branching: self.branching.clone(),
            }
        }
    }

    pub fn sample(&self, tuples: &[ExponentTuple], rng: &mut ChaCha8Rng) -> InstanceParams {
        let exponents = tuples.choose(rng).expect("nonempty tuple list").clone();
        let sigmas = (0..self.m)
            .map(|_| FunctionSpec::Power {
                alpha: self.alpha(rng),
            })
            .collect();
        let w = match self.coupling {
            Coupling::Dual => FunctionSpec::Dual,
            Coupling::Mixed if rng.gen_bool(0.5) => FunctionSpec::Dual,
            _ => FunctionSpec::Power {
                alpha: self.alpha(rng),
            },
        };
        InstanceParams {
            family: self.family(rng),
            functions: (0..self.m).map(|_| self.function(rng)).collect(),
            sigmas,
            w,
            exponents,
        }
    }

    fn perturb(
        &self,
        x: &InstanceParams,
        group: usize,
        step: f64,
        tuples: &[ExponentTuple],
        rng: &mut ChaCha8Rng,
    ) -> InstanceParams {
        let mut y = x.clone();
        match group {
            0 => {
                let slots = self.m + usize::from(self.coupling != Coupling::Dual);
                let i = rng.gen_range(0..slots);
                let target = if i < self.m {
                    &mut y.sigmas[i]
                } else {
                    &mut y.w
                };
                let mixed = self.coupling == Coupling::Mixed;
                *target = match target {
                    FunctionSpec::Power { .. } if mixed && rng.gen_bool(0.2) => FunctionSpec::Dual,
                    FunctionSpec::Power { alpha } => FunctionSpec::Power {
                        alpha: nudge(rng, *alpha, self.alpha_range, step),
                    },
                    _ => FunctionSpec::Power {
                        alpha: self.alpha(rng),
                    },
                };
            }
            1 => {
                let i = rng.gen_range(0..self.m);
                let can_indicate = self.indicator_probability > 0.0;
                y.functions[i] = match &x.functions[i] {
                    FunctionSpec::Power { alpha } => {
                        if can_indicate && rng.gen_bool(self.indicator_probability) {
                            FunctionSpec::Indicator {
                                k: rng.gen_range(0..=self.indicator_max_k),
                            }
                        } else {
                            FunctionSpec::Power {
                                alpha: nudge(rng, *alpha, self.beta_range, step),
                            }
                        }
                    }
                    FunctionSpec::Indicator { k } => {
                        if rng.gen_bool(0.5) {
                            let k = if rng.gen_bool(0.5) {
                                k.saturating_add(1)
                            } else {
                                k.saturating_sub(1)
                            };
                            FunctionSpec::Indicator {
                                k: k.min(self.indicator_max_k),
                            }
                        } else {
                            FunctionSpec::Power {
                                alpha: uniform(rng, self.beta_range),
                            }
                        }
                    }
                    _ => self.function(rng),
                };
            }
            2 => y.family = self.family(rng),
            _ => {
                let near: Vec<&ExponentTuple> = tuples
                    .iter()
                    .filter(|e| differs_in_one(e, &x.exponents))
                    .collect();
                y.exponents = match near.choose(rng) {
                    Some(e) => (*e).clone(),
                    None => tuples.choose(rng).expect("nonempty tuple list").clone(),
                };
            }
        }
        y
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Moves `x` by up to `step` of the range, with the width itself drawn
/// log-uniformly over two decades so that coarse and fine moves mix.
fn nudge(rng: &mut ChaCha8Rng, x: f64, [lo, hi]: [f64; 2], step: f64) -> f64 {
    let d = step * (hi - lo) * 10f64.powf(-rng.gen_range(0.0..2.0));
    if d == 0.0 {
        return x;
    }
    (x + rng.gen_range(-d..=d)).clamp(lo, hi)
}

fn differs_in_one(a: &ExponentTuple, b: &ExponentTuple) -> bool {
    let diffs = a.p_i().iter().zip(b.p_i()).filter(|(x, y)| x != y).count()
        + usize::from(a.p0() != b.p0())
        + usize::from(a.gamma() != b.gamma());
    diffs == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default)]
    pub space: SearchSpace,
    pub restarts: usize,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub objective: Objective,
    /// Restrict exponent tuples to one regime, by label.
    #[serde(default)]
    pub regime: Option<String>,
    /// Proposal half-width as a fraction of each range.
    #[serde(default = "default_step")]
    pub step_size: f64,
}

fn default_step() -> f64 {
    0.15
}

impl SearchConfig {
    pub fn regime(&self) -> Result<Option<Regime>> {
        self.regime
            .as_deref()
            .map(|s| {
                Regime::from_label(s)
                    .ok_or_else(|| Error::Config(format!("unknown regime label {s:?}")))
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub ratio: f64,
    pub instance: InstanceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub initial_ratio: f64,
    pub final_ratio: f64,
    pub accepted: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub objective: Objective,
    pub resolution: u32,
    pub best: Option<Extremum>,
    /// Best ratio recorded among all evaluations of each regime (theorem only).
    pub per_regime: BTreeMap<String, Extremum>,
    pub evaluations: usize,
    pub failures: usize,
    pub trace: Vec<RestartTrace>,
}

struct RestartOutcome {
    best: Option<Extremum>,
    per_regime: BTreeMap<String, Extremum>,
    trace: RestartTrace,
    evaluations: usize,
}

fn record(
    map: &mut BTreeMap<String, Extremum>,
    key: String,
    ratio: f64,
    instance: &InstanceParams,
) {
    match map.get(&key) {
        Some(e) if e.ratio >= ratio => {}
        _ => {
            map.insert(
                key,
                Extremum {
                    ratio,
                    instance: instance.clone(),
                },
            );
        }
    }
}

fn run_restart(cfg: &SearchConfig, tuples: &[ExponentTuple], restart: usize) -> RestartOutcome {
    let space = &cfg.space;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut per_regime = BTreeMap::new();
    let mut evaluations = 0;
    let mut failed = 0;
    let mut eval =
        |x: &InstanceParams, per_regime: &mut BTreeMap<String, Extremum>| -> Option<Evaluation> {
            evaluations += 1;
            match evaluate(x, space.resolution, cfg.objective) {
                Ok(ev) if ev.ratio.is_finite() => {
                    if let Some(r) = ev.regime {
                        record(per_regime, r.label(), ev.ratio, x);
                    }
                    Some(ev)
                }
                _ => {
                    failed += 1;
                    None
                }
            }
        };
    let mut current = None;
    for _ in 0..100 {
        let x = space.sample(tuples, &mut rng);
        if let Some(ev) = eval(&x, &mut per_regime) {
            current = Some((x, ev.ratio));
            break;
        }
    }
    let Some((mut x, mut value)) = current else {
        return RestartOutcome {
            best: None,
            per_regime,
            trace: RestartTrace {
                restart,
                initial_ratio: f64::NAN,
                final_ratio: f64::NAN,
                accepted: 0,
                failed,
            },
            evaluations,
        };
    };
    let initial_ratio = value;
    let mut accepted = 0;
    for step in 0..cfg.steps {
        let y = space.perturb(&x, step % 4, cfg.step_size, tuples, &mut rng);
        if y == x {
            continue;
        }
        if let Some(ev) = eval(&y, &mut per_regime) {
            if ev.ratio > value {
                x = y;
                value = ev.ratio;
                accepted += 1;
            }
        }
    }
    RestartOutcome {
        best: Some(Extremum {
            ratio: value,
            instance: x,
        }),
        per_regime,
        trace: RestartTrace {
            restart,
            initial_ratio,
            final_ratio: value,
            accepted,
            failed,
        },
        evaluations,
    }
}

pub fn search(cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.space.validate()?;
    if !(cfg.step_size.is_finite() && cfg.step_size > 0.0) {
        return Err(Error::Config(format!(
            "step_size = {} must be positive",
            cfg.step_size
        )));
    }
    let tuples = cfg.space.exponent_tuples(cfg.regime()?)?;
    let outcomes: Vec<RestartOutcome> = pool::install(|| {
        (0..cfg.restarts)
            .into_par_iter()
            .map(|r| run_restart(cfg, &tuples, r))
            .collect()
    });
    let mut result = SearchResult {
        objective: cfg.objective,
        resolution: cfg.space.resolution,
        best: None,
        per_regime: BTreeMap::new(),
        evaluations: 0,
        failures: 0,
        trace: Vec::with_capacity(outcomes.len()),
    };
    for o in outcomes {
        if let Some(b) = o.best {
            if result.best.as_ref().is_none_or(|cur| b.ratio > cur.ratio) {
                result.best = Some(b);
            }
        }
        for (k, e) in o.per_regime {
            match result.per_regime.get(&k) {
                Some(cur) if cur.ratio >= e.ratio => {}
                _ => {
                    result.per_regime.insert(k, e);
                }
            }
        }
        result.evaluations += o.evaluations;
        result.failures += o.trace.failed;
        result.trace.push(o.trace);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_space() -> SearchSpace {
        SearchSpace {
            resolution: 5,
            m: 2,
            p_grid: vec![2.0],
            p0_grid: vec![1.0],
            gamma_grid: vec![1.0],
            alpha_range: [0.0, 0.0],
            coupling: Coupling::Dual,
            beta_range: [0.0, 0.0],
            indicator_max_k: 0,
            indicator_probability: 0.0,
            branching: Branching::default(),
            family_seeds: 0,
        }
    }

    #[test]
    fn single_point_space_returns_that_point() {
        let cfg = SearchConfig {
            space: point_space(),
            restarts: 3,
            steps: 8,
            seed: 1,
            objective: Objective::Theorem,
            regime: None,
            step_size: 0.1,
        };
        let r = search(&cfg).unwrap();
        let best = r.best.unwrap();
        assert!((best.ratio - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_regime.keys().collect::<Vec<_>>(), ["p_le_gamma"]);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let cfg = SearchConfig {
            space: SearchSpace {
                resolution: 6,
                family_seeds: 4,
                ..SearchSpace::default()
            },
            restarts: 6,
            steps: 12,
            seed: 42,
            objective: Objective::Theorem,
            regime: None,
            step_size: 0.2,
        };
        let a = search(&cfg).unwrap();
        let b = search(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.iter().all(|t| t.final_ratio >= t.initial_ratio));
    }

    #[test]
    fn validation() {
        let mut s = point_space();
        s.alpha_range = [-0.99, 1.0];
        assert!(s.validate().is_err());
        let s = SearchSpace {
            p_grid: vec![2.0],
            p0_grid: vec![2.0],
            ..point_space()
        };
        assert!(s.exponent_tuples(None).is_err());
        assert!(point_space()
            .exponent_tuples(Some(Regime::QConjugateMax))
            .is_err());
    }

    #[test]
    fn regime_filter() {
        let s = SearchSpace::default();
        for r in [
            Regime::PAtMostGamma,
            Regime::PiMax(0),
            Regime::PiMax(1),
            Regime::QConjugateMax,
        ] {
            let t = s.exponent_tuples(Some(r));
            if let Ok(t) = t {
                assert!(t.iter().all(|e| e.regime() == r));
            }
        }
    }
}
