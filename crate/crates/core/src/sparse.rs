//! Sparse families of dyadic cubes.
//!
//! A family is sparse when, for every member `Q`, the members strictly inside
//! `Q` cover at most half of it. The covered measure is computed from the
//! maximal proper subcubes, which are exactly the members whose nearest
//! ancestor in the family is `Q`; they are pairwise disjoint so their measures
//! add without rasterising cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{check_level, Cube, StepFunction};
use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub is_sparse: bool,
    /// The member with the largest covered fraction (first in order on ties).
    pub worst_cube: Option<Cube>,
    pub worst_fraction: f64,
}

/// For each member, its nearest strict ancestor inside the set.
fn family_parents(cubes: &BTreeSet<Cube>) -> BTreeMap<Cube, Option<Cube>> {
    cubes
        .iter()
        .map(|&q| {
            let parent = q.self_and_ancestors().skip(1).find(|a| cubes.contains(a));
            (q, parent)
        })
        .collect()
}

/// Measure of `∪{Q' ∈ set : Q' ⊊ Q}` for every member `Q`.
fn covered_measures(cubes: &BTreeSet<Cube>) -> BTreeMap<Cube, f64> {
    let mut covered: BTreeMap<Cube, f64> = cubes.iter().map(|&q| (q, 0.0)).collect();
    for (q, parent) in family_parents(cubes) {
        if let Some(p) = parent {
            *covered.get_mut(&p).unwrap() += q.measure::<f64>();
        }
    }
    covered
}

/// Checks the one-half sparsity condition for an arbitrary set of cubes.
pub fn verify_sparse(cubes: &[Cube]) -> SparsityReport {
    let set: BTreeSet<Cube> = cubes.iter().copied().collect();
    let mut worst_cube = None;
    let mut worst_fraction = 0.0;
    for (q, covered) in covered_measures(&set) {
        let fraction = covered / q.measure::<f64>();
        if worst_cube.is_none() || fraction > worst_fraction {
            worst_cube = Some(q);
            worst_fraction = fraction;
        }
    }
    SparsityReport {
        is_sparse: worst_fraction <= 0.5,
        worst_cube,
        worst_fraction,
    }
}

/// A verified sparse family of cubes at a fixed resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseFamily {
    resolution: u32,
    cubes: BTreeSet<Cube>,
}

impl SparseFamily {
    pub fn new(resolution: u32, cubes: impl IntoIterator<Item = Cube>) -> Result<Self> {
        let cubes: BTreeSet<Cube> = cubes.into_iter().collect();
        for &q in &cubes {
            check_level(q, resolution)?;
        }
        let v: Vec<Cube> = cubes.iter().copied().collect();
        let report = verify_sparse(&v);
        if !report.is_sparse {
            return Err(Error::NotSparse {
                cube: report.worst_cube.unwrap(),
                fraction: report.worst_fraction,
            });
        }
        Ok(SparseFamily { resolution, cubes })
    }

    pub fn root_only(resolution: u32) -> Self {
        SparseFamily {
            resolution,
            cubes: BTreeSet::from([Cube::ROOT]),
        }
    }

    /// The chain `[0,1) ⊃ [0,1/2) ⊃ ... ⊃ [0,2^-depth)`.
    pub fn chain(resolution: u32, depth: u32) -> Result<Self> {
        Self::new(
            resolution,
            (0..=depth)
                .map(|l| Cube::new(l, 0))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains(&self, q: Cube) -> bool {
        self.cubes.contains(&q)
    }

    /// Members in `(level, index)` order.
    pub fn iter(&self) -> impl Iterator<Item = Cube> + '_ {
        self.cubes.iter().copied()
    }

    pub fn cubes(&self) -> &BTreeSet<Cube> {
        &self.cubes
    }

    /// Any subset of a sparse family is sparse, so this never re-verifies.
    pub fn subfamily(&self, keep: impl Fn(Cube) -> bool) -> SparseFamily {
        SparseFamily {
            resolution: self.resolution,
            cubes: self.cubes.iter().copied().filter(|&q| keep(q)).collect(),
        }
    }

    /// Members without a strict ancestor in the family.
    pub fn maximal_cubes(&self) -> Vec<Cube> {
        maximal_cubes(&self.cubes)
    }

    pub fn to_text(&self) -> String {
        cubes_to_text(self.iter())
    }
}

/// Members of `set` with no strict ancestor in `set`, in order.
pub fn maximal_cubes(set: &BTreeSet<Cube>) -> Vec<Cube> {
    set.iter()
        .copied()
        .filter(|q| !q.self_and_ancestors().skip(1).any(|a| set.contains(&a)))
        .collect()
}

/// `|E_Q|` for every member, where `E_Q = Q ∖ ∪{Q' ∈ S : Q' ⊊ Q}`.
pub fn exceptional_sets(family: &SparseFamily) -> BTreeMap<Cube, f64> {
    covered_measures(&family.cubes)
        .into_iter()
        .map(|(q, covered)| (q, q.measure::<f64>() - covered))
        .collect()
}

/// For each level-`L` cell, the member whose exceptional set contains it
/// (the smallest member containing the cell), if any.
pub fn exceptional_owner(family: &SparseFamily) -> Vec<Option<Cube>> {
    let l = family.resolution;
    (0..1u64 << l)
        .map(|c| {
            Cube::new(l, c)
                .unwrap()
                .self_and_ancestors()
                .find(|a| family.contains(*a))
        })
        .collect()
}

/// `∑_{Q ∈ S, Q ⊆ R} σ(Q)`.
pub fn carleson_sum<T: Scalar>(
    family: &SparseFamily,
    sigma: &StepFunction<T>,
    r: Cube,
) -> Result<T> {
    if sigma.resolution() != family.resolution {
        return Err(Error::ResolutionMismatch {
            expected: family.resolution,
            found: sigma.resolution(),
        });
    }
    check_level(r, family.resolution)?;
    let pyr = sigma.pyramid();
    let terms: Vec<T> = family
        .iter()
        .filter(|q| q.is_within(r))
        .map(|q| pyr.integral(q))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Parameters of the top-down sparse generator.
///
/// Every selected cube at level `j` draws a gap `Δ` in `[min_gap, max_gap]`
/// and adopts between `min_count` and `max_count` distinct descendants at
/// level `j + Δ`, never more than `2^(Δ-1)`, so adopted cubes cover at most half
/// of their parent. With probability `stop_probability` a cube adopts nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Branching {
    pub min_gap: u32,
    pub max_gap: u32,
    pub min_count: u32,
    pub max_count: u32,
    pub stop_probability: f64,
}

impl Default for Branching {
    fn default() -> Self {
        Branching {
            min_gap: 1,
            max_gap: 3,
            min_count: 1,
            max_count: 3,
            stop_probability: 0.15,
        }
    }
}

impl Branching {
    /// Exactly `count` descendants `gap` levels down, no stopping.
    pub fn fixed(gap: u32, count: u32) -> Self {
        Branching {
            min_gap: gap,
            max_gap: gap,
            min_count: count,
            max_count: count,
            stop_probability: 0.0,
        }
    }
}

/// Random sparse family rooted at `[0, 1)`, deterministic in `seed`.
pub fn random_sparse(seed: u64, resolution: u32, branching: &Branching) -> Result<SparseFamily> {
    if resolution == 0 || resolution > crate::dyadic::MAX_RESOLUTION {
        return Err(Error::ResolutionTooLarge(resolution));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_gap = branching.min_gap.max(1);
    let max_gap = branching.max_gap.max(min_gap);
    let mut cubes = BTreeSet::from([Cube::ROOT]);
    let mut frontier = vec![Cube::ROOT];
    while let Some(q) = frontier.pop() {
        if q.level() >= resolution {
            continue;
        }
        if branching.stop_probability > 0.0 && rng.gen_bool(branching.stop_probability.min(1.0)) {
            continue;
        }
        let gap = rng.gen_range(min_gap..=max_gap).min(resolution - q.level());
        let budget = 1u32 << (gap - 1);
        let hi = branching.max_count.min(budget);
        let lo = branching.min_count.min(hi);
        let count = rng.gen_range(lo..=hi);
        if count == 0 {
            continue;
        }
        let level = q.level() + gap;
        let base = q.index() << gap;
        let mut picks: Vec<usize> = sample(&mut rng, 1usize << gap, count as usize).into_vec();
        picks.sort_unstable();
        for offset in picks {
            let child = Cube::new(level, base + offset as u64)?;
            cubes.insert(child);
            frontier.push(child);
        }
    }
    Ok(SparseFamily { resolution, cubes })
}

/// One cube per line as `level index`, sorted by `(level, index)`.
pub fn cubes_to_text(cubes: impl IntoIterator<Item = Cube>) -> String {
    let sorted: BTreeSet<Cube> = cubes.into_iter().collect();
    let mut out = String::new();
    for q in sorted {
        writeln!(out, "{} {}", q.level(), q.index()).unwrap();
    }
    out
}

/// Parses the cube text format. Blank lines are ignored.
pub fn parse_cubes(text: &str) -> Result<Vec<Cube>> {
    let mut cubes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let (Some(level), Some(index), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(format!("expected `level index`, got `{line}`")));
        };
        let level: u32 = level
            .parse()
            .map_err(|e| parse_err(format!("bad level `{level}`: {e}")))?;
        let index: u64 = index
            .parse()
            .map_err(|e| parse_err(format!("bad index `{index}`: {e}")))?;
        cubes.push(Cube::new(level, index).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(cubes)
}

pub fn parse_family(text: &str, resolution: u32) -> Result<SparseFamily> {
    SparseFamily::new(resolution, parse_cubes(text)?)
}
