//! Stopping-time machinery: level sets of the composite characteristic,
//! principal cubes, the projection onto stopping cubes, and numerical
//! diagnostics for the two Carleson-type estimates the decomposition relies on.

use std::collections::{BTreeMap, BTreeSet};

use crate::dyadic::{check_level, lp_norm, same_resolution, Cube, StepFunction};
use crate::error::{Error, Result};
use crate::operators::accumulate_on_cells;
use crate::scalar::{pairwise_sum, Scalar};
use crate::sparse::{maximal_cubes, SparseFamily};
use crate::weights::{CompositeCharacteristic, ExponentTuple};

/// Partition of a family by `Ψ(Q) = ⟨w⟩_Q ∏⟨σ_i⟩_Q^{e_i}` into
/// `S_a = {Q : 2^a < Ψ(Q) <= 2^{a+1}}`, plus the cubes with `Ψ = 0`.
#[derive(Debug, Clone)]
pub struct LevelSets<T> {
    pub buckets: BTreeMap<i32, SparseFamily>,
    pub null: SparseFamily,
    pub psi: BTreeMap<Cube, T>,
}

impl<T: Scalar> LevelSets<T> {
    /// Smallest and largest occupied bucket index.
    pub fn window(&self) -> Option<(i32, i32)> {
        Some((
            *self.buckets.keys().next()?,
            *self.buckets.keys().next_back()?,
        ))
    }

    pub fn total_len(&self) -> usize {
        self.buckets.values().map(SparseFamily::len).sum::<usize>() + self.null.len()
    }
}

/// The `a` with `2^a < psi <= 2^{a+1}`, for finite `psi > 0`.
pub fn bucket_index<T: Scalar>(psi: T) -> i32 {
    let two = T::lit(2.0);
    let mut a = psi.log2().ceil().to_i32().unwrap_or(0) - 1;
    // log2 may round across a power of two; settle with exact comparisons.
    while psi <= two.powi(a) {
        a -= 1;
    }
    while psi > two.powi(a + 1) {
        a += 1;
    }
    a
}

pub fn level_sets<T: Scalar>(
    family: &SparseFamily,
    w: &StepFunction<T>,
    sigmas: &[StepFunction<T>],
    e: &ExponentTuple,
) -> Result<LevelSets<T>> {
    if w.resolution() != family.resolution() {
        return Err(Error::ResolutionMismatch {
            expected: family.resolution(),
            found: w.resolution(),
        });
    }
    let cc = CompositeCharacteristic::new(w, sigmas, e)?;
    let psi: BTreeMap<Cube, T> = family.iter().map(|q| (q, cc.psi(q))).collect();
    for (&q, &v) in &psi {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("Psi({q}) = {v}")));
        }
    }
    let mut sets: BTreeMap<i32, Vec<Cube>> = BTreeMap::new();
    let mut null = Vec::new();
    for (&q, &v) in &psi {
        if v == T::zero() {
            null.push(q);
        } else {
            sets.entry(bucket_index(v)).or_default().push(q);
        }
    }
    let buckets = sets
        .into_iter()
        .map(|(a, cubes)| {
            let keep: BTreeSet<Cube> = cubes.into_iter().collect();
            (a, family.subfamily(|q| keep.contains(&q)))
        })
        .collect();
    let null: BTreeSet<Cube> = null.into_iter().collect();
    Ok(LevelSets {
        buckets,
        null: family.subfamily(|q| null.contains(&q)),
        psi,
    })
}

/// Principal cubes of `(f, σ)` inside a base collection.
///
/// `F_0` are the maximal base cubes; the children of a stopping cube `F` are
/// the maximal base cubes `Q ⊊ F` with `⟨f⟩_Q^σ > 2⟨f⟩_F^σ`.
#[derive(Debug, Clone)]
pub struct PrincipalForest<T> {
    generations: Vec<Vec<Cube>>,
    parent: BTreeMap<Cube, Option<Cube>>,
    averages: BTreeMap<Cube, T>,
    masses: BTreeMap<Cube, T>,
    base: BTreeSet<Cube>,
}

impl<T: Scalar> PrincipalForest<T> {
    pub fn generations(&self) -> &[Vec<Cube>] {
        &self.generations
    }

    /// Number of generations.
    pub fn depth(&self) -> usize {
        self.generations.len()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn contains(&self, q: Cube) -> bool {
        self.parent.contains_key(&q)
    }

    /// Stopping cubes in `(level, index)` order.
    pub fn cubes(&self) -> impl Iterator<Item = Cube> + '_ {
        self.parent.keys().copied()
    }

    pub fn roots(&self) -> &[Cube] {
        &self.generations[0]
    }

    pub fn parent(&self, q: Cube) -> Option<Cube> {
        self.parent.get(&q).copied().flatten()
    }

    pub fn children(&self, f: Cube) -> Vec<Cube> {
        self.parent
            .iter()
            .filter(|(_, p)| **p == Some(f))
            .map(|(&q, _)| q)
            .collect()
    }

    /// `⟨f⟩_F^σ` recorded at construction.
    pub fn average(&self, f: Cube) -> Option<T> {
        self.averages.get(&f).copied()
    }

    /// `σ(F)` recorded at construction.
    pub fn mass(&self, f: Cube) -> Option<T> {
        self.masses.get(&f).copied()
    }

    pub fn base(&self) -> &BTreeSet<Cube> {
        &self.base
    }

    /// `π_F(Q)`: the minimal stopping cube containing `q`.
    pub fn project(&self, q: Cube) -> Option<Cube> {
        q.self_and_ancestors().find(|a| self.contains(*a))
    }
}

pub fn principal_cubes<T: Scalar>(
    base: &BTreeSet<Cube>,
    f: &StepFunction<T>,
    sigma: &StepFunction<T>,
) -> Result<PrincipalForest<T>> {
    if base.is_empty() {
        return Err(Error::EmptyFamily);
    }
    same_resolution(f, sigma)?;
    for &q in base {
        check_level(q, f.resolution())?;
    }
    let moment = f.mul(sigma)?.pyramid();
    let mass = sigma.pyramid();
    let avg = |q: Cube| {
        let m = mass.integral(q);
        if m == T::zero() {
            T::zero()
        } else {
            moment.integral(q) / m
        }
    };

    // Containment tree of the base collection.
    let mut below: BTreeMap<Cube, Vec<Cube>> = BTreeMap::new();
    for &q in base {
        if let Some(p) = q.self_and_ancestors().skip(1).find(|a| base.contains(a)) {
            below.entry(p).or_default().push(q);
        }
    }

    let roots = maximal_cubes(base);
    let mut parent: BTreeMap<Cube, Option<Cube>> = roots.iter().map(|&r| (r, None)).collect();
    let mut generations = vec![roots];
    loop {
        let mut next = Vec::new();
        for &top in generations.last().unwrap() {
            let threshold = avg(top) + avg(top);
            let mut stack: Vec<Cube> = below.get(&top).cloned().unwrap_or_default();
            while let Some(q) = stack.pop() {
                if avg(q) > threshold {
                    next.push(q);
                    parent.insert(q, Some(top));
                } else if let Some(kids) = below.get(&q) {
                    stack.extend_from_slice(kids);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        generations.push(next);
    }
    let averages = parent.keys().map(|&q| (q, avg(q))).collect();
    let masses = parent.keys().map(|&q| (q, mass.integral(q))).collect();
    Ok(PrincipalForest {
        generations,
        parent,
        averages,
        masses,
        base: base.clone(),
    })
}

/// `π(Q) = (π_{F_1}(Q), ..., π_{F_k}(Q))`.
pub fn pi_map<T: Scalar>(forests: &[&PrincipalForest<T>], q: Cube) -> Result<Vec<Cube>> {
    forests
        .iter()
        .map(|forest| forest.project(q).ok_or(Error::OutsideForest(q)))
        .collect()
}

/// `∑_F (⟨f⟩_F^σ)^p σ(F) / ‖f‖^p_{L^p(σ)}`.
///
/// Each child family carries at most half the `σ`-mass of its parent, so the
/// sets `F ∖ ∪ch(F)` hold half of each `σ(F)` and are disjoint; Doob's
/// inequality for the `σ`-weighted dyadic maximal function then bounds the
/// ratio by `2 (p')^p`.
pub fn carleson_embedding_check<T: Scalar>(
    forest: &PrincipalForest<T>,
    f: &StepFunction<T>,
    sigma: &StepFunction<T>,
    p: T,
) -> Result<T> {
    same_resolution(f, sigma)?;
    let norm_p = lp_norm(f, sigma, p)?.powf(p);
    if norm_p == T::zero() {
        return Err(Error::ZeroNorm);
    }
    let moment = f.mul(sigma)?.pyramid();
    let mass = sigma.pyramid();
    let terms: Vec<T> = forest
        .cubes()
        .map(|q| {
            let m = mass.integral(q);
            if m == T::zero() {
                T::zero()
            } else {
                (moment.integral(q) / m).powf(p) * m
            }
        })
        .collect();
    Ok(pairwise_sum(&terms) / norm_p)
}

/// The constant `2 (p')^p` bounding [`carleson_embedding_check`].
pub fn carleson_embedding_bound(p: f64) -> f64 {
    2.0 * crate::scalar::conjugate(p).powf(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsReport<T> {
    /// Largest LHS/RHS over nonempty fibers; zero when there are none.
    pub max_ratio: T,
    pub fibers: usize,
    /// `π` value of the worst fiber.
    pub worst: Option<Vec<Cube>>,
}

/// For each fiber `{Q ∈ S_a : π(Q) = (F_1, ..., F_m)}` compares
/// `‖∑ ∏⟨σ_i⟩_Q 1_Q‖_{L^p(w)}` with
/// `2^{a/p} ∏ (∑ σ_i(Q))^{1/p_i}`.
///
/// Works on the `p0 = 1` reduction of `e`, which is the problem the stopping
/// construction is set up for. A single-cube fiber has ratio
/// `(Ψ(Q)/2^a)^{1/p} ∈ (1, 2^{1/p}]`.
pub fn ls_bound_check<T: Scalar>(
    bucket: &SparseFamily,
    forests: &[&PrincipalForest<T>],
    w: &StepFunction<T>,
    sigmas: &[StepFunction<T>],
    e: &ExponentTuple,
    a: i32,
) -> Result<LsReport<T>> {
    let e = e.reduced();
    if sigmas.len() != e.m() || forests.len() != e.m() {
        return Err(Error::Arity {
            expected: e.m(),
            found: sigmas.len().min(forests.len()),
        });
    }
    for s in sigmas {
        same_resolution(w, s)?;
    }
    let l = w.resolution();
    let pyramids: Vec<_> = sigmas.iter().map(StepFunction::pyramid).collect();
    let mut fibers: BTreeMap<Vec<Cube>, Vec<Cube>> = BTreeMap::new();
    for q in bucket.iter() {
        fibers.entry(pi_map(forests, q)?).or_default().push(q);
    }
    let p = T::lit(e.p());
    let scale = T::lit(2.0).powf(T::lit(a as f64) / p);
    let mut report = LsReport {
        max_ratio: T::zero(),
        fibers: fibers.len(),
        worst: None,
    };
    for (key, cubes) in fibers {
        let g = accumulate_on_cells(
            l,
            cubes.iter().map(|&q| {
                (
                    q,
                    pyramids.iter().fold(T::one(), |acc, s| acc * s.average(q)),
                )
            }),
        );
        let lhs = lp_norm(&StepFunction::new(l, g)?, w, p)?;
        let mut rhs = scale;
        for (s, &pi) in pyramids.iter().zip(e.p_i()) {
            let total: Vec<T> = cubes.iter().map(|&q| s.integral(q)).collect();
            rhs = rhs * pairwise_sum(&total).powf(T::lit(pi).recip());
        }
        let ratio = if rhs == T::zero() {
            T::zero()
        } else {
            lhs / rhs
        };
        if report.worst.is_none() || ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst = Some(key);
        }
    }
    Ok(report)
}

/// Level sets plus, per bucket, one principal forest per input function and
/// the diagnostics computed on them.
#[derive(Debug, Clone)]
pub struct Decomposition<T> {
    pub level_sets: LevelSets<T>,
    pub buckets: BTreeMap<i32, BucketDecomposition<T>>,
}

#[derive(Debug, Clone)]
pub struct BucketDecomposition<T> {
    pub forests: Vec<PrincipalForest<T>>,
    /// Carleson embedding ratio per forest, at exponent `p_i / p0`.
    pub carleson_ratios: Vec<Option<T>>,
    pub ls: LsReport<T>,
}

/// Decomposes `family` for the `σ`-form functions `phis` (the operator acts on
/// `φ_i σ_i`) against weights `w`, `σ⃗`.
pub fn decompose<T: Scalar>(
    family: &SparseFamily,
    phis: &[StepFunction<T>],
    w: &StepFunction<T>,
    sigmas: &[StepFunction<T>],
    e: &ExponentTuple,
) -> Result<Decomposition<T>> {
    if phis.len() != e.m() {
        return Err(Error::Arity {
            expected: e.m(),
            found: phis.len(),
        });
    }
    let level_sets = level_sets(family, w, sigmas, e)?;
    let reduced = e.reduced();
    let mut buckets = BTreeMap::new();
    for (&a, bucket) in &level_sets.buckets {
        let forests = phis
            .iter()
            .zip(sigmas)
            .map(|(phi, s)| principal_cubes(bucket.cubes(), phi, s))
            .collect::<Result<Vec<_>>>()?;
        let carleson_ratios = forests
            .iter()
            .zip(phis.iter().zip(sigmas))
            .zip(reduced.p_i())
            .map(|((forest, (phi, s)), &pi)| {
                match carleson_embedding_check(forest, phi, s, T::lit(pi)) {
                    Ok(r) => Ok(Some(r)),
                    Err(Error::ZeroNorm) => Ok(None),
                    Err(err) => Err(err),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&PrincipalForest<T>> = forests.iter().collect();
        let ls = ls_bound_check(bucket, &refs, w, sigmas, e, a)?;
        buckets.insert(
            a,
            BucketDecomposition {
                forests,
                carleson_ratios,
                ls,
            },
        );
    }
    Ok(Decomposition {
        level_sets,
        buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::random_sparse;

    fn c(level: u32, index: u64) -> Cube {
        Cube::new(level, index).unwrap()
    }

    fn sf(cells: &[f64]) -> StepFunction<f64> {
        StepFunction::new(cells.len().trailing_zeros(), cells.to_vec()).unwrap()
    }

    #[test]
    fn bucket_index_boundaries() {
        assert_eq!(bucket_index(1.0f64), -1);
        assert_eq!(bucket_index(3.0f64), 1);
        assert_eq!(bucket_index(4.0f64), 1);
        assert_eq!(bucket_index(4.0000001f64), 2);
        assert_eq!(bucket_index(0.3f64), -2);
        for k in -30..30 {
            let v = 2f64.powi(k);
            assert_eq!(bucket_index(v), k - 1);
            assert_eq!(bucket_index(v * (1.0 + 1e-15)), k);
        }
    }

    #[test]
    fn level_sets_of_unit_weights() {
        let fam = random_sparse(4, 6, &Default::default()).unwrap();
        let one = StepFunction::<f64>::constant(6, 1.0).unwrap();
        let e = ExponentTuple::new(vec![2.0, 3.0], 1.0, 1.0).unwrap();
        let ls = level_sets(&fam, &one, &[one.clone(), one.clone()], &e).unwrap();
        assert_eq!(ls.buckets.len(), 1);
        assert_eq!(ls.buckets[&-1].len(), fam.len());
        assert!(ls.null.is_empty());
        assert_eq!(ls.window(), Some((-1, -1)));
    }

    #[test]
    fn level_sets_null_bucket() {
        let fam = SparseFamily::new(1, [Cube::ROOT, c(1, 0)]).unwrap();
        let w = sf(&[1.0, 1.0]);
        let s = sf(&[0.0, 1.0]);
        let e = ExponentTuple::new(vec![2.0], 1.0, 1.0).unwrap();
        let ls = level_sets(&fam, &w, &[s], &e).unwrap();
        assert_eq!(ls.null.iter().collect::<Vec<_>>(), vec![c(1, 0)]);
        assert_eq!(ls.total_len(), 2);
    }

    #[test]
    fn principal_cube_examples() {
        let one = StepFunction::<f64>::constant(3, 1.0).unwrap();
        let f = StepFunction::<f64>::constant(3, 2.0).unwrap();
        let all: BTreeSet<Cube> = crate::dyadic::all_cubes(3).collect();
        let forest = principal_cubes(&all, &f, &one).unwrap();
        assert_eq!(forest.generations(), &[vec![Cube::ROOT]]);

        let f = sf(&[16.0, 1.0, 1.0, 1.0]);
        let one = StepFunction::<f64>::constant(2, 1.0).unwrap();
        let base = BTreeSet::from([Cube::ROOT, c(1, 0), c(2, 0)]);
        let forest = principal_cubes(&base, &f, &one).unwrap();
        assert_eq!(
            forest.cubes().collect::<Vec<_>>(),
            vec![Cube::ROOT, c(2, 0)]
        );
        assert_eq!(forest.parent(c(2, 0)), Some(Cube::ROOT));
        assert_eq!(forest.average(Cube::ROOT), Some(4.75));

        let single = BTreeSet::from([c(1, 1)]);
        let forest = principal_cubes(&single, &f, &one).unwrap();
        assert_eq!(forest.cubes().collect::<Vec<_>>(), vec![c(1, 1)]);
        assert!(principal_cubes(&BTreeSet::new(), &f, &one).is_err());
    }

    #[test]
    fn pi_map_examples() {
        let f = sf(&[16.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let one = StepFunction::<f64>::constant(3, 1.0).unwrap();
        let base = BTreeSet::from([Cube::ROOT, c(2, 0)]);
        let forest = principal_cubes(&base, &f, &one).unwrap();
        assert!(forest.contains(c(2, 0)));
        assert_eq!(pi_map(&[&forest], c(2, 0)).unwrap(), vec![c(2, 0)]);
        assert_eq!(pi_map(&[&forest], c(3, 0)).unwrap(), vec![c(2, 0)]);
        assert_eq!(pi_map(&[&forest], c(3, 5)).unwrap(), vec![Cube::ROOT]);

        let root_only = principal_cubes(&BTreeSet::from([Cube::ROOT]), &f, &one).unwrap();
        for q in crate::dyadic::all_cubes(3) {
            assert_eq!(pi_map(&[&root_only, &forest], q).unwrap()[0], Cube::ROOT);
        }

        let off = principal_cubes(&BTreeSet::from([c(1, 0)]), &f, &one).unwrap();
        assert_eq!(pi_map(&[&off], c(1, 1)), Err(Error::OutsideForest(c(1, 1))));
    }

    #[test]
    fn carleson_embedding_trivial() {
        let one = StepFunction::<f64>::constant(4, 1.0).unwrap();
        let forest = principal_cubes(&BTreeSet::from([Cube::ROOT]), &one, &one).unwrap();
        let r = carleson_embedding_check(&forest, &one, &one, 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        assert!(r <= carleson_embedding_bound(2.0));
        assert_eq!(carleson_embedding_bound(2.0), 8.0);

        let f = sf(&[0.5, 3.0, 1.0, 7.0]);
        let s = sf(&[2.0, 1.0, 0.25, 1.0]);
        let forest = principal_cubes(&BTreeSet::from([Cube::ROOT]), &f, &s).unwrap();
        for p in [1.5, 2.0, 4.0] {
            assert!(carleson_embedding_check(&forest, &f, &s, p).unwrap() <= 1.0 + 1e-15);
        }
        let zero = StepFunction::<f64>::constant(2, 0.0).unwrap();
        assert!(matches!(
            carleson_embedding_check(&forest, &zero, &s, 2.0),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn ls_single_cube_fiber() {
        let w = sf(&[1.0, 5.0, 2.0, 0.5]);
        let s1 = sf(&[3.0, 1.0, 0.2, 1.0]);
        let s2 = sf(&[0.7, 0.7, 4.0, 1.0]);
        let e = ExponentTuple::new(vec![3.0, 2.5], 1.0, 1.0).unwrap();
        let q = c(1, 1);
        let fam = SparseFamily::new(2, [q]).unwrap();
        let ls = level_sets(&fam, &w, &[s1.clone(), s2.clone()], &e).unwrap();
        let (&a, bucket) = ls.buckets.iter().next().unwrap();
        let f1 = principal_cubes(bucket.cubes(), &s1, &s1).unwrap();
        let f2 = principal_cubes(bucket.cubes(), &s2, &s2).unwrap();
        let rep = ls_bound_check(bucket, &[&f1, &f2], &w, &[s1, s2], &e, a).unwrap();
        assert_eq!(rep.fibers, 1);
        let expected = (ls.psi[&q] / 2f64.powi(a)).powf(1.0 / e.p());
        assert!((rep.max_ratio - expected).abs() < 1e-12 * expected);
        assert!(rep.max_ratio > 1.0 && rep.max_ratio <= 2f64.powf(1.0 / e.p()) * (1.0 + 1e-12));
    }

    #[test]
    fn ls_empty_bucket_has_no_fibers() {
        let one = StepFunction::<f64>::constant(2, 1.0).unwrap();
        let forest = principal_cubes(&BTreeSet::from([Cube::ROOT]), &one, &one).unwrap();
        let empty = SparseFamily::root_only(2).subfamily(|_| false);
        let e = ExponentTuple::new(vec![2.0, 2.0], 1.0, 1.0).unwrap();
        let rep = ls_bound_check(
            &empty,
            &[&forest, &forest],
            &one,
            &[one.clone(), one.clone()],
            &e,
            0,
        )
        .unwrap();
        assert_eq!(rep.fibers, 0);
        assert_eq!(rep.max_ratio, 0.0);
    }

    #[test]
    fn decompose_unit_weights() {
        let fam = random_sparse(9, 6, &Default::default()).unwrap();
        let one = StepFunction::<f64>::constant(6, 1.0).unwrap();
        let e = ExponentTuple::new(vec![2.0, 2.0], 1.0, 1.0).unwrap();
        let d = decompose(
            &fam,
            &[one.clone(), one.clone()],
            &one,
            &[one.clone(), one.clone()],
            &e,
        )
        .unwrap();
        let b = &d.buckets[&-1];
        assert_eq!(b.forests[0].generations(), &[vec![Cube::ROOT]]);
        assert!(b.ls.max_ratio.is_finite() && b.ls.max_ratio > 0.0);
        assert_eq!(b.carleson_ratios[0], Some(1.0));
    }
}
