//! The general multilinear sparse operator
//! `T(f⃗)(x) = (∑_{Q ∈ S} [∏ ⟨f_i⟩_{Q,p0}]^γ 1_Q(x))^{1/γ}` and the
//! multilinear dyadic maximal operator.
//!
//! The sparse operator is evaluated in one pass over `S`: each cube deposits
//! its term on its own node of a level-indexed tree, then a single top-down
//! sweep pushes the deposits onto the cells. Cost is `O(|S| + 2^L)`.

use crate::dyadic::{Cube, Pyramid, StepFunction};
use crate::error::{Error, Result};
use crate::scalar::{rel_diff, Scalar};
use crate::sparse::SparseFamily;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperatorSpec {
    pub family: SparseFamily,
    pub p0: f64,
    pub gamma: f64,
    pub m: usize,
}

impl SparseOperatorSpec {
    pub fn new(family: SparseFamily, p0: f64, gamma: f64, m: usize) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if !(p0.is_finite() && p0 >= 1.0) {
            return Err(Error::InvalidExponent(format!(
                "p0 = {p0} must be finite and >= 1"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidExponent(format!(
                "gamma = {gamma} must be finite and > 0"
            )));
        }
        if m == 0 {
            return Err(Error::Arity {
                expected: 1,
                found: 0,
            });
        }
        Ok(SparseOperatorSpec {
            family,
            p0,
            gamma,
            m,
        })
    }

    pub fn resolution(&self) -> u32 {
        self.family.resolution()
    }

    /// Same family and arity with other exponents.
    pub fn with_exponents(&self, p0: f64, gamma: f64) -> Result<Self> {
        Self::new(self.family.clone(), p0, gamma, self.m)
    }

    pub fn with_family(&self, family: SparseFamily) -> Result<Self> {
        Self::new(family, self.p0, self.gamma, self.m)
    }

    fn check_inputs<T: Scalar>(&self, fs: &[StepFunction<T>]) -> Result<()> {
        if fs.len() != self.m {
            return Err(Error::Arity {
                expected: self.m,
                found: fs.len(),
            });
        }
        for f in fs {
            if f.resolution() != self.resolution() {
                return Err(Error::ResolutionMismatch {
                    expected: self.resolution(),
                    found: f.resolution(),
                });
            }
        }
        Ok(())
    }
}

/// `∑_{Q ∋ x} [∏ ⟨f_i⟩_{Q,p0}]^γ` per cell, before the final `1/γ` power.
pub fn sparse_power_sum<T: Scalar>(
    spec: &SparseOperatorSpec,
    fs: &[StepFunction<T>],
) -> Result<Vec<T>> {
    spec.check_inputs(fs)?;
    let p0 = T::lit(spec.p0);
    let gamma = T::lit(spec.gamma);
    let unit_p0 = spec.p0 == 1.0;
    let pyramids: Vec<Pyramid<T>> = fs
        .iter()
        .map(|f| f.powf(p0).map(|g| g.pyramid()))
        .collect::<Result<_>>()?;
    let terms = spec.family.iter().map(|q| {
        let mut prod = T::one();
        for pyr in &pyramids {
            let a = pyr.average(q);
            prod = prod * if unit_p0 { a } else { a.powf(p0.recip()) };
        }
        let term = if spec.gamma == 1.0 {
            prod
        } else {
            prod.powf(gamma)
        };
        (q, term)
    });
    Ok(accumulate_on_cells(spec.resolution(), terms))
}

/// `∑_Q c_Q 1_Q` per level-`resolution` cell. Terms are deposited on their
/// cube's node and pushed down level by level, so each cell sums its
/// ancestors' terms from the root downwards.
pub fn accumulate_on_cells<T: Scalar>(
    resolution: u32,
    terms: impl IntoIterator<Item = (Cube, T)>,
) -> Vec<T> {
    let mut tree: Vec<Vec<T>> = (0..=resolution)
        .map(|j| vec![T::zero(); 1usize << j])
        .collect();
    for (q, term) in terms {
        let slot = &mut tree[q.level() as usize][q.index() as usize];
        *slot = *slot + term;
    }
    for j in 0..resolution as usize {
        let (upper, lower) = tree.split_at_mut(j + 1);
        let parents = &upper[j];
        for (c, v) in lower[0].iter_mut().enumerate() {
            *v = parents[c >> 1] + *v;
        }
    }
    tree.pop().unwrap()
}

/// `T_{p0,γ,S}(f⃗)` as a step function at the family's resolution.
pub fn sparse_op<T: Scalar>(
    spec: &SparseOperatorSpec,
    fs: &[StepFunction<T>],
) -> Result<StepFunction<T>> {
    let sums = sparse_power_sum(spec, fs)?;
    let inv = T::lit(spec.gamma).recip();
    let cells = if spec.gamma == 1.0 {
        sums
    } else {
        sums.into_iter().map(|s| s.powf(inv)).collect()
    };
    StepFunction::new(spec.resolution(), cells)
}

/// Largest cellwise relative deviation between `T_{p0,γ,S}(f⃗)` and
/// `T_{1,γ/p0,S}(f_1^{p0}, ..., f_m^{p0})^{1/p0}`.
pub fn rescale_identity_check<T: Scalar>(
    spec: &SparseOperatorSpec,
    fs: &[StepFunction<T>],
) -> Result<T> {
    let direct = sparse_op(spec, fs)?;
    if spec.p0 == 1.0 {
        return Ok(T::zero());
    }
    let p0 = T::lit(spec.p0);
    let powered: Vec<StepFunction<T>> = fs.iter().map(|f| f.powf(p0)).collect::<Result<_>>()?;
    let reduced = sparse_op(&spec.with_exponents(1.0, spec.gamma / spec.p0)?, &powered)?;
    let inv = p0.recip();
    Ok(direct
        .cells()
        .iter()
        .zip(reduced.cells())
        .map(|(&a, &b)| rel_diff(a, b.powf(inv)))
        .fold(T::zero(), T::max))
}

/// `M(f⃗ σ⃗)(x) = max_{Q ∋ x} ∏ ⟨f_i σ_i⟩_Q` over dyadic cubes of levels `0..=L`.
pub fn multi_maximal<T: Scalar>(
    fs: &[StepFunction<T>],
    sigmas: &[StepFunction<T>],
) -> Result<StepFunction<T>> {
    if fs.len() != sigmas.len() || fs.is_empty() {
        return Err(Error::Arity {
            expected: fs.len().max(1),
            found: sigmas.len(),
        });
    }
    let l = fs[0].resolution();
    let pyramids: Vec<Pyramid<T>> = fs
        .iter()
        .zip(sigmas)
        .map(|(f, s)| {
            if f.resolution() != l {
                return Err(Error::ResolutionMismatch {
                    expected: l,
                    found: f.resolution(),
                });
            }
            f.mul(s).map(|g| g.pyramid())
        })
        .collect::<Result<_>>()?;
    let product = |q: Cube| -> T {
        pyramids
            .iter()
            .fold(T::one(), |acc, pyr| acc * pyr.average(q))
    };
    let mut best = vec![product(Cube::ROOT)];
    for level in 1..=l {
        best = Cube::ROOT
            .descendants_at(level)
            .map(|q| best[(q.index() >> 1) as usize].max(product(q)))
            .collect();
    }
    StepFunction::new(l, best)
}
