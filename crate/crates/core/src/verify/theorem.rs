//! The weighted bound for the sparse operator as an executable inequality.
//!
//! For weights `w`, `σ⃗` and dual weights `w_i = σ_i^{1 - p_i/p0}` the bound
//! reads
//!
//! ```text
//! ‖T_{p0,γ,S}(f⃗)‖_{L^p(w)} ≲ [w,σ⃗]^{1/p}_{A_{P/p0}}
//!     ( ∏ [σ_i]^{1/p_i}_{A∞} + [w]^{(1/γ - 1/p)_+}_{A∞} ∑_j ∏_{i≠j} [σ_i]^{1/p_i}_{A∞} )
//!     ∏ ‖f_i‖_{L^{p_i}(w_i)}
//! ```
//!
//! and the ratio of the two sides is what the experiments track.

use crate::dyadic::{lp_norm, StepFunction};
use crate::error::{Error, Result};
use crate::operators::{multi_maximal, sparse_op, sparse_power_sum, SparseOperatorSpec};
use crate::scalar::{positive_part, rel_diff, Scalar};
use crate::sparse::SparseFamily;
use crate::stopping::level_sets;
use crate::weights::{a_infty, a_vec_p, dual_weights, Characteristic, ExponentTuple, Regime};

#[derive(Debug, Clone)]
pub struct TheoremInstance<T> {
    pub spec: SparseOperatorSpec,
    pub functions: Vec<StepFunction<T>>,
    pub sigmas: Vec<StepFunction<T>>,
    pub w: StepFunction<T>,
    pub exponents: ExponentTuple,
    /// `w_i = σ_i^{1 - p_i/p0}`.
    pub duals: Vec<StepFunction<T>>,
}

impl<T: Scalar> TheoremInstance<T> {
    pub fn new(
        family: SparseFamily,
        functions: Vec<StepFunction<T>>,
        sigmas: Vec<StepFunction<T>>,
        w: StepFunction<T>,
        exponents: ExponentTuple,
    ) -> Result<Self> {
        exponents.require_applicable()?;
        let m = exponents.m();
        for len in [functions.len(), sigmas.len()] {
            if len != m {
                return Err(Error::Arity {
                    expected: m,
                    found: len,
                });
            }
        }
        let l = family.resolution();
        for f in functions.iter().chain(&sigmas).chain(std::iter::once(&w)) {
            if f.resolution() != l {
                return Err(Error::ResolutionMismatch {
                    expected: l,
                    found: f.resolution(),
                });
            }
        }
        let spec = SparseOperatorSpec::new(family, exponents.p0(), exponents.gamma(), m)?;
        let (duals, _) = dual_weights(&sigmas, &exponents)?;
        Ok(TheoremInstance {
            spec,
            functions,
            sigmas,
            w,
            exponents,
            duals,
        })
    }

    /// The one-weight choice `w = ∏ w_i^{p/p_i}`.
    pub fn with_dual_w(
        family: SparseFamily,
        functions: Vec<StepFunction<T>>,
        sigmas: Vec<StepFunction<T>>,
        exponents: ExponentTuple,
    ) -> Result<Self> {
        let (_, w) = dual_weights(&sigmas, &exponents)?;
        Self::new(family, functions, sigmas, w, exponents)
    }

    pub fn resolution(&self) -> u32 {
        self.spec.resolution()
    }

    pub fn regime(&self) -> Regime {
        self.exponents.regime()
    }
}

/// Characteristic constants entering the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremConstants<T> {
    pub a_vec_p: Characteristic<T>,
    pub a_infty_w: Characteristic<T>,
    pub a_infty_sigmas: Vec<Characteristic<T>>,
}

pub fn theorem_constants<T: Scalar>(inst: &TheoremInstance<T>) -> Result<TheoremConstants<T>> {
    Ok(TheoremConstants {
        a_vec_p: a_vec_p(&inst.w, &inst.sigmas, &inst.exponents)?,
        a_infty_w: a_infty(&inst.w)?,
        a_infty_sigmas: inst.sigmas.iter().map(a_infty).collect::<Result<_>>()?,
    })
}

/// Assembles the bracketed constant from already computed characteristics.
pub fn rhs_from_constants<T: Scalar>(c: &TheoremConstants<T>, e: &ExponentTuple) -> Result<T> {
    let p = T::lit(e.p());
    let factors: Vec<T> = c
        .a_infty_sigmas
        .iter()
        .zip(e.p_i())
        .map(|(s, &pi)| s.value.powf(T::lit(pi).recip()))
        .collect();
    let all: T = factors.iter().fold(T::one(), |acc, &x| acc * x);
    let leave_one_out = (0..factors.len()).fold(T::zero(), |acc, j| {
        acc + factors
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .fold(T::one(), |a, (_, &x)| a * x)
    });
    let w_exp = T::lit(positive_part(1.0 / e.gamma() - 1.0 / e.p()));
    let w_factor = if w_exp == T::zero() {
        T::one()
    } else {
        c.a_infty_w.value.powf(w_exp)
    };
    let rhs = c.a_vec_p.value.powf(p.recip()) * (all + w_factor * leave_one_out);
    if !rhs.is_finite() || rhs <= T::zero() {
        return Err(Error::NonFinite(format!("theorem constant = {rhs}")));
    }
    Ok(rhs)
}

/// The constant multiplying `∏ ‖f_i‖_{L^{p_i}(w_i)}` on the right-hand side.
pub fn theorem_rhs<T: Scalar>(inst: &TheoremInstance<T>) -> Result<T> {
    rhs_from_constants(&theorem_constants(inst)?, &inst.exponents)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremEvaluation<T> {
    /// `‖T(f⃗)‖_{L^p(w)}`.
    pub lhs: T,
    /// Full right-hand side, constant times norms.
    pub rhs: T,
    pub constant: T,
    pub norms: Vec<T>,
    pub ratio: T,
    pub constants: TheoremConstants<T>,
    pub regime: Regime,
}

pub fn evaluate_theorem<T: Scalar>(inst: &TheoremInstance<T>) -> Result<TheoremEvaluation<T>> {
    let e = &inst.exponents;
    let norms: Vec<T> = inst
        .functions
        .iter()
        .zip(&inst.duals)
        .zip(e.p_i())
        .map(|((f, wi), &pi)| lp_norm(f, wi, T::lit(pi)))
        .collect::<Result<_>>()?;
    let norm_product = norms.iter().fold(T::one(), |acc, &n| acc * n);
    if norm_product == T::zero() {
        return Err(Error::ZeroNorm);
    }
    let constants = theorem_constants(inst)?;
    let constant = rhs_from_constants(&constants, e)?;
    let lhs = lp_norm(
        &sparse_op(&inst.spec, &inst.functions)?,
        &inst.w,
        T::lit(e.p()),
    )?;
    let rhs = constant * norm_product;
    Ok(TheoremEvaluation {
        lhs,
        rhs,
        constant,
        norms,
        ratio: lhs / rhs,
        constants,
        regime: e.regime(),
    })
}

/// `‖T(f⃗)‖_{L^p(w)} / (theorem_rhs · ∏ ‖f_i‖_{L^{p_i}(w_i)})`.
pub fn theorem_ratio<T: Scalar>(inst: &TheoremInstance<T>) -> Result<T> {
    Ok(evaluate_theorem(inst)?.ratio)
}

/// The same ratio in `σ`-form for `p0 = 1`: the operator acts on `φ_i σ_i`
/// and the inputs are measured in `L^{p_i}(σ_i)`.
pub fn theorem_ratio_sigma_form<T: Scalar>(
    family: SparseFamily,
    phis: &[StepFunction<T>],
    sigmas: &[StepFunction<T>],
    w: &StepFunction<T>,
    e: &ExponentTuple,
) -> Result<T> {
    if e.p0() != 1.0 {
        return Err(Error::InvalidExponent(format!(
            "sigma form needs p0 = 1, got {}",
            e.p0()
        )));
    }
    e.require_applicable()?;
    let inputs: Vec<StepFunction<T>> = phis
        .iter()
        .zip(sigmas)
        .map(|(f, s)| f.mul(s))
        .collect::<Result<_>>()?;
    let norm_product = phis
        .iter()
        .zip(sigmas)
        .zip(e.p_i())
        .map(|((f, s), &pi)| lp_norm(f, s, T::lit(pi)))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::one(), |a, n| a * n);
    if norm_product == T::zero() {
        return Err(Error::ZeroNorm);
    }
    let constants = TheoremConstants {
        a_vec_p: a_vec_p(w, sigmas, e)?,
        a_infty_w: a_infty(w)?,
        a_infty_sigmas: sigmas.iter().map(a_infty).collect::<Result<_>>()?,
    };
    let constant = rhs_from_constants(&constants, e)?;
    let spec = SparseOperatorSpec::new(family, 1.0, e.gamma(), e.m())?;
    let lhs = lp_norm(&sparse_op(&spec, &inputs)?, w, T::lit(e.p()))?;
    Ok(lhs / (constant * norm_product))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalEvaluation<T> {
    pub lhs: T,
    pub rhs: T,
    pub ratio: T,
    pub a_vec_p: Characteristic<T>,
    pub a_infty_sigmas: Vec<Characteristic<T>>,
}

/// `‖M(f⃗σ⃗)‖_{L^p(w)} / ([w,σ⃗]^{1/p}_{A_P} ∏ [σ_i]^{1/p_i}_{A∞} ∏ ‖f_i‖_{L^{p_i}(σ_i)})`.
///
/// Uses the plain `A_P` characteristic; `p0` and `γ` of `e` are ignored.
pub fn evaluate_maximal<T: Scalar>(
    fs: &[StepFunction<T>],
    sigmas: &[StepFunction<T>],
    w: &StepFunction<T>,
    e: &ExponentTuple,
) -> Result<MaximalEvaluation<T>> {
    let plain = ExponentTuple::new(e.p_i().to_vec(), 1.0, 1.0)?;
    if fs.len() != plain.m() {
        return Err(Error::Arity {
            expected: plain.m(),
            found: fs.len(),
        });
    }
    let norm_product = fs
        .iter()
        .zip(sigmas)
        .zip(plain.p_i())
        .map(|((f, s), &pi)| lp_norm(f, s, T::lit(pi)))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::one(), |a, n| a * n);
    if norm_product == T::zero() {
        return Err(Error::ZeroNorm);
    }
    let p = T::lit(plain.p());
    let avp = a_vec_p(w, sigmas, &plain)?;
    let ainf: Vec<Characteristic<T>> = sigmas.iter().map(a_infty).collect::<Result<_>>()?;
    let constant = ainf
        .iter()
        .zip(plain.p_i())
        .fold(avp.value.powf(p.recip()), |acc, (c, &pi)| {
            acc * c.value.powf(T::lit(pi).recip())
        });
    if !constant.is_finite() || constant <= T::zero() {
        return Err(Error::NonFinite(format!("maximal constant = {constant}")));
    }
    let lhs = lp_norm(&multi_maximal(fs, sigmas)?, w, p)?;
    let rhs = constant * norm_product;
    Ok(MaximalEvaluation {
        lhs,
        rhs,
        ratio: lhs / rhs,
        a_vec_p: avp,
        a_infty_sigmas: ainf,
    })
}

pub fn maximal_ratio<T: Scalar>(
    fs: &[StepFunction<T>],
    sigmas: &[StepFunction<T>],
    w: &StepFunction<T>,
    e: &ExponentTuple,
) -> Result<T> {
    Ok(evaluate_maximal(fs, sigmas, w, e)?.ratio)
}

/// Largest cellwise relative gap between `∑_a (T restricted to S_a)^γ`, with
/// the null bucket included, and `T^γ`.
pub fn bucket_reconstruction<T: Scalar>(inst: &TheoremInstance<T>) -> Result<T> {
    let full = sparse_power_sum(&inst.spec, &inst.functions)?;
    let ls = level_sets(&inst.spec.family, &inst.w, &inst.sigmas, &inst.exponents)?;
    let mut total = vec![T::zero(); full.len()];
    for part in ls.buckets.values().chain(std::iter::once(&ls.null)) {
        if part.is_empty() {
            continue;
        }
        let piece = sparse_power_sum(&inst.spec.with_family(part.clone())?, &inst.functions)?;
        for (t, v) in total.iter_mut().zip(piece) {
            *t = *t + v;
        }
    }
    Ok(full
        .iter()
        .zip(&total)
        .map(|(&a, &b)| rel_diff(a, b))
        .fold(T::zero(), T::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::power_weight;

    fn ones(l: u32, m: usize) -> Vec<StepFunction<f64>> {
        vec![StepFunction::<f64>::constant(l, 1.0).unwrap(); m]
    }

    #[test]
    fn unit_instance_ratio_is_one_third() {
        let e = ExponentTuple::new(vec![2.0, 2.0], 1.0, 1.0).unwrap();
        let inst = TheoremInstance::new(
            SparseFamily::root_only(4),
            ones(4, 2),
            ones(4, 2),
            StepFunction::constant(4, 1.0).unwrap(),
            e,
        )
        .unwrap();
        assert_eq!(theorem_rhs(&inst).unwrap(), 3.0);
        let ev = evaluate_theorem(&inst).unwrap();
        assert_eq!(ev.lhs, 1.0);
        assert!((ev.ratio - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ev.regime, Regime::PAtMostGamma);
    }

    #[test]
    fn w_exponent_vanishes_when_p_at_most_gamma() {
        let e = ExponentTuple::new(vec![3.0, 3.0], 1.0, 2.0).unwrap();
        let w = power_weight(2.0, 5).unwrap();
        let inst =
            TheoremInstance::new(SparseFamily::root_only(5), ones(5, 2), ones(5, 2), w, e).unwrap();
        let c = theorem_constants(&inst).unwrap();
        assert!(c.a_infty_w.value > 1.0);
        let rhs = theorem_rhs(&inst).unwrap();
        assert!((rhs - c.a_vec_p.value.powf(1.0 / 1.5) * 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_inapplicable_exponents() {
        let e = ExponentTuple::new(vec![3.0, 3.0], 2.0, 1.6).unwrap();
        let r = TheoremInstance::new(
            SparseFamily::root_only(3),
            ones(3, 2),
            ones(3, 2),
            StepFunction::constant(3, 1.0).unwrap(),
            e,
        );
        assert!(matches!(r, Err(Error::Inapplicable(_))));
    }

    #[test]
    fn zero_norm_is_an_error() {
        let e = ExponentTuple::new(vec![2.0, 2.0], 1.0, 1.0).unwrap();
        let mut fs = ones(3, 2);
        fs[0] = StepFunction::constant(3, 0.0).unwrap();
        let inst =
            TheoremInstance::with_dual_w(SparseFamily::root_only(3), fs, ones(3, 2), e).unwrap();
        assert!(matches!(theorem_ratio(&inst), Err(Error::ZeroNorm)));
    }

    #[test]
    fn maximal_unit_ratio() {
        let e = ExponentTuple::new(vec![2.0, 2.0], 1.0, 1.0).unwrap();
        let one = StepFunction::constant(4, 1.0).unwrap();
        let ev = evaluate_maximal(&ones(4, 2), &ones(4, 2), &one, &e).unwrap();
        assert_eq!(ev.lhs, 1.0);
        assert_eq!(ev.rhs, 1.0);
        assert_eq!(ev.ratio, 1.0);
    }
}
