//! Weights and their characteristic constants.
//!
//! Every supremum runs over the dyadic cubes of levels `0..=L` of the weight's
//! own grid. The maximal operator inside the Fujii–Wilson `A_∞` constant is the
//! dyadic one on that same grid, which is never larger than the
//! Hardy–Littlewood one, so the constants here are grid-relative lower bounds
//! of their continuous counterparts. Each supremum reports the cube where it is
//! attained; attainment at level `L` hints at truncation by the resolution.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyadic::{all_cubes, same_resolution, Cube, Pyramid, StepFunction};
use crate::error::{Error, Result};
use crate::scalar::{conjugate, inv_pow2, Scalar};

/// Exponents `(p_1, ..., p_m; p0; γ)` with derived `1/p = ∑ 1/p_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentsRepr", into = "ExponentsRepr")]
pub struct ExponentTuple {
    p_i: Vec<f64>,
    p0: f64,
    gamma: f64,
    p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentsRepr {
    p: Vec<f64>,
    #[serde(default = "one")]
    p0: f64,
    #[serde(default = "one")]
    gamma: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<ExponentsRepr> for ExponentTuple {
    type Error = Error;
    fn try_from(r: ExponentsRepr) -> Result<Self> {
        ExponentTuple::new(r.p, r.p0, r.gamma)
    }
}

impl From<ExponentTuple> for ExponentsRepr {
    fn from(e: ExponentTuple) -> Self {
        ExponentsRepr {
            p: e.p_i,
            p0: e.p0,
            gamma: e.gamma,
        }
    }
}

/// Which exponent case a tuple falls into, decided on the
/// `p0 = 1` reduction `(p_i / p0, γ / p0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    /// `p <= γ`.
    PAtMostGamma,
    /// `p > γ` and `p_j / p0` is the largest of `p_1/p0, ..., p_m/p0, q'`
    /// (zero-based `j`; ties go to the lowest index).
    PiMax(usize),
    /// `p > γ` and `q' = (p/γ)'` is strictly the largest.
    QConjugateMax,
}

impl Regime {
    pub fn label(self) -> String {
        match self {
            Regime::PAtMostGamma => "p_le_gamma".to_string(),
            Regime::PiMax(j) => format!("p{}_max", j + 1),
            Regime::QConjugateMax => "qprime_max".to_string(),
        }
    }

    pub fn from_label(s: &str) -> Option<Regime> {
        match s {
            "p_le_gamma" => Some(Regime::PAtMostGamma),
            "qprime_max" => Some(Regime::QConjugateMax),
            _ => {
                let j: usize = s.strip_prefix('p')?.strip_suffix("_max")?.parse().ok()?;
                (j >= 1).then(|| Regime::PiMax(j - 1))
            }
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl ExponentTuple {
    pub fn new(p_i: Vec<f64>, p0: f64, gamma: f64) -> Result<Self> {
        if p_i.is_empty() {
            return Err(Error::InvalidExponent(
                "at least one p_i is required".into(),
            ));
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
        for (i, &pi) in p_i.iter().enumerate() {
            if !(pi.is_finite() && pi > p0) {
                return Err(Error::InvalidExponent(format!(
                    "p_{} = {pi} must be finite and > p0 = {p0}",
                    i + 1
                )));
            }
        }
        let p = 1.0 / p_i.iter().map(|pi| 1.0 / pi).sum::<f64>();
        Ok(ExponentTuple { p_i, p0, gamma, p })
    }

    pub fn m(&self) -> usize {
        self.p_i.len()
    }

    pub fn p_i(&self) -> &[f64] {
        &self.p_i
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `p` with `1/p = ∑ 1/p_i`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `q = p / γ`.
    pub fn q(&self) -> f64 {
        self.p / self.gamma
    }

    pub fn p_conjugates(&self) -> Vec<f64> {
        self.p_i.iter().map(|&pi| conjugate(pi)).collect()
    }

    /// `q'`; infinite when `q <= 1`.
    pub fn q_conjugate(&self) -> f64 {
        let q = self.q();
        if q <= 1.0 {
            f64::INFINITY
        } else {
            conjugate(q)
        }
    }

    /// `γ >= p0`, or `γ < p0` together with `p > γ`.
    pub fn is_applicable(&self) -> bool {
        self.gamma >= self.p0 || self.p > self.gamma
    }

    pub fn require_applicable(&self) -> Result<()> {
        if self.is_applicable() {
            Ok(())
        } else {
            Err(Error::Inapplicable(format!(
                "gamma = {} < p0 = {} requires p = {} > gamma",
                self.gamma, self.p0, self.p
            )))
        }
    }

    /// The `p0 = 1` problem `(p_i / p0; 1; γ / p0)`.
    pub fn reduced(&self) -> ExponentTuple {
        let p_i: Vec<f64> = self.p_i.iter().map(|pi| pi / self.p0).collect();
        ExponentTuple::new(p_i, 1.0, self.gamma / self.p0)
            .expect("reduction preserves validity when p_i > p0")
    }

    /// Exponents on `⟨σ_i⟩_Q` in the `A_{P/p0}` characteristic:
    /// `(p/p0) (p_i - p0) / p_i`, i.e. `r / r_i'` with `r_i = p_i / p0`.
    pub fn vec_p_exponents(&self) -> Vec<f64> {
        self.p_i
            .iter()
            .map(|&pi| (self.p / self.p0) * (pi - self.p0) / pi)
            .collect()
    }

    /// Dual-weight exponents `1 - p_i / p0`.
    pub fn dual_exponents(&self) -> Vec<f64> {
        self.p_i.iter().map(|&pi| 1.0 - pi / self.p0).collect()
    }

    pub fn regime(&self) -> Regime {
        if self.p <= self.gamma {
            return Regime::PAtMostGamma;
        }
        let qc = self.q_conjugate();
        let (j, best) = self.p_i.iter().map(|pi| pi / self.p0).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (j, r)| if r > acc.1 { (j, r) } else { acc },
        );
        if qc > best {
            Regime::QConjugateMax
        } else {
            Regime::PiMax(j)
        }
    }
}

/// A supremum over dyadic cubes together with the cube attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristic<T> {
    pub value: T,
    /// `None` when every cube contributed zero.
    pub cube: Option<Cube>,
}

impl<T: Scalar> Characteristic<T> {
    fn from_values(values: impl Iterator<Item = (Cube, T)>) -> Self {
        let mut best = Characteristic {
            value: T::zero(),
            cube: None,
        };
        for (q, v) in values {
            if v > best.value {
                best = Characteristic {
                    value: v,
                    cube: Some(q),
                };
            }
        }
        best
    }

    /// Level of the attaining cube.
    pub fn level(&self) -> Option<u32> {
        self.cube.map(Cube::level)
    }
}

/// Step function whose cell values are the exact cell averages of `x^α`.
///
/// Dyadic averages of the result equal those of `x^α` for every cube.
pub fn power_weight<T: Scalar>(alpha: T, resolution: u32) -> Result<StepFunction<T>> {
    if !(alpha > -T::one()) || !alpha.is_finite() {
        return Err(Error::InvalidExponent(format!(
            "power weight needs alpha > -1, got {alpha}"
        )));
    }
    if alpha == T::zero() {
        return StepFunction::constant(resolution, T::one());
    }
    let h: T = inv_pow2(resolution);
    let s = alpha + T::one();
    StepFunction::from_fn(resolution, |c| {
        let a = T::lit(c as f64) * h;
        if c == 0 {
            // ∫_0^h x^α / h = h^α / (α + 1)
            h.powf(alpha) / s
        } else {
            // (b^s - a^s) / (s h) = a^s expm1(s ln(1 + h/a)) / (s h)
            a.powf(s) * (s * (h / a).ln_1p()).exp_m1() / (s * h)
        }
    })
}

/// `[w]_{A_p} = sup_Q ⟨w⟩_Q ⟨w^{1-p'}⟩_Q^{p-1}`.
pub fn a_p_constant<T: Scalar>(w: &StepFunction<T>, p: T) -> Result<Characteristic<T>> {
    if !(p > T::one()) {
        return Err(Error::InvalidExponent(format!("A_p needs p > 1, got {p}")));
    }
    w.require_positive()?;
    let dual = w.powf(T::one() - p / (p - T::one()))?;
    two_weight_a_p(w, &dual, p)
}

/// `[w, σ]_{A_p} = sup_Q ⟨w⟩_Q ⟨σ⟩_Q^{p-1}`.
pub fn two_weight_a_p<T: Scalar>(
    w: &StepFunction<T>,
    sigma: &StepFunction<T>,
    p: T,
) -> Result<Characteristic<T>> {
    same_resolution(w, sigma)?;
    let wp = w.pyramid();
    let sp = sigma.pyramid();
    let e = p - T::one();
    Ok(Characteristic::from_values(
        all_cubes(w.resolution()).map(|q| (q, wp.average(q) * sp.average(q).powf(e))),
    ))
}

/// `∑_{c ⊆ Q} max_{c ⊆ R ⊆ Q} ⟨w⟩_R · 2^-L`, i.e. `∫_Q M(1_Q w)` for the
/// dyadic maximal operator, by one descent of the subtree below `q`.
fn local_maximal_integral<T: Scalar>(avgs: &Pyramid<T>, q: Cube, running: T, h: T) -> T {
    let running = running.max(avgs.average(q));
    if q.level() == avgs.resolution() {
        return running * h;
    }
    let [l, r] = q.children();
    local_maximal_integral(avgs, l, running, h) + local_maximal_integral(avgs, r, running, h)
}

/// `∫_Q M(1_Q w) dx` with the dyadic maximal operator of the grid.
pub fn maximal_integral<T: Scalar>(w: &StepFunction<T>, q: Cube) -> Result<T> {
    crate::dyadic::check_level(q, w.resolution())?;
    let pyr = w.pyramid();
    Ok(local_maximal_integral(&pyr, q, T::zero(), w.cell_measure()))
}

/// Fujii–Wilson `[w]_{A_∞} = sup_Q w(Q)^-1 ∫_Q M(1_Q w)` over cubes with
/// `w(Q) > 0`, `M` dyadic. Always at least 1.
pub fn a_infty<T: Scalar>(w: &StepFunction<T>) -> Result<Characteristic<T>> {
    if w.is_zero() {
        return Err(Error::ZeroWeight);
    }
    let pyr = w.pyramid();
    let h = w.cell_measure();
    Ok(Characteristic::from_values(
        all_cubes(w.resolution())
            .filter(|&q| pyr.integral(q) > T::zero())
            .map(|q| {
                (
                    q,
                    local_maximal_integral(&pyr, q, T::zero(), h) / pyr.integral(q),
                )
            }),
    ))
}

/// `Ψ(Q) = ⟨w⟩_Q ∏ ⟨σ_i⟩_Q^{e_i}` with the `A_{P/p0}` exponents of a tuple.
#[derive(Debug, Clone)]
pub struct CompositeCharacteristic<T> {
    resolution: u32,
    w: Pyramid<T>,
    sigmas: Vec<Pyramid<T>>,
    exponents: Vec<T>,
}

impl<T: Scalar> CompositeCharacteristic<T> {
    pub fn new(w: &StepFunction<T>, sigmas: &[StepFunction<T>], e: &ExponentTuple) -> Result<Self> {
        if sigmas.len() != e.m() {
            return Err(Error::Arity {
                expected: e.m(),
                found: sigmas.len(),
            });
        }
        for s in sigmas {
            same_resolution(w, s)?;
        }
        Ok(CompositeCharacteristic {
            resolution: w.resolution(),
            w: w.pyramid(),
            sigmas: sigmas.iter().map(StepFunction::pyramid).collect(),
            exponents: e.vec_p_exponents().into_iter().map(T::lit).collect(),
        })
    }

    /// `Ψ(Q)`; zero as soon as one of the averages vanishes.
    pub fn psi(&self, q: Cube) -> T {
        let mut v = self.w.average(q);
        for (s, &e) in self.sigmas.iter().zip(&self.exponents) {
            let a = s.average(q);
            if a == T::zero() {
                return T::zero();
            }
            v = v * a.powf(e);
        }
        v
    }

    pub fn sup(&self) -> Characteristic<T> {
        Characteristic::from_values(all_cubes(self.resolution).map(|q| (q, self.psi(q))))
    }
}

/// `[w, σ⃗]_{A_{P/p0}} = sup_Q ⟨w⟩_Q ∏ ⟨σ_i⟩_Q^{(p/p0)(p_i - p0)/p_i}`.
pub fn a_vec_p<T: Scalar>(
    w: &StepFunction<T>,
    sigmas: &[StepFunction<T>],
    e: &ExponentTuple,
) -> Result<Characteristic<T>> {
    Ok(CompositeCharacteristic::new(w, sigmas, e)?.sup())
}

/// `w_i = σ_i^{1 - p_i/p0}` and `w = ∏ w_i^{p/p_i}`, cellwise.
pub fn dual_weights<T: Scalar>(
    sigmas: &[StepFunction<T>],
    e: &ExponentTuple,
) -> Result<(Vec<StepFunction<T>>, StepFunction<T>)> {
    if sigmas.len() != e.m() {
        return Err(Error::Arity {
            expected: e.m(),
            found: sigmas.len(),
        });
    }
    let first = &sigmas[0];
    for s in sigmas {
        same_resolution(first, s)?;
        s.require_positive()?;
    }
    let duals = sigmas
        .iter()
        .zip(e.dual_exponents())
        .map(|(s, d)| s.powf(T::lit(d)))
        .collect::<Result<Vec<_>>>()?;
    let p = e.p();
    let w = StepFunction::from_fn(first.resolution(), |c| {
        duals.iter().zip(e.p_i()).fold(T::one(), |acc, (wi, &pi)| {
            acc * wi.cells()[c].powf(T::lit(p / pi))
        })
    })?;
    Ok((duals, w))
}
