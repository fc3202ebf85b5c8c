//! One evaluation of an instance under either objective.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::verify::params::InstanceParams;
use crate::verify::theorem::{evaluate_maximal, evaluate_theorem};
use crate::weights::{a_infty, Regime};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// The sparse-operator bound.
    #[default]
    Theorem,
    /// The multilinear maximal-operator bound.
    Maximal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Only for the theorem objective.
    pub regime: Option<Regime>,
    pub a_vec_p: f64,
    pub a_infty_w: f64,
    pub a_infty_sigmas: Vec<f64>,
}

pub fn evaluate(
    params: &InstanceParams,
    resolution: u32,
    objective: Objective,
) -> Result<Evaluation> {
    let inst = params.build(resolution)?;
    match objective {
        Objective::Theorem => {
            let ev = evaluate_theorem(&inst)?;
            Ok(Evaluation {
                lhs: ev.lhs,
                rhs: ev.rhs,
                ratio: ev.ratio,
                regime: Some(ev.regime),
                a_vec_p: ev.constants.a_vec_p.value,
                a_infty_w: ev.constants.a_infty_w.value,
                a_infty_sigmas: ev
                    .constants
                    .a_infty_sigmas
                    .iter()
                    .map(|c| c.value)
                    .collect(),
            })
        }
        Objective::Maximal => {
            let ev = evaluate_maximal(&inst.functions, &inst.sigmas, &inst.w, &inst.exponents)?;
            Ok(Evaluation {
                lhs: ev.lhs,
                rhs: ev.rhs,
                ratio: ev.ratio,
                regime: None,
                a_vec_p: ev.a_vec_p.value,
                a_infty_w: a_infty(&inst.w)?.value,
                a_infty_sigmas: ev.a_infty_sigmas.iter().map(|c| c.value).collect(),
            })
        }
    }
}
