//! Numerical laboratory for multilinear dyadic sparse operators and their
//! weighted `A_p`–`A_∞` bounds on `[0, 1)`.
//!
//! The numerical modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the experiment layer and CLI use.

pub mod cli;
pub mod dyadic;
pub mod error;
pub mod operators;
pub mod scalar;
pub mod selftest;
pub mod sparse;
pub mod stopping;
pub mod verify;
pub mod weights;

pub use dyadic::{Cube, Pyramid, StepFunction};
pub use error::{Error, Result};
pub use operators::SparseOperatorSpec;
pub use scalar::Scalar;
pub use sparse::{Branching, SparseFamily};
pub use weights::{Characteristic, ExponentTuple, Regime};

pub type StepFn = StepFunction<f64>;
pub type Weight = StepFunction<f64>;
pub type Forest = stopping::PrincipalForest<f64>;
pub type Constant = Characteristic<f64>;
