//! Executable checks of the weighted bounds: instances, ratios, extremizer
//! search and declarative experiment suites.

pub mod constants;
pub mod eval;
pub mod experiment;
pub mod params;
pub mod pool;
pub mod report;
pub mod search;
pub mod theorem;

pub use constants::{PilotConfig, PilotConstants, ReferenceConstants};
pub use eval::{evaluate, Evaluation, Objective};
pub use experiment::{run_experiment, Check, ExperimentConfig, Report, ReportRow};
pub use params::{FamilySpec, FunctionSpec, InstanceParams};
pub use search::{search, SearchConfig, SearchResult, SearchSpace};
pub use theorem::{
    bucket_reconstruction, evaluate_maximal, evaluate_theorem, maximal_ratio, theorem_ratio,
    theorem_ratio_sigma_form, theorem_rhs, TheoremInstance,
};
