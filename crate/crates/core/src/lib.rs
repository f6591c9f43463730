//! Conditional sparse linear regression.
//!
//! Learns a k-DNF condition over boolean attributes together with a sparse
//! linear rule that fits the real-valued target wherever the condition holds.
//! Two learners are provided: an exhaustive sup-norm search
//! ([`sup_regression`]) and a per-term constrained least-squares learner for
//! the expected-error setting ([`l2_regression`]).
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, with `*F32` variants for single
//! precision.

// `!(a <= b)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bitset;
pub mod csv_io;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod kdnf;
pub mod l2_regression;
pub mod model;
mod parallel;
pub mod scalar;
pub mod smallsolve;
pub mod sup_regression;
pub mod synthetic;

pub use bitset::BitColumn;
pub use data::TaskParams;
pub use error::{Error, Result};
pub use evaluation::{evaluate, evaluate_labeled, EvalReport, LabelReport};
pub use kdnf::{KDnf, Term};
pub use l2_regression::{derp, derp_mu_search, derp_sample_size, DerpParams};
pub use model::Algorithm;
pub use scalar::Real;
pub use smallsolve::{PgdConfig, Sign, StepRule};
pub use sup_regression::{
    find_and_eliminate, find_and_eliminate_with, sample_size, CandidateBasis, FitOptions,
};
pub use synthetic::{LabeledExample, PlantedSpec};

pub type Example = data::Example<f64>;
pub type Dataset = data::Dataset<f64>;
pub type SparseLinearRule = model::SparseLinearRule<f64>;
pub type ConditionalModel = model::ConditionalModel<f64>;
pub type FitReport = sup_regression::FitReport<f64>;
pub type SupOutcome = sup_regression::SupOutcome<f64>;
pub type DerpCandidate = l2_regression::DerpCandidate<f64>;

pub type ExampleF32 = data::Example<f32>;
pub type DatasetF32 = data::Dataset<f32>;
pub type SparseLinearRuleF32 = model::SparseLinearRule<f32>;
pub type ConditionalModelF32 = model::ConditionalModel<f32>;
pub type FitReportF32 = sup_regression::FitReport<f32>;
pub type SupOutcomeF32 = sup_regression::SupOutcome<f32>;
pub type DerpCandidateF32 = l2_regression::DerpCandidate<f32>;
