//! Small dense solvers: the `(s+1) x (s+1)` extremal systems behind the
//! sup-norm search, and norm-ball constrained least squares.

mod extremal;
mod pgd;

pub use extremal::{solve_extremal_system, ExtremalError, ExtremalFit, ExtremalSolver, Sign};
pub use pgd::{
    constrained_least_squares, minimize_in_ball, project_to_ball, PgdConfig, PgdOutcome,
    QuadraticObjective, StepRule,
};
