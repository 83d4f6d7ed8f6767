//! Deployment candidates, equivalent intents, covering programs, baselines
//! and plan application.

mod apply;
mod plan;
mod problem;
pub mod solver;

pub use apply::{apply_plan, unmet_constraints};
pub use plan::{catch_all, deny_objective, endpoint, optimize_deny, optimize_permit, permit_objective, plan, DeploymentPlan, Selection, Strategy};
pub use problem::{build_problem, DeploymentProblem};
pub use solver::{Limits, SolverError};
