//! Per-intent pipeline state, run-directory persistence, batch runs and
//! reports.

mod report;
mod run;
mod session;
mod stage;
mod store;

pub use report::{conflict_report, ConflictEntry, IntentSummary, RunReport, StrategySummary};
pub use run::{run_pipeline, RunConfig, COMPARISON_FILE, CONFLICTS_FILE, REPORT_FILE};
pub use session::{AppliedRef, Detection, FailPoint, IntentState, PipelineError, PlanRef, ProtectState, Resolution, Session, SessionState};
pub use stage::{check_transition, Stage, TransitionError};
pub use store::{RunDir, StoreError};
