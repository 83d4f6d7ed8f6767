//! Naive first-match semantics used as the referee for the engines.

mod conflicts;
mod sim;
mod verify;

pub use conflicts::{brute_force_conflicts, OracleError, ORACLE_LIMIT};
pub use sim::{enumerate_flows, first_match, flow_paths, rule_matches, sample_dates, simulate_flow, simulate_path, Verdict};
pub use verify::{verify_intents, IntentReport, Status, VerifyReport, Violation};
