//! Truly-matched flows, conflict detection and protect-based resolution.

mod decompose;
mod detect;
mod paths;
mod resolve;
mod tmf;

pub use decompose::decompose;
pub use detect::{conflict_union, detect_all, detect_blind, detect_with, tmf_tables, ConflictRecord, Intent};
pub use paths::{validate_interface_path, RouteIndex};
pub use resolve::{resolve, ResolveWarning, ResolvedIntent};
pub use tmf::{compute_tmf, overlap_intent, OverlapScan, TmfTable};
