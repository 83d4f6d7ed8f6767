use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-intent progress through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Drafted,
    AwaitingReview,
    Approved,
    Detected,
    Resolving,
    Resolved,
    Planned,
    Applied,
    Verified,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Drafted,
        Stage::AwaitingReview,
        Stage::Approved,
        Stage::Detected,
        Stage::Resolving,
        Stage::Resolved,
        Stage::Planned,
        Stage::Applied,
        Stage::Verified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Drafted => "drafted",
            Stage::AwaitingReview => "awaiting-review",
            Stage::Approved => "approved",
            Stage::Detected => "detected",
            Stage::Resolving => "resolving",
            Stage::Resolved => "resolved",
            Stage::Planned => "planned",
            Stage::Applied => "applied",
            Stage::Verified => "verified",
        }
    }

    /// Whether an intent at `self` may move to `next`. Staying put means a
    /// new round: another IR after feedback, another protect intent, or a
    /// plan under another strategy.
    pub fn admits(self, next: Stage) -> bool {
        use Stage::*;
        matches!(
            (self, next),
            (Drafted, AwaitingReview)
                | (AwaitingReview, AwaitingReview)
                | (AwaitingReview, Approved)
                | (Approved, Detected)
                | (Detected, Resolving)
                | (Detected, Resolved)
                | (Resolving, Resolved)
                | (Resolved, Resolved)
                | (Resolved, Planned)
                | (Planned, Planned)
                | (Planned, Applied)
                | (Applied, Verified)
        )
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("intent {intent} cannot move from {from} to {to}")]
pub struct TransitionError {
    pub intent: usize,
    pub from: Stage,
    pub to: Stage,
}

pub fn check_transition(intent: usize, from: Stage, to: Stage) -> Result<(), TransitionError> {
    if from.admits(to) {
        Ok(())
    } else {
        Err(TransitionError { intent, from, to })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn review_loop_is_the_only_way_out_of_review() {
        let out: Vec<Stage> = Stage::ALL.into_iter().filter(|s| Stage::AwaitingReview.admits(*s)).collect();
        assert_eq!(out, [Stage::AwaitingReview, Stage::Approved]);
        assert!(!Stage::Drafted.admits(Stage::Approved));
        assert!(!Stage::Approved.admits(Stage::Resolved));
    }

    #[test]
    fn never_backwards() {
        for a in Stage::ALL {
            for b in Stage::ALL {
                if a.admits(b) {
                    assert!(b >= a, "{a} -> {b}");
                }
            }
        }
    }
}
