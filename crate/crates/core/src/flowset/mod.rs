//! Flow universe, bit-vector flow sets and time atomization.

mod bits;
mod rule;
mod timed;
mod universe;

pub use bits::{setop, FlowSet, SetOp, SetOpResult};
pub use rule::{Acl, AclSet, Action, Rule};
pub use timed::{earliest_date, latest_date, FlowContext, TimeAtoms, TimedFlowSet};
pub use universe::{build_universe, concrete_apps, FlowCoord, FlowKey, GlobalFlowTable};
