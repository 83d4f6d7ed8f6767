//! Network topology, routing and the semantics-network mapping table.

mod app;
mod document;
mod prefix;
mod snmt;
mod time;
mod topology;

pub use app::{catalog_atoms, default_catalog, Application, Protocol, ProtocolPort};
pub use document::{parse_network, print_network, EntityList, Network, NetworkDoc, NetworkStats, Routing};
pub use prefix::Prefix;
pub use snmt::{snmt_match, GatewayPrefix, NotFound, Snmt, SnmtEntry, SnmtMatch};
pub use time::{day_bit, TimeRange, ALL_DAYS, WEEKDAYS, WEEKENDS};
pub use topology::{Interface, Path, Topology};
