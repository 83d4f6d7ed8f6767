pub mod error;
pub mod net;
pub mod flowset;
pub mod conflict;
pub mod oracle;
pub mod deploy;
pub mod engine;
pub mod comprehension;
pub mod scenario;
pub mod pipeline;
