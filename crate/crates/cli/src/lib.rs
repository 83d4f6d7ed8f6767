//! Command line and HTTP front ends of the ACL pipeline.

pub mod service;
