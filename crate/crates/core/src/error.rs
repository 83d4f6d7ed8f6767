use thiserror::Error;

/// Malformed textual values (prefixes, interfaces, applications, time ranges).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed prefix {0}")]
    Prefix(String),
    #[error("malformed interface {0:?}, expected ROUTER@INDEX")]
    Interface(String),
    #[error("malformed application {0}")]
    Application(String),
    #[error("malformed time range {0}")]
    Time(String),
    #[error("malformed rule {0}")]
    Rule(String),
}

/// Structural problems in a network document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("no routers")]
    NoRouters,
    #[error("duplicate router {0}")]
    DuplicateRouter(String),
    #[error("duplicate interface {0}")]
    DuplicateInterface(String),
    #[error("interface {0} references unknown router")]
    UnknownRouter(String),
    #[error("link endpoint {0} is not a declared interface")]
    DanglingLink(String),
    #[error("interface {0} appears in more than one link")]
    InterfaceReused(String),
    #[error("link joins two interfaces of router {0}")]
    SelfLink(String),
    #[error("duplicate entity {0}")]
    DuplicateEntity(String),
    #[error("entity {entity} names undeclared gateway {gateway}")]
    UnknownGateway { entity: String, gateway: String },
    #[error("entity {entity} prefix {prefix} is not covered by finest prefixes")]
    UncoveredPrefix { entity: String, prefix: String },
    #[error("routing fan-out k must be at least 1")]
    BadFanOut,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("json: {0}")]
    Json(String),
}

/// Flow-universe construction and set-algebra failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("flow set lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("finest prefixes {0} and {1} overlap")]
    OverlappingAtoms(String, String),
    #[error("no finest prefixes")]
    NoAtoms,
    #[error("application catalog is empty")]
    EmptyCatalog,
    #[error("application atom {0} listed twice")]
    DuplicateApp(String),
    #[error("application atom {0} is not concrete")]
    AbstractApp(String),
    #[error("prefix {0} is not a union of finest prefixes")]
    NotDecomposable(String),
    #[error("time range {0} splits a time atom of this context")]
    TimeNotInContext(String),
    #[error("timed flow sets come from different time contexts")]
    AtomMismatch,
    #[error("malformed bit string {0:?}")]
    BitString(String),
}
