//! Scenario fixtures and the templated scenario generator.

mod fixtures;
mod generate;
mod templates;

use serde::{Deserialize, Serialize};

use crate::error::NetworkError;
use crate::flowset::{AclSet, Action, Rule};
use crate::net::{Network, NetworkDoc, ProtocolPort};

pub use fixtures::{composite, fig2, fig3, protect_example, Fig2Case};
pub use generate::{conflict_ratio, generate_scenario, GenerateError, ScenarioParams, Template};
pub use templates::{campus_network, cloud_network};

/// A protect intent attached to an intent, with the rules it should
/// comprehend to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectSpec {
    pub text: String,
    pub rules: Vec<Rule>,
}

/// A natural-language intent with its ground-truth rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentSpec {
    pub id: usize,
    pub text: String,
    pub action: Action,
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub protects: Vec<ProtectSpec>,
}

/// Network, existing ACLs and intents to deploy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkDoc,
    /// Application atoms of the flow universe.
    pub apps: Vec<ProtocolPort>,
    pub acls: AclSet,
    pub intents: Vec<IntentSpec>,
}

impl Scenario {
    pub fn network(&self) -> Result<Network, NetworkError> {
        Network::from_doc(&self.network)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
