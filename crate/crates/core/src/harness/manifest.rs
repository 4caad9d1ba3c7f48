//! Run manifests: everything needed to reproduce a command's output.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::graph::Graph;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub graph_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub version: String,
    pub generator_version: u32,
}

impl RunManifest {
    pub fn new(command: &str, graph: &Graph, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            graph_hash: graph_hash(graph),
            seed,
            config,
            version: TOOL_VERSION.to_string(),
            generator_version: super::graphs::GENERATOR_VERSION,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

/// SHA-256 of the canonical edge-list rendering, hex encoded.
pub fn graph_hash(g: &Graph) -> String {
    let digest = Sha256::digest(g.to_edge_list().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
