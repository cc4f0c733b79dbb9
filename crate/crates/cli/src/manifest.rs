use std::collections::BTreeMap;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance emitted with every output. Identical invocations on identical
/// inputs differ only in `timestamp`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    /// input path -> SHA-256 of its contents
    pub input_digests: BTreeMap<String, String>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(args: &[String]) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: args.join(" "),
            master_seed: None,
            input_digests: BTreeMap::new(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }

    pub fn record_input(&mut self, path: &str, contents: &[u8]) {
        self.input_digests
            .insert(path.to_string(), hex::encode(Sha256::digest(contents)));
    }
}

#[derive(Serialize)]
pub struct Wrapped<'a, T: Serialize> {
    pub manifest: &'a RunManifest,
    pub result: T,
}
