pub mod analyze;
pub mod corpus;
pub mod probes;
pub mod report;

use std::path::Path;

use anyhow::Context;
use probelens::tensor_store::{read_archive, EmbeddingArchive};
use serde::de::DeserializeOwned;

use crate::config::RunConfig;
use crate::output::{CmdResult, ExitCode, EXIT_ARCHIVE, EXIT_CONFIG};

/// Parses a flag value with the same spelling the config file uses.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

pub fn validated(cfg: &RunConfig) -> CmdResult {
    cfg.validate().exit(EXIT_CONFIG)
}

pub fn load_archive(path: &Path) -> CmdResult<EmbeddingArchive> {
    read_archive(path)
        .with_context(|| format!("reading archive {}", path.display()))
        .exit(EXIT_ARCHIVE)
}

fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

fn set_opt<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}
