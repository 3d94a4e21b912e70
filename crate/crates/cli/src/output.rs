//! Exit-code classification and file output.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GENERATION: u8 = 3;
pub const EXIT_ARCHIVE: u8 = 4;
pub const EXIT_ANALYSIS: u8 = 5;

/// An error tagged with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exit {}: {:#}", self.code, self.error)
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

pub trait ExitCode<T> {
    fn exit(self, code: u8) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> ExitCode<T> for std::result::Result<T, E> {
    fn exit(self, code: u8) -> CmdResult<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

pub fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    write(dir, name, serde_json::to_string_pretty(value)? + "\n")
}
