//! Pipeline commands behind the `domrl` binary: simulate experiments into
//! trace files, analyze traces into reports, rank algorithms, and render a
//! markdown summary.

pub mod commands;
pub mod fsio;
pub mod tables;

use std::fmt;
use std::path::{Path, PathBuf};

use domrl_core::ToolkitConfig;

/// A problem with the user's input rather than with the program; exits with 2.
#[derive(Debug)]
pub struct UserError(pub String);

impl fmt::Display for UserError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

pub fn user_error(msg: impl Into<String>) -> anyhow::Error {
    UserError(msg.into()).into()
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USER: i32 = 2;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UserError>()) {
        EXIT_USER
    } else {
        EXIT_INTERNAL
    }
}

/// Loads the config at `path`, or the built-in defaults when there is none.
pub fn load_config(path: Option<&Path>) -> anyhow::Result<ToolkitConfig> {
    match path {
        None => Ok(ToolkitConfig::default()),
        Some(p) => ToolkitConfig::load(p).map_err(|e| user_error(e.to_string())),
    }
}

pub fn default_experiment_dir(cfg: &ToolkitConfig, experiment: &str) -> PathBuf {
    cfg.output_dir.join(experiment)
}
