//! Command line front end and local selection service for `maskfuse-core`.

pub mod args;
pub mod commands;
pub mod service;

use std::fmt;
use std::path::PathBuf;

use maskfuse_core::{Error, ErrorClass};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RESELECTION: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// A failed command: the core error plus the session it concerns, if any.
#[derive(Debug)]
pub struct CliError {
    pub error: Error,
    pub session: Option<PathBuf>,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.error.class() {
            ErrorClass::Validation => EXIT_VALIDATION,
            ErrorClass::ReselectionRequired => EXIT_RESELECTION,
            ErrorClass::Io => EXIT_IO,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "error": self.error.kind(),
            "message": self.error.to_string(),
        });
        if let Some(frame) = self.error.frame() {
            v["frame"] = json!(frame);
        }
        if let Some(dir) = &self.session {
            v["session"] = json!(dir);
        }
        v
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.error)?;
        if let (Error::ReselectionRequired { frame }, Some(dir)) = (&self.error, &self.session) {
            write!(
                f,
                "\nresume with: maskfuse resume {} --frame {frame} --choice <index>",
                dir.display()
            )?;
        }
        Ok(())
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        CliError { error, session: None }
    }
}

/// What a successful command prints: a human line and a JSON body for `--json`.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub json: Value,
}

impl Output {
    pub fn new(text: impl Into<String>, json: Value) -> Self {
        Self { text: text.into(), json }
    }
}
