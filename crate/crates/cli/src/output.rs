use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;
use serde_json::json;
use starwalk::Error;
use thiserror::Error as ThisError;

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_SPEC: u8 = 3;

#[derive(Debug, ThisError)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        CliError { code: EXIT_USAGE, kind: "usage".into(), message }
    }

    pub fn spec(message: String) -> Self {
        CliError { code: EXIT_SPEC, kind: "invalid_spec".into(), message }
    }

    pub fn runtime(kind: &str, message: String) -> Self {
        CliError { code: EXIT_RUNTIME, kind: kind.into(), message }
    }

    /// Prints the structured error on stderr and returns its exit code.
    pub fn report(&self) -> ExitCode {
        let body = json!({ "error": { "kind": self.kind, "message": self.message, "exit_code": self.code } });
        let _ = writeln!(io::stderr().lock(), "{body}");
        ExitCode::from(self.code)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::InvalidSpec(_) | Error::Json(_) => CliError::spec(e.to_string()),
            Error::Io(_) => CliError::runtime("io", e.to_string()),
            _ => CliError::runtime(error_kind(&e), e.to_string()),
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::SingularMap(_) => "singular_map",
        Error::OutsideBody => "outside_body",
        Error::KernelRejection { .. } => "kernel_rejection",
        Error::Degenerate(_) => "degenerate",
        Error::InsufficientSamples(_) => "insufficient_samples",
        Error::IterationCap(_) => "iteration_cap",
        Error::TooLarge(_) => "too_large",
        Error::PhaseRatio { .. } => "phase_ratio",
        Error::ChainStuck(_) => "chain_stuck",
        _ => "runtime",
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads an input file; missing or unreadable inputs count as bad specs.
pub fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::spec(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::spec(format!("{}: {e}", path.display())))
}

fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => {
            fs::write(p, bytes).map_err(|e| CliError::runtime("io", format!("cannot write {}: {e}", p.display())))
        }
        None => io::stdout().lock().write_all(bytes).map_err(|e| CliError::runtime("io", e.to_string())),
    }
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime("json", e.to_string()))?;
    text.push('\n');
    write_bytes(out, text.as_bytes())
}

/// One point per row, 17 significant digits.
pub fn write_csv(out: Option<&Path>, header: &[String], rows: &[Vec<f64>]) -> CliResult<()> {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    write_bytes(out, text.as_bytes())
}

pub fn sidecar_path(meta: Option<&Path>, out: Option<&Path>) -> Option<PathBuf> {
    meta.map(Path::to_path_buf).or_else(|| {
        out.map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".meta.json");
            PathBuf::from(s)
        })
    })
}
