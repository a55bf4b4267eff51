use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use rdx_core::wire::{self, fmt_g};
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("UsageError: {0}")]
    Usage(String),
    #[error("{kind}: {message}")]
    Domain { kind: String, message: String },
    #[error("IoError: {0}")]
    Io(String),
}

impl CliError {
    /// Wrap a module error whose message has the form `Kind: detail`.
    pub fn domain(e: impl Display) -> Self {
        let text = e.to_string();
        match text.split_once(": ") {
            Some((kind, msg)) if !kind.is_empty() && kind.chars().all(|c| c.is_ascii_alphanumeric()) => {
                CliError::Domain { kind: kind.to_string(), message: msg.to_string() }
            }
            _ => CliError::Domain { kind: "DomainError".into(), message: text },
        }
    }

    pub fn config(msg: impl Display) -> Self {
        CliError::Domain { kind: "ConfigError".into(), message: msg.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Domain { kind, .. } => kind,
            CliError::Io(_) => "IoError",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
            CliError::Domain { message, .. } => message.clone(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Warning,
    Error,
}

/// Outcome of one command: status, JSON payload and written files.
#[derive(Debug, Clone)]
pub struct CommandResult {
    pub command: String,
    pub status: Status,
    pub payload: Value,
    pub artifacts: Vec<PathBuf>,
    /// Replaces the text summary when set (CSV to stdout).
    pub raw: Option<String>,
}

impl CommandResult {
    pub fn new(command: &str, payload: Value) -> Self {
        CommandResult { command: command.into(), status: Status::Ok, payload, artifacts: Vec::new(), raw: None }
    }

    pub fn warn_if(mut self, cond: bool) -> Self {
        if cond && self.status == Status::Ok {
            self.status = Status::Warning;
        }
        self
    }

    pub fn error(command: &str, err: &CliError) -> Self {
        CommandResult {
            command: command.into(),
            status: Status::Error,
            payload: json!({ "error": { "kind": err.kind(), "message": err.message() } }),
            artifacts: Vec::new(),
            raw: None,
        }
    }

    pub fn envelope(&self) -> Value {
        json!({
            "schema": wire::SCHEMA,
            "command": self.command,
            "status": self.status,
            "payload": self.payload,
            "artifacts": self.artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> String {
        wire::to_string_pretty(&self.envelope())
    }

    /// `key = value` lines with nested keys joined by dots.
    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("status = {}", status_name(self.status))];
        flatten("", &self.payload, &mut lines);
        for a in &self.artifacts {
            lines.push(format!("artifact = {}", a.display()));
        }
        lines.join("\n")
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Warning => "warning",
        Status::Error => "error",
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            out.push(format!("{prefix} = [{}]", parts.join(", ")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), item, out);
            }
        }
        other => out.push(format!("{prefix} = {}", scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(fmt_g).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        Value::Null => "null".into(),
        other => other.to_string(),
    }
}

/// Serialize to a JSON value, keeping the wire float convention.
pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::from_str(&wire::to_string_compact(v)).expect("wire json parses")
}

pub fn object(pairs: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

/// Write rows of reals as CSV with `%.12g` cells.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_g(*v))).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, wire::to_string_pretty(value) + "\n")?;
    Ok(())
}
