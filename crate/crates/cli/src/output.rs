//! Output targets, tables and provenance sidecars.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use fic::config::{OutputFormat, OutputSpec};
use serde::Serialize;

/// Where and how a command writes its result.
#[derive(Debug, Clone)]
pub struct Target {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Target {
    /// Command-line flags win over the config's `output` block.
    pub fn resolve(out: Option<PathBuf>, format: Option<OutputFormat>, spec: &OutputSpec) -> Self {
        Target { path: out.or_else(|| spec.path.clone()), format: format.unwrap_or(spec.format) }
    }

    pub fn write(&self, bytes: &[u8]) -> io::Result<()> {
        match &self.path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                fs::write(p, bytes)
            }
            None => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()
            }
        }
    }

    /// Sidecar next to a file output; on stdout the hash goes to stderr.
    pub fn write_meta<T: Serialize>(&self, meta: &T, hash: &str) -> io::Result<()> {
        match &self.path {
            Some(p) => write_sidecar(p, meta),
            None => {
                eprintln!("config_hash {hash}");
                Ok(())
            }
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_sidecar<T: Serialize>(path: &Path, meta: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(sidecar_path(path), text)
}

/// Provenance for outputs that are not a single scenario run.
#[derive(Debug, Serialize)]
pub struct CommandMeta<'a, T: Serialize> {
    pub command: &'a str,
    pub config_hash: String,
    pub crate_version: &'static str,
    pub inputs: &'a T,
}

impl<'a, T: Serialize> CommandMeta<'a, T> {
    pub fn new(command: &'a str, inputs: &'a T) -> Self {
        CommandMeta {
            command,
            config_hash: fic::config::config_hash(inputs),
            crate_version: env!("CARGO_PKG_VERSION"),
            inputs,
        }
    }
}

/// Header line plus one line per row, LF endings.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn json_text<T: Serialize>(value: &T) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}

pub fn opt_cell(v: Option<f64>) -> String {
    v.map(fic::config::format_value).unwrap_or_default()
}
