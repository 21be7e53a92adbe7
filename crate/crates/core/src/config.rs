//! Scenario files, canonical form and record output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::harness::{EpisodeRecord, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid value at {pointer}: {message}")]
    Invariant { pointer: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Optional `output` block of a config file. It is not part of the scenario
/// and does not enter the config hash.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig<T> {
    pub body: T,
    pub output: OutputSpec,
}

/// Serde path `a.b[2].c` to a JSON pointer `/a/b/2/c`.
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." {
        return "/".into();
    }
    let mut out = String::new();
    for seg in s.split('.') {
        let mut rest = seg;
        while let Some(open) = rest.find('[') {
            let (head, tail) = rest.split_at(open);
            if !head.is_empty() {
                out.push('/');
                out.push_str(head);
            }
            let close = tail.find(']').unwrap_or(tail.len() - 1);
            out.push('/');
            out.push_str(&tail[1..close]);
            rest = &tail[close + 1..];
        }
        if !rest.is_empty() {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

fn try_variant<T: DeserializeOwned>(body: &serde_json::Value, prefix: &str) -> Option<(String, String)> {
    serde_path_to_error::deserialize::<_, T>(body.clone())
        .err()
        .map(|e| (format!("{prefix}{}", pointer_of(e.path()).trim_end_matches('/')), e.inner().to_string()))
}

/// Internally tagged enums hide the inner path from the error; re-parse the
/// tagged object as its concrete variant to recover the full pointer.
fn refine(root: &serde_json::Value, pointer: &str) -> Option<(String, String)> {
    use crate::controllers::{BaselineConfig, FicConfig};
    use crate::harness::{ArmSpec, CircleRef, PointMassSpec, SinusoidRef, StaticRef};
    let sub = root.pointer(pointer)?;
    let mut body = sub.as_object()?.clone();
    let tag = body.remove("type")?;
    let body = serde_json::Value::Object(body);
    let field = pointer.rsplit('/').next()?;
    match (field, tag.as_str()?) {
        ("controller", "fic") => try_variant::<FicConfig>(&body, pointer),
        ("controller", "baseline") => try_variant::<BaselineConfig>(&body, pointer),
        ("plant", "point_mass") => try_variant::<PointMassSpec>(&body, pointer),
        ("plant", "arm") => try_variant::<ArmSpec>(&body, pointer),
        ("reference", "static") => try_variant::<StaticRef>(&body, pointer),
        ("reference", "sinusoid") => try_variant::<SinusoidRef>(&body, pointer),
        ("reference", "circle") => try_variant::<CircleRef>(&body, pointer),
        _ => None,
    }
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let pointer = pointer_of(e.path());
        let (pointer, message) = refine(&value, &pointer).unwrap_or((pointer, e.inner().to_string()));
        ConfigError::Schema { pointer, message }
    })
}

/// Parse JSON text with an optional top-level `output` block.
pub fn parse_str<T: DeserializeOwned>(text: &str) -> Result<ParsedConfig<T>, ConfigError> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Schema {
        pointer: "/".into(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })?;
    let output = match value.as_object_mut().and_then(|m| m.remove("output")) {
        Some(v) => serde_path_to_error::deserialize(v).map_err(|e| ConfigError::Schema {
            pointer: format!("/output{}", pointer_of(e.path()).trim_end_matches('/')),
            message: e.inner().to_string(),
        })?,
        None => OutputSpec::default(),
    };
    Ok(ParsedConfig { body: from_value(value)?, output })
}

pub fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

/// Load and validate a scenario file.
pub fn parse_config(path: &Path) -> Result<ParsedConfig<Scenario>, ConfigError> {
    parse_scenario_str(&read_file(path)?)
}

/// Parse and validate scenario JSON text.
pub fn parse_scenario_str(text: &str) -> Result<ParsedConfig<Scenario>, ConfigError> {
    let parsed: ParsedConfig<Scenario> = parse_str(text)?;
    parsed
        .body
        .validate()
        .map_err(|(pointer, message)| ConfigError::Invariant { pointer, message })?;
    Ok(parsed)
}

/// Several scenarios run side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenarios: Vec<Scenario>,
}

/// Boundary / saturation calibration request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub base: Scenario,
    #[serde(default)]
    pub dof: usize,
    pub x_b: Vec<f64>,
    pub w_max_candidates: Vec<f64>,
}

pub fn parse_sweep(path: &Path) -> Result<ParsedConfig<SweepConfig>, ConfigError> {
    parse_sweep_str(&read_file(path)?)
}

pub fn parse_sweep_str(text: &str) -> Result<ParsedConfig<SweepConfig>, ConfigError> {
    let parsed: ParsedConfig<SweepConfig> = parse_str(text)?;
    for (i, s) in parsed.body.scenarios.iter().enumerate() {
        s.validate().map_err(|(p, message)| ConfigError::Invariant { pointer: format!("/scenarios/{i}{p}"), message })?;
    }
    Ok(parsed)
}

pub fn parse_calibration(path: &Path) -> Result<ParsedConfig<CalibrationConfig>, ConfigError> {
    parse_calibration_str(&read_file(path)?)
}

pub fn parse_calibration_str(text: &str) -> Result<ParsedConfig<CalibrationConfig>, ConfigError> {
    let parsed: ParsedConfig<CalibrationConfig> = parse_str(text)?;
    let c = &parsed.body;
    c.base
        .validate()
        .map_err(|(p, message)| ConfigError::Invariant { pointer: format!("/base{p}"), message })?;
    if c.dof >= c.base.plant.task_dof() {
        return Err(ConfigError::Invariant { pointer: "/dof".into(), message: "DoF index out of range".into() });
    }
    if !matches!(c.base.controller, crate::controllers::ControllerConfig::Fic(_)) {
        return Err(ConfigError::Invariant {
            pointer: "/base/controller".into(),
            message: "calibration needs the fic controller".into(),
        });
    }
    if c.x_b.is_empty() || c.x_b.iter().any(|x| !(*x > 0.0)) {
        return Err(ConfigError::Invariant { pointer: "/x_b".into(), message: "boundaries must be > 0".into() });
    }
    if c.w_max_candidates.is_empty() || c.w_max_candidates.iter().any(|x| !(*x > 0.0)) {
        return Err(ConfigError::Invariant {
            pointer: "/w_max_candidates".into(),
            message: "candidates must be > 0".into(),
        });
    }
    Ok(parsed)
}

/// Canonical JSON: defaults filled in, keys sorted, no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's default map is ordered, so going through `Value` sorts keys.
    let v = serde_json::to_value(value).expect("config types serialise infallibly");
    serde_json::to_string(&v).expect("values serialise infallibly")
}

/// SHA-256 hex digest of the canonical form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(canonical_json(value).as_bytes()))
}

/// Column names of the CSV record for `dof` task DoF.
pub fn csv_header(dof: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["x_d", "x", "x_err", "xdot", "phase_s", "wrench"] {
        h.extend((0..dof).map(|i| format!("{prefix}_{i}")));
    }
    h.extend(["contact_f", "V", "E_in_cum", "E_rel_cum"].map(String::from));
    h
}

/// Tabular number format: 9 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// Write a record as CSV: one header line, then one line per row, LF endings.
pub fn emit_csv<W: Write>(record: &EpisodeRecord, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", csv_header(record.dof).join(","))?;
    for r in &record.rows {
        let mut cells = vec![format_value(r.t)];
        for col in [&r.x_d, &r.x, &r.x_err, &r.xdot] {
            cells.extend(col.iter().map(|v| format_value(*v)));
        }
        cells.extend(r.phase.iter().map(|p| p.to_string()));
        cells.extend(r.wrench.iter().map(|v| format_value(*v)));
        cells.extend([r.contact_f, r.v, r.e_in_cum, r.e_rel_cum].map(format_value));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn emit_json<W: Write>(record: &EpisodeRecord, out: W) -> std::io::Result<()> {
    serde_json::to_writer(out, record).map_err(std::io::Error::other)
}

/// Provenance sidecar written next to each output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub crate_version: String,
    pub seed: u64,
    pub failure: Option<crate::harness::RunFailure>,
    pub ledger: crate::energy::LedgerSummary,
}

impl RunMeta {
    pub fn new(scenario: &Scenario, record: &EpisodeRecord) -> Self {
        RunMeta {
            config_hash: config_hash(scenario),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: scenario.seed,
            failure: record.failure.clone(),
            ledger: record.ledger,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "plant": {"type": "point_mass", "inertia": [1.0]},
        "controller": {"type": "fic", "stiffness": [{"k_const": 0.0, "w_max": 30.0, "x_b": 0.05}]},
        "reference": {"type": "static", "pose": [0.0]},
        "duration": 0.1
    }"#;

    #[test]
    fn defaults_applied() {
        let p: ParsedConfig<Scenario> = parse_str(MINIMAL).unwrap();
        assert_eq!(p.body.dt, 1e-4);
        assert_eq!(p.body.feedback_hz, 1000.0);
        assert_eq!(p.output, OutputSpec::default());
    }

    #[test]
    fn schema_error_has_pointer() {
        let bad = MINIMAL.replace("\"w_max\": 30.0", "\"w_max\": \"big\"");
        match parse_str::<Scenario>(&bad) {
            Err(ConfigError::Schema { pointer, .. }) => assert_eq!(pointer, "/controller/stiffness/0/w_max"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = MINIMAL.replace("\"duration\"", "\"durration\": 1, \"duration\"");
        assert!(matches!(parse_str::<Scenario>(&bad), Err(ConfigError::Schema { .. })));
        let bad = MINIMAL.replace("\"stiffness\"", "\"dampingg\": [1.0], \"stiffness\"");
        match parse_str::<Scenario>(&bad) {
            Err(ConfigError::Schema { pointer, message }) => {
                assert!(pointer.starts_with("/controller"), "{pointer}");
                assert!(message.contains("dampingg"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn output_block_excluded_from_hash() {
        let with_out = MINIMAL.replacen('{', r#"{"output": {"format": "json"},"#, 1);
        let a: ParsedConfig<Scenario> = parse_str(MINIMAL).unwrap();
        let b: ParsedConfig<Scenario> = parse_str(&with_out).unwrap();
        assert_eq!(b.output.format, OutputFormat::Json);
        assert_eq!(config_hash(&a.body), config_hash(&b.body));
    }

    #[test]
    fn canonical_round_trip() {
        let a: ParsedConfig<Scenario> = parse_str(MINIMAL).unwrap();
        let text = canonical_json(&a.body);
        let b: ParsedConfig<Scenario> = parse_str(&text).unwrap();
        assert_eq!(a.body, b.body);
        assert_eq!(canonical_json(&b.body), text);
    }

    #[test]
    fn header_layout() {
        let h = csv_header(2);
        assert_eq!(h.len(), 1 + 6 * 2 + 4);
        assert_eq!(h[0], "t");
        assert_eq!(h.last().unwrap(), "E_rel_cum");
    }
}
