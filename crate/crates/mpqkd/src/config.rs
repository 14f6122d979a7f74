//! Run configuration: one TOML or JSON document with a section per
//! component, plus dotted command-line overrides.

use std::path::Path;

use mpqkd_core::optimizer::PsoConfig;
use mpqkd_core::{ChannelConfig, OracleConfig, ParameterVector, ProtocolConfig, Strategy};
use serde::de::IgnoredAny;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Total distances of a sweep, as a list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distances {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Distances {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let pts = match self {
            Distances::List(v) => v.clone(),
            Distances::Range { start, stop, step } => {
                if !(*step > 0.0) {
                    return Err(CliError::config("sweep step must be > 0"));
                }
                let n = ((stop - start) / step + 1e-9).floor();
                if !(n >= 0.0) {
                    return Err(CliError::config("sweep stop must be >= start"));
                }
                (0..=n as usize).map(|i| start + step * i as f64).collect()
            }
        };
        if pts.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(CliError::config("sweep distances must be finite and >= 0"));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub total_km: Distances,
    /// Arm length difference `L_B - L_A`.
    pub delta_l_km: f64,
    pub strategy: Strategy,
    /// Optimize every point; otherwise evaluate `params` as given.
    pub optimize: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            total_km: Distances::Range {
                start: 0.0,
                stop: 400.0,
                step: 50.0,
            },
            delta_l_km: 0.0,
            strategy: Strategy::Symmetric,
            optimize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelConfig,
    pub protocol: ProtocolConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParameterVector>,
    pub pso: PsoConfig,
    pub oracle: OracleConfig,
    pub sweep: SweepSpec,
    /// Results section of a previous run's JSON output; ignored on input.
    #[serde(skip_serializing)]
    pub report: Option<IgnoredAny>,
}

impl RunConfig {
    pub fn params(&self) -> Result<ParameterVector, CliError> {
        self.params
            .ok_or_else(|| CliError::config("no [params] section: a parameter vector is required"))
    }

    /// Reads a file (`.json` as JSON, anything else as TOML) and applies
    /// `key.path=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = match path {
            None => Value::Object(Default::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
                parse_document(&text, p)?
            }
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }
}

fn parse_document(text: &str, path: &Path) -> Result<Value, CliError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        let v: toml::Value = toml::from_str(text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(v).map_err(|e| CliError::config(e.to_string()))
    }
}

/// Sets `a.b.c=value`. The value is read as JSON when it parses (numbers,
/// booleans, arrays) and as a string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!(
            "override key `{key}` is malformed"
        )));
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::config(format!("override `{key}`: `{part}` is not a section"))
        })?;
        node = obj
            .entry(*part)
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::config(format!("override `{key}` does not name a field")))?;
    obj.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}
