//! Parsing of `--phi` values and run-config files.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use winterbottom::anisotropy::{Anisotropy, AnisotropySpec};

use crate::CliError;

/// Accepted forms: `pnorm:P` (P may be `inf`), `weighted:[[..],..]`, `support:[[..],..]`,
/// `crystalline:[[..],..]`, a JSON object, or `@path` to a file holding any of these.
pub fn parse_phi(text: &str, dim: Option<usize>) -> Result<Anisotropy, CliError> {
    let text = text.trim();
    if let Some(path) = text.strip_prefix('@') {
        let body = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {path}: {e}")))?;
        return parse_phi(&body, dim);
    }
    if text.starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid density JSON: {e}")))?;
        return phi_from_value(&v, dim);
    }
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| CliError::config(format!("expected KIND:ARG for --phi, got {text:?}")))?;
    let kind = kind.trim().to_ascii_lowercase();
    let phi = match kind.as_str() {
        "pnorm" => {
            let p = match arg.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" => f64::INFINITY,
                s => s.parse().map_err(|_| CliError::config(format!("invalid exponent {s:?}")))?,
            };
            Anisotropy::pnorm(p, dim.unwrap_or(2)).map_err(CliError::config)?
        }
        "weighted" | "support" | "crystalline" => {
            let rows: Vec<Vec<f64>> =
                serde_json::from_str(arg).map_err(|e| CliError::config(format!("invalid {kind} argument: {e}")))?;
            let width = rows.first().map_or(0, Vec::len);
            if let Some(d) = dim {
                if width != d {
                    return Err(CliError::config(format!("{kind} data has dimension {width} but --dim is {d}")));
                }
            }
            match kind.as_str() {
                "weighted" => {
                    if rows.len() != width {
                        return Err(CliError::config(format!("weighted matrix must be square, got {}x{width}", rows.len())));
                    }
                    Anisotropy::weighted(rows)
                }
                "support" => Anisotropy::support(rows),
                _ => Anisotropy::crystalline(rows),
            }
            .map_err(CliError::config)?
        }
        other => return Err(CliError::config(format!("unknown density kind {other:?}"))),
    };
    check_dim(phi, dim)
}

fn check_dim(phi: Anisotropy, dim: Option<usize>) -> Result<Anisotropy, CliError> {
    match dim {
        Some(d) if d != phi.dim() => {
            Err(CliError::config(format!("density has dimension {} but --dim is {d}", phi.dim())))
        }
        _ => Ok(phi),
    }
}

/// A density given inside a config file: either a shorthand string or a JSON object.
pub fn phi_from_value(v: &Value, dim: Option<usize>) -> Result<Anisotropy, CliError> {
    match v {
        Value::String(s) => parse_phi(s, dim),
        Value::Object(_) => {
            let spec: AnisotropySpec =
                serde_json::from_value(v.clone()).map_err(|e| CliError::config(format!("invalid density: {e}")))?;
            check_dim(spec.build().map_err(CliError::config)?, dim)
        }
        _ => Err(CliError::config("density must be a string or an object")),
    }
}

/// Values shared by all subcommands; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub phi: Option<Value>,
    pub dim: Option<usize>,
    pub lambda: Option<f64>,
    pub volume: Option<f64>,
    pub nvertices: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub cells: Option<usize>,
    pub family: Option<String>,
    pub anneal_steps: Option<usize>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&body).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }
}
