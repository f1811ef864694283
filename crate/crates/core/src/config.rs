//! Flat `key = value` run configuration.
//!
//! Values are quoted strings, numbers, `true`/`false` or arrays of numbers.
//! `#` starts a comment and `;` separates entries on one line. Keys other than
//! the run options below are preset parameter overrides.

use crate::error::{Result, SfdError};
use crate::presets::{ParamMap, PresetId};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Bool(bool),
    Array(Vec<f64>),
}

/// Run options recognised in a configuration document.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct RunOptions {
    pub eps: Option<f64>,
    pub order: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub force: Option<bool>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub snap_tol: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub method: Option<String>,
    pub form: Option<String>,
    /// Full initial state `(x, xd, y, yd)`.
    pub initial_state: Option<Vec<f64>>,
    /// Initial state given in physical units (pendulum presets).
    pub physical_units: Option<bool>,
    pub k2_sweep: Option<Vec<f64>>,
    pub rays: Option<usize>,
    pub output_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: PresetId,
    pub mode: Option<String>,
    pub overrides: ParamMap,
    pub options: RunOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: PresetId::LinearCoupled,
            mode: None,
            overrides: ParamMap::new(),
            options: RunOptions::default(),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> SfdError {
    SfdError::Parse {
        line,
        message: message.into(),
    }
}

/// Splits a line at `;` and `#` outside quotes.
fn split_entries(line: &str, lineno: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for ch in line.chars() {
        match ch {
            '"' => {
                quoted = !quoted;
                cur.push(ch);
            }
            '#' if !quoted => break,
            ';' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    if quoted {
        return Err(parse_err(lineno, "unterminated string"));
    }
    out.push(cur);
    Ok(out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
}

fn parse_number(s: &str, lineno: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(lineno, format!("invalid number `{}`", s.trim())))
}

fn parse_value(raw: &str, lineno: usize) -> Result<Value> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(parse_err(lineno, "missing value"));
    }
    if let Some(rest) = raw.strip_prefix('"') {
        let inner = rest
            .strip_suffix('"')
            .ok_or_else(|| parse_err(lineno, "unterminated string"))?;
        if inner.contains('"') {
            return Err(parse_err(lineno, "unexpected quote inside string"));
        }
        return Ok(Value::Str(inner.to_string()));
    }
    if let Some(rest) = raw.strip_prefix('[') {
        let inner = rest
            .strip_suffix(']')
            .ok_or_else(|| parse_err(lineno, "unterminated array"))?;
        if inner.trim().is_empty() {
            return Ok(Value::Array(Vec::new()));
        }
        let items = inner.split(',').map(|s| parse_number(s, lineno)).collect::<Result<Vec<_>>>()?;
        return Ok(Value::Array(items));
    }
    match raw {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    parse_number(raw, lineno).map(Value::Num)
}

/// Parses the document into `(key, value, line)` entries in order.
pub fn parse_entries(text: &str) -> Result<Vec<(String, Value, usize)>> {
    let mut entries: Vec<(String, Value, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        for entry in split_entries(line, lineno)? {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| parse_err(lineno, format!("expected `key = value`, got `{entry}`")))?;
            let key = k.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
                return Err(parse_err(lineno, format!("invalid key `{key}`")));
            }
            if entries.iter().any(|(k0, _, _)| k0 == key) {
                return Err(parse_err(lineno, format!("duplicate key `{key}`")));
            }
            entries.push((key.to_string(), parse_value(v, lineno)?, lineno));
        }
    }
    Ok(entries)
}

fn mismatch(key: &str, expected: &'static str) -> SfdError {
    SfdError::TypeMismatch {
        key: key.to_string(),
        expected: expected.to_string(),
    }
}

fn num(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Num(x) => Ok(*x),
        _ => Err(mismatch(key, "number")),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    let x = num(key, v).map_err(|_| mismatch(key, "non-negative integer"))?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(mismatch(key, "non-negative integer"))
    }
}

fn string(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::Str(s) => Ok(s.clone()),
        _ => Err(mismatch(key, "string")),
    }
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        _ => Err(mismatch(key, "boolean")),
    }
}

fn array(key: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Array(a) => Ok(a.clone()),
        _ => Err(mismatch(key, "array")),
    }
}

/// Parses a configuration document. An empty document selects the
/// linear-coupled preset with its defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    apply_entries(&mut cfg, parse_entries(text)?)?;
    Ok(cfg)
}

/// Applies parsed entries on top of `cfg`; later entries win over earlier
/// settings.
pub fn apply_entries(cfg: &mut RunConfig, entries: Vec<(String, Value, usize)>) -> Result<()> {
    for (key, value, _line) in entries {
        let k = key.as_str();
        let o = &mut cfg.options;
        match k {
            "system" => cfg.preset = PresetId::parse(&string(k, &value)?)?,
            "mode" => cfg.mode = Some(string(k, &value)?),
            "eps" => o.eps = Some(num(k, &value)?),
            "order" => o.order = Some(count(k, &value)?),
            "seed" => o.seed = Some(count(k, &value)? as u64),
            "jobs" => o.jobs = Some(count(k, &value)?),
            "force" => o.force = Some(boolean(k, &value)?),
            "t_start" => o.t_start = Some(num(k, &value)?),
            "t_end" => o.t_end = Some(num(k, &value)?),
            "snap_tol" => o.snap_tol = Some(num(k, &value)?),
            "rtol" => o.rtol = Some(num(k, &value)?),
            "atol" => o.atol = Some(num(k, &value)?),
            "method" => o.method = Some(string(k, &value)?),
            "form" => o.form = Some(string(k, &value)?),
            "initial_state" => o.initial_state = Some(array(k, &value)?),
            "physical_units" => o.physical_units = Some(boolean(k, &value)?),
            "k2_sweep" => o.k2_sweep = Some(array(k, &value)?),
            "rays" => o.rays = Some(count(k, &value)?),
            "output_points" => o.output_points = Some(count(k, &value)?),
            _ => {
                cfg.overrides.insert(key.clone(), num(k, &value)?);
            }
        }
    }
    Ok(())
}
