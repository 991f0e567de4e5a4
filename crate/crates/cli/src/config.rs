//! Config loading: JSON file (or built-in default), then `--seed`, then `--set` overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::Failure;

pub fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::error(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::error(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// Parse `a.b.c=value`. The value is read as JSON when it parses, else taken as a string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, Value), Failure> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Failure::error(format!("--set expects key=value, got `{spec}`")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Failure::error(format!("--set has an empty key segment in `{key}`")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn apply_override(root: &mut Value, path: &[String], value: Value) -> Result<(), Failure> {
    let mut node = root;
    for (i, seg) in path.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just created")
            }
            _ => {
                return Err(Failure::error(format!(
                    "--set {}: `{}` is not an object",
                    path.join("."),
                    path[..i].join(".")
                )))
            }
        };
        if i + 1 == path.len() {
            obj.insert(seg.clone(), value);
            return Ok(());
        }
        node = obj.entry(seg.clone()).or_insert(Value::Null);
    }
    unreachable!("override path is never empty")
}

/// Merge defaults, file, seed and overrides, then deserialize with field diagnostics.
pub fn resolve<T: DeserializeOwned>(
    defaults: Value,
    file: Option<&Path>,
    seed: Option<(&str, u64)>,
    overrides: &[String],
) -> Result<T, Failure> {
    let mut root = match file {
        Some(p) => read_json(p)?,
        None => defaults,
    };
    if let Some((key, s)) = seed {
        apply_override(&mut root, &[key.to_string()], Value::from(s))?;
    }
    for spec in overrides {
        let (path, value) = parse_override(spec)?;
        apply_override(&mut root, &path, value)?;
    }
    serde_json::from_value(root).map_err(|e| Failure::error(format!("invalid config: {e}")))
}
