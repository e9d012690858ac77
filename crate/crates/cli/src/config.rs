//! Layered JSON configuration: built-in defaults, then the `--config` file,
//! then `--set path=value` overrides, then strict deserialization.

use std::path::Path;

use paramtrack::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Recursively merge `patch` into `base`. Objects merge key by key; any
/// other value replaces what was there. An object naming a different `kind`
/// (a sawtooth over an AM default, say) replaces the whole object so no
/// fields of the old kind leak through.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) if p.get("kind").is_none_or(|k| b.get("kind") == Some(k)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Apply one `a.b.c=value` override. The value is parsed as JSON when it
/// can be, so `--set s_n=3` sets a number and `--set mask=[0,1]` a list;
/// anything else is taken as a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like path=value"))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::config(spec, "empty override path"));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if let Value::Array(items) = cur {
            let idx: usize = part
                .parse()
                .map_err(|_| Error::config(path, format!("`{part}` is not a list index")))?;
            let len = items.len();
            cur = items
                .get_mut(idx)
                .ok_or_else(|| Error::config(path, format!("index {idx} out of range (length {len})")))?;
        } else {
            if !cur.is_object() {
                *cur = Value::Object(Default::default());
            }
            let obj = cur.as_object_mut().expect("object");
            cur = obj.entry(part.to_string()).or_insert(Value::Null);
        }
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Ok(())
}

/// Build a `T` from `defaults`, an optional JSON file and overrides.
/// Unknown keys and type errors are reported with their key path.
pub fn load<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut doc = serde_json::to_value(defaults).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| Error::config(path.display().to_string(), format!("invalid JSON: {e}")))?;
        if !patch.is_object() {
            return Err(Error::config(path.display().to_string(), "config must be a JSON object"));
        }
        merge(&mut doc, patch);
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    from_value(doc)
}

pub fn from_value<T: DeserializeOwned>(doc: Value) -> Result<T> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })
}
