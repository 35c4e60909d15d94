//! Command line and HTTP front end for lakelens.

pub mod server;

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde_json::Value;

use lakelens_core::pipeline::Workspace;
use lakelens_core::LakeConfig;

/// Set a dotted config key such as `train.epochs` to a JSON literal, or to a
/// string when the value does not parse as JSON.
pub fn apply_override(cfg: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| anyhow!("override {assignment:?} is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = cfg;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| anyhow!("unknown config key {key:?}"))?;
    }
    *slot = value;
    Ok(())
}

/// Explicit file, else the workspace's saved config, else defaults; then
/// overrides in order.
pub fn resolve_config(ws: &Workspace, file: Option<&Path>, overrides: &[String]) -> anyhow::Result<LakeConfig> {
    let base = match file {
        Some(p) => LakeConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None if ws.config_path().exists() => ws.load_config()?,
        None => LakeConfig::default(),
    };
    if overrides.is_empty() {
        return Ok(base);
    }
    let mut v = serde_json::to_value(&base)?;
    for o in overrides {
        apply_override(&mut v, o)?;
    }
    match serde_json::from_value(v) {
        Ok(cfg) => Ok(cfg),
        Err(e) => bail!("config overrides rejected: {e}"),
    }
}
