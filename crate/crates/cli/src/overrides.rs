//! `--set key=value` overrides, applied through the same deserialization
//! and validation as a config file.

use anyhow::{anyhow, bail};
use odd_assure::MonitorConfig;

pub fn apply(base: &MonitorConfig, sets: &[String]) -> anyhow::Result<MonitorConfig> {
    if sets.is_empty() {
        return Ok(base.clone());
    }
    let mut table = toml::Table::try_from(base).expect("config is a table");
    for raw in sets {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| anyhow!("--set '{raw}' is not KEY=VALUE"))?;
        let key = key.trim();
        let current = table
            .get(key)
            .ok_or_else(|| anyhow!("--set {key}: no such config field"))?;
        let parsed: toml::Table = format!("v = {}", value.trim())
            .parse()
            .map_err(|_| anyhow!("--set {key}: cannot parse '{value}'"))?;
        let new = match (current, &parsed["v"]) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
            (toml::Value::Integer(_), toml::Value::Integer(i)) if *i < 0 => {
                bail!("--set {key}: must not be negative")
            }
            (old, new) if old.type_str() == new.type_str() => new.clone(),
            (old, new) => bail!(
                "--set {key}: expected {}, got {}",
                old.type_str(),
                new.type_str()
            ),
        };
        table.insert(key.to_string(), new);
    }
    let cfg: MonitorConfig = table.try_into()?;
    cfg.validate().map_err(|e| anyhow!("after --set: {e}"))?;
    Ok(cfg)
}
