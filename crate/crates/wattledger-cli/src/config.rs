//! JSON config files: every flag can be defaulted from a file, and flags
//! given on the command line always win. The file maps subcommand names
//! to flag objects, plus top-level `jobs`:
//!
//! ```json
//! {
//!   "jobs": 4,
//!   "integrate": { "method": "trapezoid", "pue": 1.5 },
//!   "compare": { "rounds": 20000, "seed": 7 }
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::Value;

/// Environment variable naming a default config file, used when
/// `--config` is not given.
pub const CONFIG_ENV: &str = "WATTLEDGER_CONFIG";

/// A problem with how the tool was invoked (as opposed to a problem with
/// the data it was pointed at). Mapped to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(message.into()))
}

/// Loaded configuration; `Value::Null` when no file was named.
pub struct Config {
    root: Value,
}

impl Config {
    pub fn load(explicit: Option<&Path>) -> anyhow::Result<Config> {
        let path: Option<PathBuf> = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).map(PathBuf::from),
        };
        let Some(path) = path else {
            return Ok(Config { root: Value::Null });
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
        let root: Value = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config file {} is not valid JSON: {e}", path.display())))?;
        if !root.is_object() {
            return Err(usage(format!(
                "config file {} must contain a JSON object",
                path.display()
            )));
        }
        Ok(Config { root })
    }

    /// The config object for one subcommand (`Null` when absent).
    pub fn section(&self, name: &str) -> &Value {
        self.root.get(name).unwrap_or(&Value::Null)
    }

    pub fn jobs(&self) -> anyhow::Result<Option<usize>> {
        match self.root.get("jobs") {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| usage(format!("config key 'jobs' must be a non-negative integer, got {v}")))
                .map(Some),
        }
    }
}

fn get<'v>(section: &'v Value, key: &str) -> Option<&'v Value> {
    match section.get(key) {
        None | Some(Value::Null) => None,
        Some(v) => Some(v),
    }
}

pub fn f64_of(section: &Value, key: &str) -> anyhow::Result<Option<f64>> {
    get(section, key)
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| usage(format!("config key '{key}' must be a number, got {v}")))
        })
        .transpose()
}

pub fn u64_of(section: &Value, key: &str) -> anyhow::Result<Option<u64>> {
    get(section, key)
        .map(|v| {
            v.as_u64()
                .ok_or_else(|| usage(format!("config key '{key}' must be a non-negative integer, got {v}")))
        })
        .transpose()
}

pub fn bool_of(section: &Value, key: &str) -> anyhow::Result<Option<bool>> {
    get(section, key)
        .map(|v| {
            v.as_bool()
                .ok_or_else(|| usage(format!("config key '{key}' must be true or false, got {v}")))
        })
        .transpose()
}

pub fn str_of(section: &Value, key: &str) -> anyhow::Result<Option<String>> {
    get(section, key)
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| usage(format!("config key '{key}' must be a string, got {v}")))
        })
        .transpose()
}

/// Accepts `"path"` or `["path", ...]`.
pub fn strings_of(section: &Value, key: &str) -> anyhow::Result<Vec<String>> {
    match get(section, key) {
        None => Ok(Vec::new()),
        Some(Value::String(s)) => Ok(vec![s.clone()]),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| usage(format!("config key '{key}' must hold strings, got {v}")))
            })
            .collect(),
        Some(v) => Err(usage(format!(
            "config key '{key}' must be a string or array of strings, got {v}"
        ))),
    }
}

/// Flag wins over config; error when neither supplies the value.
pub fn require<T>(flag: Option<T>, cfg: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(cfg)
        .ok_or_else(|| usage(format!("missing required value: pass --{name} or set it in the config file")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_typed_lookups() {
        let cfg = Config {
            root: serde_json::json!({
                "jobs": 4,
                "integrate": { "method": "trapezoid", "pue": 1.5, "trace": ["a.csv", "b.csv"] }
            }),
        };
        assert_eq!(cfg.jobs().unwrap(), Some(4));
        let s = cfg.section("integrate");
        assert_eq!(str_of(s, "method").unwrap().as_deref(), Some("trapezoid"));
        assert_eq!(f64_of(s, "pue").unwrap(), Some(1.5));
        assert_eq!(strings_of(s, "trace").unwrap(), vec!["a.csv", "b.csv"]);
        assert_eq!(f64_of(s, "absent").unwrap(), None);
        assert!(cfg.section("nope").is_null());
    }

    #[test]
    fn type_errors_are_usage_errors() {
        let cfg = Config { root: serde_json::json!({ "integrate": { "pue": "high" } }) };
        let err = f64_of(cfg.section("integrate"), "pue").unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn require_prefers_the_flag() {
        assert_eq!(require(Some(1.0), Some(2.0), "x").unwrap(), 1.0);
        assert_eq!(require(None, Some(2.0), "x").unwrap(), 2.0);
        let err = require::<f64>(None, None, "from").unwrap_err();
        assert!(err.to_string().contains("--from"));
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
