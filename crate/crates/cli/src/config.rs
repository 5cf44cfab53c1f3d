//! `key = value` experiment configuration with command-line overrides.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Line(usize),
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Resolved configuration for one subcommand.
///
/// Keys are looked up as `<command>.<key>`, then `<key>`, then (for model
/// parameters) `model.<key>`; command-line flags win over all of them. Every
/// key read is remembered so output headers can record the resolved values.
#[derive(Debug)]
pub struct ExperimentConfig {
    command: String,
    path: Option<PathBuf>,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeMap<String, String>>,
}

/// Parses the `key = value` text of a config file.
fn parse_text(text: &str, path: &Path) -> Result<BTreeMap<String, Entry>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
        let key = k.trim();
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
        {
            return Err(parse_err(format!("bad key `{key}`")));
        }
        out.insert(
            key.replace('-', "_"),
            Entry {
                value: v.trim().to_string(),
                origin: Origin::Line(i + 1),
            },
        );
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Empty configuration for `command`.
    pub fn new(command: &str) -> Self {
        ExperimentConfig {
            command: command.replace('-', "_"),
            path: None,
            entries: BTreeMap::new(),
            used: RefCell::new(BTreeMap::new()),
        }
    }

    /// Reads the config file at `path` for `command`.
    pub fn load(command: &str, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation {
            field: "config".into(),
            reason: format!("{}: {e}", path.display()),
        })?;
        let mut cfg = Self::new(command);
        cfg.entries = parse_text(&text, path)?;
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }

    /// Sets `key` from a command-line flag.
    pub fn set_flag(&mut self, key: &str, value: &str) {
        self.entries.insert(
            key.replace('-', "_"),
            Entry {
                value: value.to_string(),
                origin: Origin::Flag,
            },
        );
    }

    /// Rejects file keys that no subcommand understands.
    pub fn check_keys(&self, allowed: &[&str], sections: &[&str]) -> Result<(), CliError> {
        for (key, entry) in &self.entries {
            let (section, leaf) = match key.rsplit_once('.') {
                Some((s, l)) => (Some(s), l),
                None => (None, key.as_str()),
            };
            let ok = match section {
                None => allowed.contains(&leaf),
                Some(s) if s == self.command || s == "model" => allowed.contains(&leaf),
                Some(s) => sections.contains(&s),
            };
            if !ok {
                let reason = match entry.origin {
                    Origin::Line(l) => format!("unknown key at line {l}"),
                    Origin::Flag => "unknown flag".into(),
                };
                return Err(CliError::Validation {
                    field: key.clone(),
                    reason,
                });
            }
        }
        Ok(())
    }

    fn lookup(&self, key: &str) -> Option<(&Entry, String)> {
        let scoped = format!("{}.{key}", self.command);
        let model = format!("model.{key}");
        if let Some(e) = self.entries.get(key).filter(|e| e.origin == Origin::Flag) {
            return Some((e, key.to_string()));
        }
        [scoped, key.to_string(), model]
            .into_iter()
            .find_map(|k| self.entries.get(&k).map(|e| (e, k)))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.lookup(key).is_some()
    }

    fn record(&self, key: &str, value: &str) {
        self.used
            .borrow_mut()
            .insert(key.to_string(), value.to_string());
    }

    /// Raw string value.
    pub fn string(&self, key: &str) -> Option<String> {
        let (e, _) = self.lookup(key)?;
        self.record(key, &e.value);
        Some(e.value.clone())
    }

    pub fn require_string(&self, key: &str) -> Result<String, CliError> {
        self.string(key).ok_or_else(|| missing(key))
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.string(key).unwrap_or_else(|| {
            self.record(key, default);
            default.to_string()
        })
    }

    fn bad_value(&self, key: &str, e: &Entry, reason: String) -> CliError {
        match (&e.origin, &self.path) {
            (Origin::Line(line), Some(path)) => CliError::Parse {
                path: path.clone(),
                line: *line,
                msg: format!("`{key}`: {reason}"),
            },
            _ => CliError::Validation {
                field: key.to_string(),
                reason,
            },
        }
    }

    /// Typed value, if present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some((e, _)) = self.lookup(key) else {
            return Ok(None);
        };
        let v = e
            .value
            .parse::<T>()
            .map_err(|err| self.bad_value(key, e, format!("`{}`: {err}", e.value)))?;
        self.record(key, &e.value);
        Ok(Some(v))
    }

    pub fn require<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| missing(key))
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, &default.to_string());
                Ok(default)
            }
        }
    }

    /// Comma-separated numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some((e, _)) = self.lookup(key) else {
            return Ok(None);
        };
        let v = e
            .value
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|err| self.bad_value(key, e, format!("`{}`: {err}", p.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.record(key, &e.value);
        Ok(Some(v))
    }

    /// Comma-separated numbers of a fixed length.
    pub fn require_list(&self, key: &str, len: usize) -> Result<Vec<f64>, CliError> {
        let v = self.list(key)?.ok_or_else(|| missing(key))?;
        if v.len() != len {
            return Err(CliError::Validation {
                field: key.to_string(),
                reason: format!("expected {len} comma-separated numbers, got {}", v.len()),
            });
        }
        Ok(v)
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.list(key)? {
            Some(v) => Ok(v),
            None => {
                let s = default
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(",");
                self.record(key, &s);
                Ok(default.to_vec())
            }
        }
    }

    /// Path to an input file that must exist.
    pub fn input_path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        let Some(s) = self.string(key) else {
            return Ok(None);
        };
        let p = PathBuf::from(&s);
        if !p.is_file() {
            return Err(CliError::Validation {
                field: key.to_string(),
                reason: format!("file `{s}` does not exist"),
            });
        }
        Ok(Some(p))
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// `key = value` pairs read so far, sorted by key.
    pub fn resolved(&self) -> Vec<(String, String)> {
        self.used
            .borrow()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

fn missing(key: &str) -> CliError {
    CliError::Validation {
        field: key.to_string(),
        reason: "required but not given".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_text(command: &str, text: &str) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::new(command);
        cfg.entries = parse_text(text, Path::new("test.cfg"))?;
        cfg.path = Some(PathBuf::from("test.cfg"));
        Ok(cfg)
    }

    #[test]
    fn sections_and_overrides() {
        let mut cfg = from_text(
            "saddle",
            "# comment\nmodel = mackey-glass\nmodel.alpha = 2 # trailing\nsaddle.t_star = 15\nt_star = 99\n",
        )
        .unwrap();
        assert_eq!(cfg.require::<f64>("alpha").unwrap(), 2.0);
        assert_eq!(cfg.require::<u32>("t_star").unwrap(), 15);
        cfg.set_flag("t-star", "20");
        assert_eq!(cfg.require::<u32>("t_star").unwrap(), 20);
        assert_eq!(cfg.resolved()[0], ("alpha".to_string(), "2".to_string()));
    }

    #[test]
    fn malformed_number_reports_line() {
        let cfg = from_text("simulate", "mesh = 256\nt_end = ten\n").unwrap();
        match cfg.require::<f64>("t_end") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_line_syntax() {
        assert!(matches!(
            from_text("simulate", "mesh 256\n"),
            Err(CliError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_field_is_named() {
        let cfg = from_text("saddle", "model = mg\n").unwrap();
        match cfg.require::<u64>("seed") {
            Err(CliError::Validation { field, .. }) => assert_eq!(field, "seed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = from_text("simulate", "mesh = 1\nbasin.width = 3\nbogus = 1\n").unwrap();
        let err = cfg.check_keys(&["mesh"], &["basin"]).unwrap_err();
        assert!(matches!(err, CliError::Validation { ref field, .. } if field == "bogus"));
    }
}
