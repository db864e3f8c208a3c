//! Minimal `key = value` text configuration, used for threshold files,
//! synthetic stream scripts and experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Keys may repeat only if the caller reads them with [`KvConfig::get_all`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse {value:?}: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, Vec<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            }
            entries
                .entry(key.to_string())
                .or_default()
                .push(value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.entries.insert(key.into(), vec![value.to_string()]);
    }

    /// Last value for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .get(key)
            .and_then(|v| v.last())
            .map(String::as_str)
    }

    pub fn get_all(&self, key: &str) -> &[String] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn parse_value<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Invalid {
                key: key.to_string(),
                value: v.to_string(),
                reason: e.to_string(),
            }),
        }
    }

    pub fn parse_or<T>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    /// Comma-separated list value.
    pub fn parse_list<T>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| ConfigError::Invalid {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

impl fmt::Display for KvConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, values) in &self.entries {
            for value in values {
                writeln!(f, "{key} = {value}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let cfg = KvConfig::parse("# header\n\nseed = 7 # trailing\nname=abc\n").unwrap();
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.get("name"), Some("abc"));
        assert_eq!(cfg.parse_or::<u64>("seed", 0).unwrap(), 7);
        assert_eq!(cfg.parse_or::<u64>("other", 3).unwrap(), 3);
    }

    #[test]
    fn rejects_lines_without_equals() {
        let err = KvConfig::parse("ok = 1\nbroken line\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
    }

    #[test]
    fn lists_and_bad_values() {
        let cfg = KvConfig::parse("xs = 1, 2 ,3\nbad = x").unwrap();
        assert_eq!(cfg.parse_list::<u32>("xs").unwrap(), Some(vec![1, 2, 3]));
        assert!(cfg.parse_value::<f64>("bad").is_err());
    }

    #[test]
    fn display_round_trips() {
        let cfg = KvConfig::parse("a = 1\nb = two\n").unwrap();
        assert_eq!(KvConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }
}
