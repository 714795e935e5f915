//! Flat key-value configuration files.
//!
//! The grammar is deliberately tiny so that any language can parse it:
//!
//! ```text
//! # comment, blank lines ignored
//! [section]
//! key = value
//! ```
//!
//! A `[name]` line opens a section; every `key = value` line belongs to the
//! most recently opened section. Keys must be unique within their section.
//! Values are taken verbatim (trimmed), with commas separating list entries.
//! There is no quoting, escaping or line continuation.

use maxharm_core::{Error, Result, Topology};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Section {
    name: String,
    entries: Vec<(String, String)>,
}

impl Section {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Raw value for `key`, or a config error naming both the key and the
    /// section it was expected in.
    pub fn get(&self, key: &str) -> Result<&str> {
        self.get_opt(key).ok_or_else(|| {
            Error::Format(format!("missing key `{key}` in section [{}]", self.name))
        })
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| {
            Error::Format(format!(
                "key `{key}` in section [{}] is not {what}: `{raw}`",
                self.name
            ))
        })
    }

    fn typed_opt<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.get_opt(key) {
            None => Ok(None),
            Some(_) => self.typed(key, what).map(Some),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.typed(key, "a number")
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.typed_opt(key, "a number")
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.typed(key, "a non-negative integer")
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.typed_opt(key, "a non-negative integer")
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.typed(key, "a non-negative integer")
    }

    pub fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        self.typed_opt(key, "true or false")
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.split_list(key)?
            .iter()
            .map(|s| {
                s.parse().map_err(|_| {
                    Error::Format(format!(
                        "entry `{s}` of key `{key}` in section [{}] is not a number",
                        self.name
                    ))
                })
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.split_list(key)?
            .iter()
            .map(|s| {
                s.parse().map_err(|_| {
                    Error::Format(format!(
                        "entry `{s}` of key `{key}` in section [{}] is not an integer",
                        self.name
                    ))
                })
            })
            .collect()
    }

    pub fn str_list(&self, key: &str) -> Result<Vec<String>> {
        self.split_list(key)
    }

    fn split_list(&self, key: &str) -> Result<Vec<String>> {
        let raw = self.get(key)?;
        Ok(raw
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect())
    }

    pub fn topology(&self, key: &str) -> Result<Topology> {
        match self.get(key)? {
            "torus" => Ok(Topology::Torus),
            "box" => Ok(Topology::Box),
            other => Err(Error::Format(format!(
                "key `{key}` in section [{}] must be `torus` or `box`, got `{other}`",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    sections: Vec<Section>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut sections: Vec<Section> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::Format(format!(
                        "line {}: empty section name",
                        lineno + 1
                    )));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(Error::Format(format!(
                        "line {}: duplicate section [{name}]",
                        lineno + 1
                    )));
                }
                sections.push(Section {
                    name: name.to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Format(format!(
                    "line {}: expected `key = value` or `[section]`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Format(format!("line {}: empty key", lineno + 1)));
            }
            let Some(section) = sections.last_mut() else {
                return Err(Error::Format(format!(
                    "line {}: `{key}` appears before any [section]",
                    lineno + 1
                )));
            };
            if section.entries.iter().any(|(k, _)| k == key) {
                return Err(Error::Format(format!(
                    "line {}: duplicate key `{key}` in section [{}]",
                    lineno + 1,
                    section.name
                )));
            }
            section.entries.push((key.to_string(), value.to_string()));
        }
        Ok(Config { sections })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.section_opt(name)
            .ok_or_else(|| Error::Format(format!("missing section [{name}]")))
    }

    pub fn section_opt(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections(&self) -> impl Iterator<Item = &Section> {
        self.sections.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_typed_values() {
        let cfg = Config::parse(
            "# demo\n[grid]\nshape = 64, 64\nh = 0.015625\ntopology = torus\n\n[corpus]\nseed = 7\ncount = 3\n",
        )
        .unwrap();
        let grid = cfg.section("grid").unwrap();
        assert_eq!(grid.usize_list("shape").unwrap(), vec![64, 64]);
        assert_eq!(grid.f64("h").unwrap(), 0.015625);
        assert_eq!(grid.topology("topology").unwrap(), Topology::Torus);
        assert_eq!(cfg.section("corpus").unwrap().u64("seed").unwrap(), 7);
    }

    #[test]
    fn missing_key_error_names_key_and_section() {
        let cfg = Config::parse("[corpus]\nseed = 1\n").unwrap();
        let err = cfg.section("corpus").unwrap().get("count").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`count`"), "{msg}");
        assert!(msg.contains("[corpus]"), "{msg}");
    }

    #[test]
    fn rejects_duplicates_and_orphan_keys() {
        assert!(Config::parse("[a]\nx = 1\nx = 2\n").is_err());
        assert!(Config::parse("[a]\nx = 1\n[a]\ny = 2\n").is_err());
        assert!(Config::parse("x = 1\n").is_err());
    }

    #[test]
    fn bad_typed_value_mentions_the_offender() {
        let cfg = Config::parse("[grid]\nh = fast\n").unwrap();
        let msg = cfg.section("grid").unwrap().f64("h").unwrap_err().to_string();
        assert!(msg.contains("fast"), "{msg}");
    }
}
