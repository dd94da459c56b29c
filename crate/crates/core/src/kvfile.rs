//! Flat `key = value` parameter files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys are
//! kept in insertion order so that files written back out are stable.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    name: String,
    entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut file = Self::new(name);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    source_name: file.name.clone(),
                    line: idx + 1,
                    reason: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    source_name: file.name.clone(),
                    line: idx + 1,
                    reason: "empty key".into(),
                });
            }
            if file.get(key).is_some() {
                return Err(Error::Parse {
                    source_name: file.name.clone(),
                    line: idx + 1,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            file.entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path.display().to_string(), &text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.get(key).ok_or_else(|| Error::MissingKey {
            key: key.to_string(),
            source_name: self.name.clone(),
        })?;
        parse_number(raw).ok_or_else(|| Error::Parse {
            source_name: self.name.clone(),
            line: 0,
            reason: format!("`{key}` is not a number: `{raw}`"),
        })
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.contains(key) {
            self.f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Comma- or whitespace-separated list; `a/b` entries are evaluated as ratios.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.get(key).ok_or_else(|| Error::MissingKey {
            key: key.to_string(),
            source_name: self.name.clone(),
        })?;
        raw.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                parse_number(tok).ok_or_else(|| Error::Parse {
                    source_name: self.name.clone(),
                    line: 0,
                    reason: format!("`{key}` has a non-numeric entry `{tok}`"),
                })
            })
            .collect()
    }
}

impl std::fmt::Display for KvFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        f.write_str(&out)
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    let tok = tok.trim();
    if let Some((num, den)) = tok.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        return (den != 0.0).then_some(num / den);
    }
    tok.parse().ok()
}
