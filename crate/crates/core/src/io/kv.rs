//! Line-based `key = value` files with `[section]` headers.
//!
//! Grammar:
//!
//! ```text
//! file    := { blank | comment | header | pair }
//! comment := ('#' | ';') text
//! header  := '[' name ']'
//! pair    := key '=' value          (value may carry a trailing '# comment')
//! ```
//!
//! Sections may repeat (the object description uses repeated `[layer]`
//! blocks). Keys inside a single section must be unique.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    entries: Vec<Entry>,
    used: Vec<bool>,
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

pub fn parse(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return parse_err(line, "unterminated section header");
            };
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return parse_err(line, format!("bad section name '{name}'"));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
                used: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return parse_err(line, format!("expected 'key = value', got '{trimmed}'"));
        };
        let key = key.trim();
        let value = value.split('#').next().unwrap_or("").trim();
        if key.is_empty() {
            return parse_err(line, "empty key");
        }
        let Some(section) = sections.last_mut() else {
            return parse_err(line, format!("key '{key}' appears before any [section]"));
        };
        if section.entries.iter().any(|e| e.key == key) {
            return parse_err(line, format!("duplicate key '{key}' in [{}]", section.name));
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
        section.used.push(false);
    }
    Ok(sections)
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            line: 0,
            entries: Vec::new(),
            used: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some((self.entries[i].value.clone(), self.entries[i].line))
    }

    /// Parses an optional value, marking the key as consumed.
    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => match v.parse::<T>() {
                Ok(x) => Ok(Some(x)),
                Err(_) => parse_err(line, format!("cannot parse value '{v}' for '{key}'")),
            },
        }
    }

    pub fn get_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => parse_err(self.line, format!("[{}] is missing '{key}'", self.name)),
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((v, line)) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s.parse::<T>() {
                Ok(x) => Ok(x),
                Err(_) => parse_err(line, format!("cannot parse list item '{s}' for '{key}'")),
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Fails on the first key that was never consumed.
    pub fn finish(&self) -> Result<()> {
        match self.entries.iter().zip(&self.used).find(|(_, u)| !**u) {
            Some((e, _)) => parse_err(e.line, format!("unknown key '{}' in [{}]", e.key, self.name)),
            None => Ok(()),
        }
    }
}
