//! Sectioned key-value configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment                      blank lines and everything after # ignored
//! [section]                      sweep | simulate | fit
//! key = value                    scalar
//! key = v1, v2, v3               comma-separated list
//! ```
//!
//! Numeric values accept plain literals (`0.5`, `2`, `1e-3`) and angle
//! expressions of the form `[coef]pi[/div]`, e.g. `pi`, `pi/3`, `2pi/3`,
//! `11pi/6`, `-pi/2`.

use dcem_core::baselines::Method;
use dcem_core::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Which model a sweep job fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodSel {
    Dcem,
    Baseline(Method),
}

impl MethodSel {
    pub fn tag(self) -> &'static str {
        match self {
            MethodSel::Dcem => "dcem",
            MethodSel::Baseline(m) => m.tag(),
        }
    }

    pub fn from_tag(s: &str) -> Option<MethodSel> {
        if s == "dcem" {
            Some(MethodSel::Dcem)
        } else {
            Method::from_tag(s).map(MethodSel::Baseline)
        }
    }
}

/// Raw parsed file: section name -> (key -> (line, value)).
#[derive(Debug, Default)]
pub struct ConfigFile {
    path: String,
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl ConfigFile {
    pub fn parse(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_str(&path.display().to_string(), &text)
    }

    pub fn parse_str(path: &str, text: &str) -> Result<ConfigFile> {
        let mut cfg = ConfigFile {
            path: path.to_string(),
            sections: BTreeMap::new(),
        };
        let mut current: Option<String> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(path, ln + 1, "unterminated section header"))?
                    .trim()
                    .to_string();
                cfg.sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, ln + 1, format!("expected `key = value`, got `{line}`")))?;
            let section = current
                .clone()
                .ok_or_else(|| Error::parse(path, ln + 1, "key before any [section] header"))?;
            let prev = cfg
                .sections
                .get_mut(&section)
                .unwrap()
                .insert(key.trim().to_string(), (ln + 1, value.trim().to_string()));
            if prev.is_some() {
                return Err(Error::parse(
                    path,
                    ln + 1,
                    format!("duplicate key `{}` in [{}]", key.trim(), section),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn section(&self, name: &str) -> Result<SectionView<'_>> {
        self.sections
            .get(name)
            .map(|entries| SectionView {
                path: &self.path,
                name: name.to_string(),
                entries,
            })
            .ok_or_else(|| Error::parse(&self.path, 0, format!("missing [{name}] section")))
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }
}

pub struct SectionView<'a> {
    path: &'a str,
    name: String,
    entries: &'a BTreeMap<String, (usize, String)>,
}

impl SectionView<'_> {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(ln, v)| (*ln, v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<(usize, &str)> {
        self.raw(key).ok_or_else(|| {
            Error::parse(
                self.path,
                0,
                format!("missing key `{key}` in [{}]", self.name),
            )
        })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let (ln, v) = self.require(key)?;
        parse_angle(v).ok_or_else(|| Error::parse(self.path, ln, format!("bad number `{v}` for `{key}`")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some((ln, v)) => parse_angle(v)
                .ok_or_else(|| Error::parse(self.path, ln, format!("bad number `{v}` for `{key}`"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some((ln, v)) => v
                .parse()
                .map_err(|_| Error::parse(self.path, ln, format!("bad integer `{v}` for `{key}`"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some((ln, v)) => v
                .parse()
                .map_err(|_| Error::parse(self.path, ln, format!("bad integer `{v}` for `{key}`"))),
        }
    }

    pub fn string(&self, key: &str) -> Result<String> {
        Ok(self.require(key)?.1.to_string())
    }

    pub fn string_opt(&self, key: &str) -> Option<String> {
        self.raw(key).map(|(_, v)| v.to_string())
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let (ln, v) = self.require(key)?;
        let vals: Option<Vec<f64>> = v.split(',').map(|p| parse_angle(p.trim())).collect();
        let vals = vals
            .ok_or_else(|| Error::parse(self.path, ln, format!("bad number list `{v}` for `{key}`")))?;
        if vals.is_empty() {
            return Err(Error::parse(self.path, ln, format!("empty list for `{key}`")));
        }
        Ok(vals)
    }

    pub fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some((ln, v)) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::parse(self.path, ln, format!("bad integer list `{v}`")))
                })
                .collect(),
        }
    }

    pub fn methods(&self, key: &str) -> Result<Vec<MethodSel>> {
        let (ln, v) = self.require(key)?;
        v.split(',')
            .map(|p| {
                let tag = p.trim();
                MethodSel::from_tag(tag)
                    .ok_or_else(|| Error::parse(self.path, ln, format!("unknown method `{tag}`")))
            })
            .collect()
    }

    pub fn method(&self, key: &str) -> Result<MethodSel> {
        let (ln, v) = self.require(key)?;
        MethodSel::from_tag(v)
            .ok_or_else(|| Error::parse(self.path, ln, format!("unknown method `{v}`")))
    }
}

/// Parse a float literal or a `[coef]pi[/div]` angle expression.
pub fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (body, div) = match s.split_once('/') {
        Some((b, d)) => (b.trim(), Some(d.trim().parse::<f64>().ok()?)),
        None => (s, None),
    };
    let coef_str = body.strip_suffix("pi")?.trim();
    let coef = if coef_str.is_empty() {
        1.0
    } else if coef_str == "-" {
        -1.0
    } else {
        coef_str.parse::<f64>().ok()?
    };
    let mut v = coef * std::f64::consts::PI;
    if let Some(d) = div {
        if d == 0.0 {
            return None;
        }
        v /= d;
    }
    Some(v)
}
