use std::collections::BTreeSet;
use std::sync::Mutex;

use toml::{Table, Value};

use crate::error::{Error, Result};

/// Sectioned key/value parameters with typed lookup by dotted path.
///
/// The grammar is TOML with one relaxation: a value that is a single bare
/// word (`method = cg`) is read as a string.
#[derive(Debug)]
pub struct ParamTree {
    root: Table,
    used: Mutex<BTreeSet<String>>,
}

/// Conversion from a parameter value, with integer to real and string to
/// number coercion.
pub trait FromParam: Sized {
    const KIND: &'static str;
    fn from_param(v: &Value) -> Option<Self>;
}

impl FromParam for f64 {
    const KIND: &'static str = "real";
    fn from_param(v: &Value) -> Option<Self> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

impl FromParam for i64 {
    const KIND: &'static str = "integer";
    fn from_param(v: &Value) -> Option<Self> {
        match v {
            Value::Integer(i) => Some(*i),
            Value::Float(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Some(*x as i64),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

impl FromParam for usize {
    const KIND: &'static str = "non-negative integer";
    fn from_param(v: &Value) -> Option<Self> {
        i64::from_param(v).and_then(|i| usize::try_from(i).ok())
    }
}

impl FromParam for u64 {
    const KIND: &'static str = "non-negative integer";
    fn from_param(v: &Value) -> Option<Self> {
        i64::from_param(v).and_then(|i| u64::try_from(i).ok())
    }
}

impl FromParam for bool {
    const KIND: &'static str = "boolean";
    fn from_param(v: &Value) -> Option<Self> {
        match v {
            Value::Boolean(b) => Some(*b),
            Value::String(s) => match s.as_str() {
                "true" | "yes" | "on" => Some(true),
                "false" | "no" | "off" => Some(false),
                _ => None,
            },
            _ => None,
        }
    }
}

impl FromParam for String {
    const KIND: &'static str = "string";
    fn from_param(v: &Value) -> Option<Self> {
        match v {
            Value::String(s) => Some(s.clone()),
            Value::Integer(i) => Some(i.to_string()),
            Value::Float(x) => Some(x.to_string()),
            Value::Boolean(b) => Some(b.to_string()),
            _ => None,
        }
    }
}

impl FromParam for Vec<f64> {
    const KIND: &'static str = "list of reals";
    fn from_param(v: &Value) -> Option<Self> {
        match v {
            Value::Array(a) => a.iter().map(f64::from_param).collect(),
            other => f64::from_param(other).map(|x| vec![x]),
        }
    }
}

impl FromParam for Vec<usize> {
    const KIND: &'static str = "list of integers";
    fn from_param(v: &Value) -> Option<Self> {
        match v {
            Value::Array(a) => a.iter().map(usize::from_param).collect(),
            other => usize::from_param(other).map(|x| vec![x]),
        }
    }
}

fn is_bare_word(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || "_-./:".contains(c))
        && !matches!(s, "true" | "false" | "inf" | "nan")
}

/// Quotes bare-word values so the text becomes valid TOML. Byte offsets of
/// the remaining text shift, so only line numbers are reported on errors.
fn quote_bare_words(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 16);
    for line in text.lines() {
        let trimmed = line.trim_start();
        if !trimmed.starts_with('[') && !trimmed.starts_with('#') {
            if let Some(eq) = line.find('=') {
                let rest = &line[eq + 1..];
                let (value, comment) = match rest.find('#') {
                    Some(h) => (&rest[..h], &rest[h..]),
                    None => (rest, ""),
                };
                if is_bare_word(value.trim()) {
                    out.push_str(&line[..=eq]);
                    out.push_str(&format!(" \"{}\" {comment}\n", value.trim()));
                    continue;
                }
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses a parameter file. Duplicate keys, repeated sections and malformed
/// lines are reported with their line number.
pub fn parse_params(text: &str) -> Result<ParamTree> {
    let prepared = quote_bare_words(text);
    let root: Table = prepared.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map_or(0, |s| line_of(&prepared, s.start));
        Error::parse(line, e.message().trim())
    })?;
    Ok(ParamTree { root, used: Mutex::new(BTreeSet::new()) })
}

fn collect_leaves(prefix: &str, t: &Table, out: &mut Vec<String>) {
    for (k, v) in t {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(sub) => collect_leaves(&path, sub, out),
            _ => out.push(path),
        }
    }
}

impl ParamTree {
    pub fn empty() -> Self {
        ParamTree { root: Table::new(), used: Mutex::new(BTreeSet::new()) }
    }

    fn lookup(&self, path: &str) -> Option<&Value> {
        let mut parts = path.split('.');
        let mut cur = self.root.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.lookup(path).is_some()
    }

    /// Typed value at `path`, `None` when absent; a present value of the
    /// wrong type is a configuration error.
    pub fn get<T: FromParam>(&self, path: &str) -> Result<Option<T>> {
        let Some(v) = self.lookup(path) else { return Ok(None) };
        self.used.lock().expect("parameter bookkeeping").insert(path.to_string());
        T::from_param(v)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("parameter '{path}' = {v} is not a {}", T::KIND)))
    }

    pub fn get_or<T: FromParam>(&self, path: &str, default: T) -> Result<T> {
        Ok(self.get(path)?.unwrap_or(default))
    }

    pub fn require<T: FromParam>(&self, path: &str) -> Result<T> {
        self.get(path)?.ok_or_else(|| Error::Config(format!("missing parameter '{path}'")))
    }

    /// Keys directly under `section`, sorted.
    pub fn keys(&self, section: &str) -> Vec<String> {
        let table = if section.is_empty() { Some(&self.root) } else { self.lookup(section).and_then(Value::as_table) };
        table.map(|t| t.keys().cloned().collect()).unwrap_or_default()
    }

    /// Leaf paths never looked up so far.
    pub fn unused(&self) -> Vec<String> {
        let mut all = Vec::new();
        collect_leaves("", &self.root, &mut all);
        let used = self.used.lock().expect("parameter bookkeeping");
        all.retain(|p| !used.contains(p));
        all.sort();
        all
    }

    pub fn warn_unused(&self) {
        for p in self.unused() {
            log::warn!("parameter '{p}' was never used");
        }
    }
}
