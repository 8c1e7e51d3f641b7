//! Flat `key = value` scenario files.
//!
//! One assignment per line, `#` starts a comment, values may be wrapped in
//! double quotes. Dimensioned values carry their unit after the number
//! (`omega0 = 800 kHz`, `b1 = "4.5 mG/mm"`); frequencies are cyclic and are
//! converted to angular frequencies.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use super::CliError;
use crate::units::{AngularFrequency, FieldGradient, MagneticField};

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {line_no}: expected `key = value`")));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(CliError::Config(format!("line {line_no}: invalid key `{key}`")));
            }
            let value = unquote(value.trim());
            if entries.insert(key.to_string(), (line_no, value)).is_some() {
                return Err(CliError::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Config { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn bad(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let line = self.entries.get(key).map_or(0, |(l, _)| *l);
        CliError::Config(format!("key `{key}` (line {line}): {msg}"))
    }

    pub fn string(&self, key: &str) -> Result<&str, CliError> {
        self.required(key)
    }

    pub fn number(&self, key: &str) -> Result<f64, CliError> {
        let v = self.required(key)?;
        let x: f64 = v.parse().map_err(|_| self.bad(key, format!("`{v}` is not a plain number")))?;
        if !x.is_finite() {
            return Err(self.bad(key, "must be finite"));
        }
        Ok(x)
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        if self.contains(key) {
            self.number(key)
        } else {
            Ok(default)
        }
    }

    pub fn integer(&self, key: &str) -> Result<u64, CliError> {
        let v = self.required(key)?;
        v.parse().map_err(|_| self.bad(key, format!("`{v}` is not a non-negative integer")))
    }

    pub fn boolean(&self, key: &str) -> Result<bool, CliError> {
        match self.required(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(self.bad(key, format!("`{v}` is not `true` or `false`"))),
        }
    }

    /// Comma-separated list of plain numbers, optionally in brackets.
    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.required(key)?;
        let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
        inner
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| self.bad(key, format!("`{}` is not a number", s.trim())))
            })
            .collect()
    }

    fn quantity(&self, key: &str, units: &[(&str, f64)], kind: &str) -> Result<f64, CliError> {
        let v = self.required(key)?;
        let (num, unit) = split_unit(v);
        let Some(unit) = unit else {
            let names: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
            return Err(self.bad(key, format!("{kind} needs a unit ({})", names.join(", "))));
        };
        let x: f64 = num
            .parse()
            .map_err(|_| self.bad(key, format!("`{num}` is not a number")))?;
        let scale = units
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|(_, s)| *s)
            .ok_or_else(|| self.bad(key, format!("unknown {kind} unit `{unit}`")))?;
        let out = x * scale;
        if !out.is_finite() {
            return Err(self.bad(key, "must be finite"));
        }
        Ok(out)
    }

    pub fn frequency(&self, key: &str) -> Result<AngularFrequency, CliError> {
        const UNITS: &[(&str, f64)] = &[("Hz", TAU), ("kHz", TAU * 1e3), ("MHz", TAU * 1e6), ("rad/s", 1.0)];
        self.quantity(key, UNITS, "frequency").map(AngularFrequency::from_rad_per_s)
    }

    pub fn time(&self, key: &str) -> Result<f64, CliError> {
        const UNITS: &[(&str, f64)] = &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)];
        self.quantity(key, UNITS, "time")
    }

    pub fn length(&self, key: &str) -> Result<f64, CliError> {
        const UNITS: &[(&str, f64)] = &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6)];
        self.quantity(key, UNITS, "length")
    }

    pub fn temperature(&self, key: &str) -> Result<f64, CliError> {
        const UNITS: &[(&str, f64)] = &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6), ("µK", 1e-6)];
        self.quantity(key, UNITS, "temperature")
    }

    pub fn mass(&self, key: &str) -> Result<f64, CliError> {
        const UNITS: &[(&str, f64)] = &[("kg", 1.0), ("u", crate::constants::ATOMIC_MASS_UNIT)];
        self.quantity(key, UNITS, "mass")
    }

    pub fn field(&self, key: &str) -> Result<MagneticField, CliError> {
        const UNITS: &[(&str, f64)] = &[("T", 1.0), ("G", 1e-4), ("mG", 1e-7), ("uT", 1e-6), ("µT", 1e-6)];
        self.quantity(key, UNITS, "magnetic field").map(MagneticField::from_tesla)
    }

    pub fn gradient(&self, key: &str) -> Result<FieldGradient, CliError> {
        const UNITS: &[(&str, f64)] = &[("T/m", 1.0), ("G/cm", 1e-2), ("mG/mm", 1e-4), ("G/m", 1e-4)];
        self.quantity(key, UNITS, "field gradient").map(FieldGradient::from_tesla_per_m)
    }

    /// Builds an error pointing at `key` for semantic problems found later.
    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        self.bad(key, msg)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> String {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
        .trim()
        .to_string()
}

/// Splits "4.5 mG/mm" or "4.5mG/mm" into number and unit.
fn split_unit(v: &str) -> (&str, Option<&str>) {
    let v = v.trim();
    if let Some((n, u)) = v.split_once(char::is_whitespace) {
        let u = u.trim();
        return (n, (!u.is_empty()).then_some(u));
    }
    let end = v
        .char_indices()
        .find(|(i, c)| {
            c.is_alphabetic() && !(matches!(c, 'e' | 'E') && v[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
        })
        .map_or(v.len(), |(i, _)| i);
    let (n, u) = v.split_at(end);
    (n, (!u.is_empty()).then_some(u))
}
