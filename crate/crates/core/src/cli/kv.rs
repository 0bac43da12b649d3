//! `key = value` line format shared by config and sequence files.

use std::str::FromStr;

use super::CliError;

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `text` into entries. `#` starts a comment; blank lines are skipped.
pub(crate) fn parse_entries(text: &str, origin: &str) -> Result<Vec<Entry>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(line_error(
                origin,
                line,
                format!("expected `key = value`, got `{content}`"),
            ));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(line_error(
                origin,
                line,
                format!("expected `key = value`, got `{content}`"),
            ));
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn line_error(origin: &str, line: usize, message: String) -> CliError {
    CliError::ConfigLine {
        origin: origin.to_string(),
        line,
        message,
    }
}

impl Entry {
    pub fn error(&self, origin: &str, message: impl Into<String>) -> CliError {
        line_error(origin, self.line, message.into())
    }

    pub fn parse<T: FromStr>(&self, origin: &str) -> Result<T, CliError> {
        self.value.parse().map_err(|_| {
            self.error(
                origin,
                format!("cannot parse `{}` for key `{}`", self.value, self.key),
            )
        })
    }

    /// A finite real.
    pub fn real(&self, origin: &str) -> Result<f64, CliError> {
        let v: f64 = self.parse(origin)?;
        if !v.is_finite() {
            return Err(self.error(origin, format!("`{}` must be finite", self.key)));
        }
        Ok(v)
    }

    /// Exactly `N` whitespace-separated finite reals.
    pub fn reals<const N: usize>(&self, origin: &str) -> Result<[f64; N], CliError> {
        let parts: Vec<&str> = self.value.split_whitespace().collect();
        if parts.len() != N {
            return Err(self.error(
                origin,
                format!("`{}` takes {N} values, got {}", self.key, parts.len()),
            ));
        }
        let mut out = [0.0; N];
        for (slot, part) in out.iter_mut().zip(parts) {
            *slot = part
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    self.error(
                        origin,
                        format!("cannot parse `{part}` for key `{}`", self.key),
                    )
                })?;
        }
        Ok(out)
    }
}

/// Rejects repeated keys except those listed in `repeatable`.
pub(crate) fn reject_duplicates(
    entries: &[Entry],
    origin: &str,
    repeatable: &[&str],
) -> Result<(), CliError> {
    let mut seen = std::collections::HashMap::new();
    for e in entries {
        if repeatable.contains(&e.key.as_str()) {
            continue;
        }
        if let Some(first) = seen.insert(e.key.as_str(), e.line) {
            return Err(e.error(
                origin,
                format!("duplicate key `{}` (first set on line {first})", e.key),
            ));
        }
    }
    Ok(())
}
