//! Parser for the `name(key=value,...)` text form used by distribution and
//! loss-curve specifications.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Call {
    pub name: String,
    pub args: Vec<(String, String)>,
    source: String,
}

impl Call {
    pub fn parse(input: &str) -> Result<Self> {
        let s = input.trim();
        let open = s
            .find('(')
            .ok_or_else(|| Error::parse(input, "expected `name(key=value,...)`"))?;
        if !s.ends_with(')') {
            return Err(Error::parse(input, "missing closing `)`"));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        if name.is_empty() {
            return Err(Error::parse(input, "missing family name"));
        }
        let body = &s[open + 1..s.len() - 1];
        let mut args = Vec::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(input, format!("argument `{part}` is not key=value")))?;
            let key = k.trim().to_ascii_lowercase();
            if args.iter().any(|(existing, _): &(String, String)| *existing == key) {
                return Err(Error::parse(input, format!("duplicate argument `{key}`")));
            }
            args.push((key, v.trim().to_string()));
        }
        Ok(Call {
            name,
            args,
            source: input.to_string(),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    pub fn num(&self, key: &str) -> Result<f64> {
        let raw = self
            .raw(key)
            .ok_or_else(|| Error::parse(&self.source, format!("missing argument `{key}`")))?;
        raw.parse::<f64>()
            .map_err(|_| Error::parse(&self.source, format!("`{key}={raw}` is not a number")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self
            .raw(key)
            .ok_or_else(|| Error::parse(&self.source, format!("missing argument `{key}`")))?;
        raw.split(':')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(&self.source, format!("`{key}` entry `{x}` is not a number")))
            })
            .collect()
    }

    /// Rejects any argument not in `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.args {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::parse(
                    &self.source,
                    format!("unknown argument `{k}` for `{}`", self.name),
                ));
            }
        }
        Ok(())
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(&self.source, message)
    }
}

pub(crate) fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(":")
}
