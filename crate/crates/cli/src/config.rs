//! Flat `key = value` configuration files with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::CliError;

/// Where a setting came from, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Flag,
    ConfigLine(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag => f.write_str("command line"),
            Origin::ConfigLine(n) => write!(f, "config line {n}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, Vec<(String, Origin)>>,
}

pub const KEYS: &[&str] = &[
    "dist",
    "loss",
    "budget",
    "sigma-e",
    "max-rate",
    "rate-grid",
    "n-max",
    "n-concepts",
    "seed",
    "out",
    "delays",
    "policy",
    "schedule",
    "deploy-rate",
    "cycles-csv",
];

impl Settings {
    /// Parses a config file. Blank lines and `#` comments are skipped;
    /// `dist` may repeat, other keys may not.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {n}: expected `key = value`, got `{line}`")))?;
            let key = k.trim().to_ascii_lowercase().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("config line {n}: unknown key `{key}`")));
            }
            let entry = s.values.entry(key.clone()).or_default();
            if !entry.is_empty() && key != "dist" {
                return Err(CliError::config(format!("config line {n}: duplicate key `{key}`")));
            }
            entry.push((v.trim().to_string(), Origin::ConfigLine(n)));
        }
        Ok(s)
    }

    /// Command-line values replace whatever the file set for that key.
    pub fn set_flag(&mut self, key: &str, values: Vec<String>) {
        if !values.is_empty() {
            self.values
                .insert(key.to_string(), values.into_iter().map(|v| (v, Origin::Flag)).collect());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&(String, Origin)> {
        self.values.get(key).and_then(|v| v.first())
    }

    pub fn all(&self, key: &str) -> Vec<&(String, Origin)> {
        self.values.get(key).map(|v| v.iter().collect()).unwrap_or_default()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((text, origin)) => text
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::config(format!("{origin}: `{key}` = `{text}`: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list of positive numbers.
    pub fn grid(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some((text, origin)) = self.raw(key) else {
            return Ok(None);
        };
        let values = text
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::config(format!("{origin}: `{key}` entry `{}` is not a number", x.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CliError::config(format!(
                "{origin}: `{key}` must be a non-empty list of non-negative numbers"
            )));
        }
        Ok(Some(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let text = "# budget sweep\ndist = exp(rate=1)\nbudget = 1, 2,3\nsigma_e = 1\n\ndist = weibull(k=2,mean=1)\n";
        let mut s = Settings::parse(text).unwrap();
        assert_eq!(s.all("dist").len(), 2);
        assert_eq!(s.grid("budget").unwrap().unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(s.get::<f64>("sigma-e").unwrap(), Some(1.0));
        s.set_flag("budget", vec!["5".into()]);
        assert_eq!(s.grid("budget").unwrap().unwrap(), vec![5.0]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = Settings::parse("dist = exp(rate=1)\nnonsense\n").unwrap_err();
        assert!(err.message.contains("line 2"), "{}", err.message);
        let err = Settings::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(err.message.contains("duplicate"));
        let err = Settings::parse("colour = red\n").unwrap_err();
        assert!(err.message.contains("unknown key"));
        let s = Settings::parse("\n\nseed = x\n").unwrap();
        let err = s.get::<u64>("seed").unwrap_err();
        assert!(err.message.contains("config line 3"), "{}", err.message);
    }
}
