//! Flat `key = value` configuration files.
//!
//! Keys are long flag names (`rounds`, `subject-effect-sd`, ...); `_` and
//! `-` are interchangeable. Blank lines and lines starting with `#` are
//! ignored. A flag given on the command line always wins over the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use bbt_core::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("config line {}: expected key=value", i + 1)))?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(Error::usage(format!("config line {}: empty key", i + 1)));
            }
            if values.insert(key.clone(), v.trim().to_owned()).is_some() {
                return Err(Error::usage(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Settings { values })
    }

    /// Errors on keys that are not a flag of any command.
    pub fn check_known(&self, known: &BTreeSet<String>) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(*k)) {
            Some(k) => Err(Error::usage(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag value if given, else the file value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse().map_err(|e| Error::usage(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    pub fn pick_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        match self.raw(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::usage(format!(
                    "config key `{key}`: expected true or false, got `{v}`"
                ))),
            },
        }
    }

    /// Comma-separated list.
    pub fn pick_list<T: FromStr>(&self, flag: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|e| Error::usage(format!("config key `{key}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prefers_flags() {
        let s = Settings::parse(
            "# run\nrounds = 50\nsubject_effect_sd=0.5\n\nearly-prediction=true\nsubject-counts=10, 20\n",
        )
        .unwrap();
        assert_eq!(s.pick::<usize>(None, "rounds").unwrap(), Some(50));
        assert_eq!(s.pick(Some(7usize), "rounds").unwrap(), Some(7));
        assert_eq!(s.pick::<f64>(None, "subject-effect-sd").unwrap(), Some(0.5));
        assert!(s.switch(false, "early-prediction").unwrap());
        assert_eq!(
            s.pick_list::<usize>(None, "subject-counts").unwrap(),
            Some(vec![10, 20])
        );
        assert_eq!(s.pick::<usize>(None, "bags").unwrap(), None);
    }

    #[test]
    fn bad_files_are_usage_errors() {
        assert!(Settings::parse("rounds").is_err());
        assert!(Settings::parse("a=1\na=2").is_err());
        let s = Settings::parse("rounds=many").unwrap();
        assert!(matches!(s.pick::<usize>(None, "rounds"), Err(Error::Usage(_))));
        let known = ["rounds".to_string()].into_iter().collect();
        assert!(Settings::parse("rouds=3").unwrap().check_known(&known).is_err());
    }
}
