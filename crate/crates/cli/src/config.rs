//! Flat `key = value` run configuration with flag overrides.

use crate::CliError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const OUT_DIR_ENV: &str = "SURFPDE_OUT_DIR";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Loads `path` (if any), then applies `overrides`. Every key must be in
    /// `allowed`.
    pub fn load(
        path: Option<&Path>,
        overrides: &[(&str, Option<String>)],
        allowed: &[&str],
    ) -> Result<RunConfig, CliError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        for (key, value) in overrides {
            if let Some(v) = value {
                config.values.insert(key.to_string(), v.clone());
            }
        }
        if let Some(key) = config.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key '{key}' (allowed: {})", allowed.join(", "))));
        }
        Ok(config)
    }

    /// `#` starts a comment; blank lines are ignored.
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", idx + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Usage(format!("config line {}: empty key", idx + 1)));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key '{key}'", idx + 1)));
            }
        }
        Ok(RunConfig { values })
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.str(key).unwrap_or(default)
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        self.str(key).ok_or_else(|| CliError::Usage(format!("missing required key '{key}'")))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.required(key).map(PathBuf::from)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.str(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("key '{key}': cannot parse '{v}': {e}"))))
            .transpose()
    }

    /// Integer in `[min, max]`.
    pub fn usize_in(&self, key: &str, default: usize, min: usize, max: usize) -> Result<usize, CliError> {
        let v = self.parsed::<usize>(key)?.unwrap_or(default);
        if v < min || v > max {
            return Err(CliError::Usage(format!("key '{key}' = {v} outside [{min}, {max}]")));
        }
        Ok(v)
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self.parsed::<u64>(key)?.unwrap_or(default))
    }

    /// Finite value in `[min, max]`.
    pub fn f64_in(&self, key: &str, default: f64, min: f64, max: f64) -> Result<f64, CliError> {
        let v = self.parsed::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() || v < min || v > max {
            return Err(CliError::Usage(format!("key '{key}' = {v} outside [{min}, {max}]")));
        }
        Ok(v)
    }

    pub fn opt_f64_in(&self, key: &str, min: f64, max: f64) -> Result<Option<f64>, CliError> {
        match self.str(key) {
            None | Some("auto") => Ok(None),
            Some(_) => self.f64_in(key, 0.0, min, max).map(Some),
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        Ok(self.parsed::<bool>(key)?.unwrap_or(default))
    }

    /// Comma-separated list of finite values.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(raw) = self.str(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Usage(format!("key '{key}': bad list entry '{}'", s.trim())))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Flag, then the environment, then the config file, then `.`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(dir) = flag {
            return dir.to_path_buf();
        }
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            return PathBuf::from(dir);
        }
        PathBuf::from(self.str_or("out_dir", "."))
    }

    /// The metadata block: tool version, command and the resolved config, in
    /// a form `--config` reads back.
    pub fn metadata(&self, command: &str) -> String {
        let mut out = format!("# surfpde {} {command}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_are_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nn = 200\nsurface = sphere  # trailing\n\n").unwrap();
        let c = RunConfig::load(Some(&path), &[("n", Some("500".into())), ("seed", None)], &["n", "surface", "seed"])
            .unwrap();
        assert_eq!(c.str("n"), Some("500"));
        assert_eq!(c.str("surface"), Some("sphere"));
        assert_eq!(c.str("seed"), None);
    }

    #[test]
    fn unknown_duplicate_and_malformed_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(RunConfig::load(Some(&path), &[], &["n"]).is_err());
        assert!(RunConfig::parse("n = 1\nn = 2").is_err());
        assert!(RunConfig::parse("just text").is_err());
    }

    #[test]
    fn typed_getters_check_ranges() {
        let c = RunConfig::parse("n = 0\nmu = -1\np = 2, 5,50\nflag = true\nmu2 = auto").unwrap();
        assert!(c.usize_in("n", 10, 1, 100).is_err());
        assert_eq!(c.usize_in("missing", 10, 1, 100).unwrap(), 10);
        assert!(c.f64_in("mu", 0.0, 0.0, 1e6).is_err());
        assert_eq!(c.f64_list("p").unwrap(), Some(vec![2.0, 5.0, 50.0]));
        assert!(c.bool("flag", false).unwrap());
        assert_eq!(c.opt_f64_in("mu2", 0.0, 1.0).unwrap(), None);
    }

    #[test]
    fn metadata_reads_back() {
        let c = RunConfig::parse("n = 30\nsurface = circle").unwrap();
        let meta = c.metadata("nodes");
        assert!(meta.starts_with("# surfpde "));
        assert_eq!(RunConfig::parse(&meta).unwrap(), c);
    }
}
