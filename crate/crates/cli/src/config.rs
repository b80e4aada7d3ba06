use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// The `--config` file: an object keyed by subcommand (`estimate`,
/// `verify_bound`, `init_dist`, `sweep`).
#[derive(Debug, Default)]
pub struct ConfigFile {
    sections: Map<String, Value>,
}

const SECTIONS: [&str; 4] = ["estimate", "verify_bound", "init_dist", "sweep"];

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let Value::Object(sections) = serde_json::from_str(text)? else {
            anyhow::bail!("config must be a JSON object");
        };
        if let Some(bad) = sections.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            anyhow::bail!("unknown config section {bad:?}; expected one of {SECTIONS:?}");
        }
        Ok(Self { sections })
    }

    /// The section for `name`, or the defaults when absent.
    pub fn section<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T> {
        match self.sections.get(name) {
            None => Ok(T::default()),
            Some(v) => serde_json::from_value(v.clone()).with_context(|| format!("config section {name:?}")),
        }
    }
}

/// Resolved configuration as embedded in output files.
#[derive(Serialize)]
pub struct Embedded<'a, T> {
    pub command: &'a str,
    #[serde(flatten)]
    pub config: &'a T,
}

#[cfg(test)]
mod tests {
    use super::*;
    use blocksense::linbound::TrialConfig;

    #[test]
    fn sections_default_and_reject_unknowns() {
        let f = ConfigFile::parse(r#"{"verify_bound": {"trials": 7}}"#).unwrap();
        let t: TrialConfig = f.section("verify_bound").unwrap();
        assert_eq!(t.trials, 7);
        assert_eq!(t.max_n, TrialConfig::default().max_n);
        assert!(ConfigFile::parse(r#"{"nope": {}}"#).is_err());
        assert!(ConfigFile::parse(r#"{"verify_bound": {"trials": 1, "typo": 2}}"#)
            .unwrap()
            .section::<TrialConfig>("verify_bound")
            .is_err());
        assert!(ConfigFile::parse("[1]").is_err());
    }
}
