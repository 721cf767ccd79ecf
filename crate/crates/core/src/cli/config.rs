use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::DEFAULT_LEVEL;

pub const CONFIG_FILE: &str = "shiftscope.toml";
pub const ENV_PREFIX: &str = "SHIFTSCOPE_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
}

/// Resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliConfig {
    pub data_dir: PathBuf,
    pub level: f64,
    pub seed: u64,
    pub format: Format,
    /// `env_logger` filter, e.g. `warn` or `shiftscope=debug`.
    pub verbosity: String,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            level: DEFAULT_LEVEL,
            seed: 0,
            format: Format::Text,
            verbosity: "warn".into(),
        }
    }
}

/// One configuration layer; every key optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub data_dir: Option<PathBuf>,
    pub level: Option<f64>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub verbosity: Option<String>,
}

impl Layer {
    /// `shiftscope.toml` in `dir`, or an empty layer when absent.
    pub fn from_file(dir: &Path) -> Result<Self> {
        let path = dir.join(CONFIG_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }

    /// `SHIFTSCOPE_DATA_DIR`, `SHIFTSCOPE_LEVEL`, `SHIFTSCOPE_SEED`,
    /// `SHIFTSCOPE_FORMAT`, `SHIFTSCOPE_VERBOSITY`.
    pub fn from_env(env: &HashMap<String, String>) -> Result<Self> {
        let get = |k: &str| env.get(&format!("{ENV_PREFIX}{k}")).map(|v| v.trim().to_string());
        let bad = |k: &str, v: &str| Error::InvalidArgument(format!("{ENV_PREFIX}{k}: cannot parse `{v}`"));
        Ok(Self {
            data_dir: get("DATA_DIR").map(PathBuf::from),
            level: get("LEVEL").map(|v| v.parse().map_err(|_| bad("LEVEL", &v))).transpose()?,
            seed: get("SEED").map(|v| v.parse().map_err(|_| bad("SEED", &v))).transpose()?,
            format: get("FORMAT")
                .map(|v| match v.to_ascii_lowercase().as_str() {
                    "text" => Ok(Format::Text),
                    "json" => Ok(Format::Json),
                    _ => Err(bad("FORMAT", &v)),
                })
                .transpose()?,
            verbosity: get("VERBOSITY"),
        })
    }

    fn over(self, lower: Layer) -> Layer {
        Layer {
            data_dir: self.data_dir.or(lower.data_dir),
            level: self.level.or(lower.level),
            seed: self.seed.or(lower.seed),
            format: self.format.or(lower.format),
            verbosity: self.verbosity.or(lower.verbosity),
        }
    }
}

/// Flags over environment over file over defaults.
pub fn resolve(flags: Layer, env: Layer, file: Layer) -> Result<CliConfig> {
    let merged = flags.over(env).over(file);
    let d = CliConfig::default();
    let cfg = CliConfig {
        data_dir: merged.data_dir.unwrap_or(d.data_dir),
        level: merged.level.unwrap_or(d.level),
        seed: merged.seed.unwrap_or(d.seed),
        format: merged.format.unwrap_or(d.format),
        verbosity: merged.verbosity.unwrap_or(d.verbosity),
    };
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0, 1), got {}", cfg.level)));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(CONFIG_FILE), "seed = 3\nlevel = 0.1\ndata_dir = \"from-file\"\n").unwrap();
        let file = Layer::from_file(dir.path()).unwrap();
        let env: HashMap<String, String> = [("SHIFTSCOPE_SEED".to_string(), "5".to_string())].into();
        let env = Layer::from_env(&env).unwrap();
        let flags = Layer {
            level: Some(0.01),
            ..Layer::default()
        };
        let cfg = resolve(flags, env, file).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.level, 0.01);
        assert_eq!(cfg.data_dir, PathBuf::from("from-file"));
        assert_eq!(cfg.format, Format::Text);
    }

    #[test]
    fn invalid_values_rejected() {
        let env: HashMap<String, String> = [("SHIFTSCOPE_SEED".to_string(), "x".to_string())].into();
        assert!(Layer::from_env(&env).is_err());
        let flags = Layer {
            level: Some(1.5),
            ..Layer::default()
        };
        assert!(resolve(flags, Layer::default(), Layer::default()).is_err());
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(CONFIG_FILE), "colour = 1\n").unwrap();
        assert!(Layer::from_file(dir.path()).is_err());
    }
}
