use std::path::{Path, PathBuf};

use lq_core::agent::TrainConfig;
use lq_core::env::{BanditEnv, Environment, PointMassEnv};
use serde::{Deserialize, Serialize};
use toml::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("unknown config field '{0}'")]
    UnknownField(String),
    #[error("override '{0}' is not of the form key=value")]
    MalformedOverride(String),
    #[error("cannot set '{key}': {reason}")]
    BadValue { key: String, reason: String },
    #[error("{0}")]
    Invalid(#[from] lq_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Bandit,
    PointMass,
}

impl EnvKind {
    pub fn build(self) -> Box<dyn Environment> {
        match self {
            EnvKind::Bandit => Box::new(BanditEnv::new()),
            EnvKind::PointMass => Box::new(PointMassEnv::new()),
        }
    }
}

/// A config file: training settings plus where and how often to run them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvKind,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Bandit,
            seeds: vec![0],
            out: PathBuf::from("runs"),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(ConfigError::BadValue {
                key: "seeds".into(),
                reason: "at least one seed is required".into(),
            });
        }
        Ok(())
    }

    /// Resolves a dotted key to a full path. Keys not found at the top level
    /// are looked up under `train`, so `sampler.temperature` works as well as
    /// `train.sampler.temperature`.
    pub fn resolve_key(&self, key: &str) -> Result<Vec<String>, ConfigError> {
        resolve_in(
            &Value::try_from(self).expect("config is always representable"),
            key,
        )
    }

    /// Sets one field from its textual value (TOML syntax; bare words are
    /// taken as strings) and re-validates the whole config.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        self.set_many(&[(key, raw)])
    }

    /// Applies `key=value` overrides in order, validating once at the end so
    /// that jointly constrained fields can be changed together.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), ConfigError> {
        let pairs = overrides
            .iter()
            .map(|o| split_override(o.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        self.set_many(&pairs)
    }

    /// All-or-nothing: on error the config is left untouched.
    pub fn set_many(&mut self, pairs: &[(&str, &str)]) -> Result<(), ConfigError> {
        let mut doc = Value::try_from(&*self).expect("config is always representable");
        let mut next = self.clone();
        for &(key, raw) in pairs {
            let path = resolve_in(&doc, key)?;
            let slot = lookup_mut(&mut doc, &path).expect("resolved above");
            let mut value = parse_value(raw);
            if let (Value::Float(_), Value::Integer(i)) = (&*slot, &value) {
                value = Value::Float(*i as f64);
            }
            *slot = value;
            next = doc
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::BadValue {
                    key: key.to_owned(),
                    reason: e.message().to_owned(),
                })?;
        }
        next.validate().map_err(|e| ConfigError::BadValue {
            key: pairs.iter().map(|p| p.0).collect::<Vec<_>>().join(", "),
            reason: e.to_string(),
        })?;
        *self = next;
        Ok(())
    }
}

pub fn split_override(text: &str) -> Result<(&str, &str), ConfigError> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(ConfigError::MalformedOverride(text.to_owned())),
    }
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn resolve_in(doc: &Value, key: &str) -> Result<Vec<String>, ConfigError> {
    let direct: Vec<String> = key.split('.').map(str::to_owned).collect();
    if lookup(doc, &direct).is_some() {
        return Ok(direct);
    }
    let nested: Vec<String> = std::iter::once("train".to_owned()).chain(direct).collect();
    if lookup(doc, &nested).is_some() {
        return Ok(nested);
    }
    Err(ConfigError::UnknownField(key.to_owned()))
}

fn lookup<'a>(doc: &'a Value, path: &[String]) -> Option<&'a Value> {
    path.iter().try_fold(doc, |v, k| v.as_table()?.get(k))
}

fn lookup_mut<'a>(doc: &'a mut Value, path: &[String]) -> Option<&'a mut Value> {
    path.iter()
        .try_fold(doc, |v, k| v.as_table_mut()?.get_mut(k))
}
