//! Pipeline configuration.
//!
//! Settings come from three layers: built-in defaults, an optional config
//! file of `key = value` lines, and explicit overrides (command-line flags).
//! Later layers win. Keys are kebab-case; `#` starts a comment.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::generator::GeneratorConfig;
use crate::trainer::TrainingConfig;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown setting `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub corpus_cache: PathBuf,
    pub vocab_cache: PathBuf,
    pub embeddings: PathBuf,
    pub loss_csv: PathBuf,
    pub vocab_size: usize,
    pub training: TrainingConfig,
    pub generator: GeneratorConfig,
    /// Worker threads for training; 1 is the deterministic path.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_dir: PathBuf::from("corpus"),
            corpus_cache: PathBuf::from("corpus.txt"),
            vocab_cache: PathBuf::from("vocab.txt"),
            embeddings: PathBuf::from("embeddings.txt"),
            loss_csv: PathBuf::from("loss.csv"),
            vocab_size: 500,
            training: TrainingConfig::default(),
            generator: GeneratorConfig::default(),
            threads: 1,
        }
    }
}

/// Every recognised key, in dump order.
pub const KEYS: &[&str] = &[
    "corpus-dir",
    "corpus-cache",
    "vocab-cache",
    "embeddings",
    "loss-csv",
    "vocab-size",
    "dims",
    "window",
    "num-skips",
    "negative-samples",
    "learning-rate",
    "batch-size",
    "steps",
    "checkpoint-every",
    "seed",
    "top-n",
    "exclude-identity",
    "threads",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

/// Split config-file text into `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl PipelineConfig {
    /// Set one field. Underscores in `key` are read as dashes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.replace('_', "-");
        let t = &mut self.training;
        match key.as_str() {
            "corpus-dir" => self.corpus_dir = value.into(),
            "corpus-cache" => self.corpus_cache = value.into(),
            "vocab-cache" => self.vocab_cache = value.into(),
            "embeddings" => self.embeddings = value.into(),
            "loss-csv" => self.loss_csv = value.into(),
            "vocab-size" => self.vocab_size = parse(&key, value)?,
            "dims" => t.dims = parse(&key, value)?,
            "window" => t.window = parse(&key, value)?,
            "num-skips" => t.num_skips = parse(&key, value)?,
            "negative-samples" => t.negative_samples = parse(&key, value)?,
            "learning-rate" => t.learning_rate = parse(&key, value)?,
            "batch-size" => t.batch_size = parse(&key, value)?,
            "steps" => t.steps = parse(&key, value)?,
            "checkpoint-every" => t.checkpoint_every = parse(&key, value)?,
            "seed" => t.seed = parse(&key, value)?,
            "top-n" => self.generator.top_n = parse(&key, value)?,
            "exclude-identity" => self.generator.exclude_identity = parse(&key, value)?,
            "threads" => self.threads = parse(&key, value)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Defaults, then `file_text` if given, then `overrides`; validated.
    pub fn layered<'a, I>(file_text: Option<&str>, overrides: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (&'a str, String)>,
    {
        let mut cfg = PipelineConfig::default();
        if let Some(text) = file_text {
            for (k, v) in parse_config_text(text)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.training;
        Some(match key {
            "corpus-dir" => self.corpus_dir.display().to_string(),
            "corpus-cache" => self.corpus_cache.display().to_string(),
            "vocab-cache" => self.vocab_cache.display().to_string(),
            "embeddings" => self.embeddings.display().to_string(),
            "loss-csv" => self.loss_csv.display().to_string(),
            "vocab-size" => self.vocab_size.to_string(),
            "dims" => t.dims.to_string(),
            "window" => t.window.to_string(),
            "num-skips" => t.num_skips.to_string(),
            "negative-samples" => t.negative_samples.to_string(),
            "learning-rate" => t.learning_rate.to_string(),
            "batch-size" => t.batch_size.to_string(),
            "steps" => t.steps.to_string(),
            "checkpoint-every" => t.checkpoint_every.to_string(),
            "seed" => t.seed.to_string(),
            "top-n" => self.generator.top_n.to_string(),
            "exclude-identity" => self.generator.exclude_identity.to_string(),
            "threads" => self.threads.to_string(),
            _ => return None,
        })
    }

    /// The effective configuration in config-file syntax.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.training
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.vocab_size < 2 {
            return Err(ConfigError::Invalid("vocab-size must be at least 2".into()));
        }
        if self.generator.top_n == 0 {
            return Err(ConfigError::Invalid("top-n must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        let paths = [
            &self.corpus_dir,
            &self.corpus_cache,
            &self.vocab_cache,
            &self.embeddings,
            &self.loss_csv,
        ];
        for (i, a) in paths.iter().enumerate() {
            if paths[i + 1..].contains(a) {
                return Err(ConfigError::Invalid(format!(
                    "path {} is used for two settings",
                    a.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_dump_round_trips() {
        let d = PipelineConfig::default();
        d.validate().unwrap();
        assert_eq!(d.vocab_size, 500);
        assert_eq!(d.training.dims, 256);
        let back = PipelineConfig::layered(Some(&d.dump()), []).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn file_syntax() {
        let text = "# comment\n\nvocab-size = 100  # inline\nlearning_rate=0.05\n";
        let kv = parse_config_text(text).unwrap();
        assert_eq!(kv, vec![("vocab-size".into(), "100".into()), ("learning_rate".into(), "0.05".into())]);
        assert_eq!(parse_config_text("a\n"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(parse_config_text("x = 1\n = 2"), Err(ConfigError::Syntax { line: 2 }));
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = "vocab-size = 100\nseed = 7\n";
        let cfg = PipelineConfig::layered(Some(file), [("seed", "9".to_string())]).unwrap();
        assert_eq!(cfg.vocab_size, 100);
        assert_eq!(cfg.training.seed, 9);
        assert_eq!(cfg.training.dims, 256);
    }

    #[test]
    fn rejections() {
        let mut c = PipelineConfig::default();
        assert!(matches!(c.set("nope", "1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.set("dims", "abc"), Err(ConfigError::BadValue { .. })));
        for (k, v) in [
            ("window", "3"),
            ("top-n", "0"),
            ("vocab-size", "1"),
            ("embeddings", "vocab.txt"),
            ("negative-samples", "65"),
        ] {
            assert!(
                matches!(PipelineConfig::layered(None, [(k, v.to_string())]), Err(ConfigError::Invalid(_))),
                "{k} = {v}"
            );
        }
    }
}
