//! Run configuration: a TOML file of flat `key = value` pairs.
//!
//! Layers, later winning: built-in defaults, the run directory's saved
//! `config.toml`, an explicit config file, then per-field overrides supplied
//! by the caller (command-line flags). Relative paths in a file are taken
//! relative to that file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curation::LoopConfig;
use crate::mapping::ThresholdConfig;

pub const CONFIG_FILE: &str = "config.toml";
pub const RUN_DIR_ENV: &str = "COLLEX_RUN_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("{flag}: path {path} does not exist")]
    MissingPath { flag: &'static str, path: String },
    #[error("{flag} is required")]
    Required { flag: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_dir: PathBuf,
    pub corpus: Option<PathBuf>,
    /// "jsonl" or "tsv"; guessed from the extension when unset.
    pub corpus_format: Option<String>,
    pub inventory: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub lemma_exceptions: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub emoji: Option<PathBuf>,
    pub merge_map: Option<PathBuf>,
    pub extractor_url: Option<String>,
    pub extractor_timeout_secs: u64,
    /// Concurrent requests to the remote extractor.
    pub extractor_max_in_flight: usize,

    pub langs: Vec<String>,
    pub drop_retweets: bool,
    pub drop_url_tweets: bool,

    pub tau_semantic: f64,
    pub tau_lexical: f64,
    pub min_lemma_count: u64,
    pub min_count: u64,
    pub exit_accuracy: f64,
    pub sample_size: usize,
    pub max_rounds: u32,
    pub negatives: usize,
    pub sample_cap: usize,
    pub sweep_steps: usize,
    pub sanity_size: usize,
    pub seed: u64,
    /// Worker threads; 0 means all available cores.
    pub threads: usize,

    pub annotators: Vec<String>,
    pub token: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lp = LoopConfig::default();
        Self {
            run_dir: PathBuf::from("run"),
            corpus: None,
            corpus_format: None,
            inventory: None,
            embeddings: None,
            rules: None,
            lemma_exceptions: None,
            gazetteer: None,
            emoji: None,
            merge_map: None,
            extractor_url: None,
            extractor_timeout_secs: 10,
            extractor_max_in_flight: 8,
            langs: vec!["en".into()],
            drop_retweets: true,
            drop_url_tweets: true,
            tau_semantic: lp.thresholds.tau_semantic,
            tau_lexical: lp.thresholds.tau_lexical,
            min_lemma_count: 10,
            min_count: 500,
            exit_accuracy: lp.exit_accuracy,
            sample_size: lp.sample_size,
            max_rounds: lp.max_rounds,
            negatives: lp.negatives,
            sample_cap: crate::normalize::DEFAULT_SAMPLE_CAP,
            sweep_steps: 20,
            sanity_size: 100,
            seed: 0,
            threads: 0,
            annotators: vec!["annotator-1".into(), "annotator-2".into(), "annotator-3".into()],
            token: None,
        }
    }
}

const PATH_KEYS: &[&str] = &["run_dir", "corpus", "inventory", "embeddings", "rules", "lemma_exceptions", "gazetteer", "emoji", "merge_map"];

/// Reads a config file into a raw table with relative paths anchored at the
/// file's directory.
pub fn read_layer(path: &Path) -> Result<toml::Table, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.message().to_string(),
    })?;
    let base = path.parent().map(absolute).unwrap_or_default();
    for key in PATH_KEYS {
        if let Some(toml::Value::String(s)) = table.get_mut(*key) {
            let p = Path::new(s.as_str());
            if p.is_relative() {
                *s = base.join(p).display().to_string();
            }
        }
    }
    Ok(table)
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

impl RunConfig {
    /// Merges layers over the defaults; keys in later layers win.
    pub fn from_layers(layers: &[(String, toml::Table)]) -> Result<Self, ConfigError> {
        let mut merged = toml::Table::new();
        for (_, layer) in layers {
            for (k, v) in layer {
                merged.insert(k.clone(), v.clone());
            }
        }
        let name = layers.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(" + ");
        let cfg: RunConfig = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
            path: if name.is_empty() { "<defaults>".into() } else { name },
            message: e.message().to_string(),
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_layers(&[(path.display().to_string(), read_layer(path)?)])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |field: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    message: format!("must lie in [0, 1], got {v}"),
                })
            }
        };
        unit("tau_semantic", self.tau_semantic)?;
        unit("tau_lexical", self.tau_lexical)?;
        unit("exit_accuracy", self.exit_accuracy)?;
        let positive = |field: &'static str, v: u64| {
            if v >= 1 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    message: "must be at least 1".into(),
                })
            }
        };
        positive("min_lemma_count", self.min_lemma_count)?;
        positive("sample_size", self.sample_size as u64)?;
        positive("max_rounds", u64::from(self.max_rounds))?;
        positive("sample_cap", self.sample_cap as u64)?;
        positive("sanity_size", self.sanity_size as u64)?;
        positive("extractor_max_in_flight", self.extractor_max_in_flight as u64)?;
        if self.sweep_steps < 2 {
            return Err(ConfigError::Invalid {
                field: "sweep_steps",
                message: "must be at least 2".into(),
            });
        }
        if self.langs.is_empty() {
            return Err(ConfigError::Invalid {
                field: "langs",
                message: "must name at least one language".into(),
            });
        }
        if self.annotators.len() != 3 {
            return Err(ConfigError::Invalid {
                field: "annotators",
                message: format!("exactly 3 annotators required, got {}", self.annotators.len()),
            });
        }
        if let Some(f) = &self.corpus_format {
            f.parse::<crate::corpus::CorpusFormat>().map_err(|message| ConfigError::Invalid { field: "corpus_format", message })?;
        }
        Ok(())
    }

    /// Every configured input path must exist.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let inputs = [
            ("--corpus", &self.corpus),
            ("--inventory", &self.inventory),
            ("--embeddings", &self.embeddings),
            ("--rules", &self.rules),
            ("--lemma-exceptions", &self.lemma_exceptions),
            ("--gazetteer", &self.gazetteer),
            ("--emoji", &self.emoji),
            ("--merge-map", &self.merge_map),
        ];
        for (flag, p) in inputs {
            if p.is_some() {
                require_path(flag, p.as_ref())?;
            }
        }
        Ok(())
    }

    pub fn thresholds(&self) -> ThresholdConfig {
        ThresholdConfig {
            tau_semantic: self.tau_semantic,
            tau_lexical: self.tau_lexical,
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            sample_size: self.sample_size,
            exit_accuracy: self.exit_accuracy,
            max_rounds: self.max_rounds,
            negatives: self.negatives,
            seed: self.seed,
            thresholds: self.thresholds(),
        }
    }

    /// TOML text with every field, paths made absolute.
    pub fn to_toml(&self) -> String {
        let mut c = self.clone();
        c.run_dir = absolute(&c.run_dir);
        for p in [&mut c.corpus, &mut c.inventory, &mut c.embeddings, &mut c.rules, &mut c.lemma_exceptions, &mut c.gazetteer, &mut c.emoji, &mut c.merge_map]
            .into_iter()
            .flatten()
        {
            *p = absolute(p);
        }
        toml::to_string(&c).expect("config serializes")
    }

    pub fn save(&self) -> std::io::Result<()> {
        fs::create_dir_all(&self.run_dir)?;
        fs::write(self.run_dir.join(CONFIG_FILE), self.to_toml())
    }
}

/// Returns the path if it exists, otherwise an error naming `flag`.
pub fn require_path<'a>(flag: &'static str, p: Option<&'a PathBuf>) -> Result<&'a Path, ConfigError> {
    let p = p.ok_or(ConfigError::Required { flag })?;
    if p.exists() {
        Ok(p)
    } else {
        Err(ConfigError::MissingPath {
            flag,
            path: p.display().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.min_count, 500);
        assert_eq!(c.min_lemma_count, 10);
        assert_eq!((c.tau_semantic, c.tau_lexical), (0.8, 0.8));
    }

    #[test]
    fn layers_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.toml");
        fs::write(&p, "seed = 7\ninventory = \"inv.tsv\"\ntau_lexical = 0.9\n").unwrap();
        let q = dir.path().join("b.toml");
        fs::write(&q, "seed = 9\n").unwrap();
        let c = RunConfig::from_layers(&[("a".into(), read_layer(&p).unwrap()), ("b".into(), read_layer(&q).unwrap())]).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.tau_lexical, 0.9);
        assert_eq!(c.inventory.unwrap(), absolute(dir.path()).join("inv.tsv"));
    }

    #[test]
    fn round_trip_and_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            run_dir: dir.path().join("run"),
            seed: 3,
            ..Default::default()
        };
        c.save().unwrap();
        let back = RunConfig::from_file(&dir.path().join("run").join(CONFIG_FILE)).unwrap();
        assert_eq!(back.seed, 3);
        let bad = dir.path().join("bad.toml");
        fs::write(&bad, "sedd = 1\n").unwrap();
        assert!(matches!(RunConfig::from_file(&bad), Err(ConfigError::Parse { .. })));
        let c = RunConfig {
            tau_semantic: 1.5,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field: "tau_semantic", .. })));
    }

    #[test]
    fn missing_path_names_flag() {
        let e = require_path("--inventory", Some(&PathBuf::from("/no/such/file"))).unwrap_err();
        assert!(e.to_string().starts_with("--inventory"));
        assert!(matches!(require_path("--inventory", None), Err(ConfigError::Required { .. })));
        let c = RunConfig {
            inventory: Some(PathBuf::from("/no/such/inv.tsv")),
            ..Default::default()
        };
        assert!(c.check_paths().unwrap_err().to_string().starts_with("--inventory"));
    }
}
