//! Experiment configuration and its flat `key = value` file format.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored; keys are case-sensitive and unknown keys are errors.
//!
//! | key | value |
//! |-----|-------|
//! | `data_path` | path to the WDBC file |
//! | `seed` | first seed (u64) |
//! | `seeds` | number of consecutive seeds to average over |
//! | `smote.target_per_class`, `smote.k` | SMOTE target and neighbour count |
//! | `contamination` | outlier fraction in (0, 1) |
//! | `forest.trees`, `forest.subsample` | isolation forest size |
//! | `pca_threshold` | explained-variance threshold in (0, 1] |
//! | `top_k` | features kept by the Top/Least modes |
//! | `feature_mode` | `full`, `top5` or `least5` |
//! | `tuning` | `normal` or `hpt` |
//! | `matrix` | `true` runs every mode x tuning cell |
//! | `rounds` | federation rounds (>= 1) |
//! | `transport` | `inprocess` or `tcp:HOST:PORT` |
//! | `leakage_safe` | `true` partitions before preprocessing |
//! | `dissemination` | `evaluate` or `adopt` |
//! | `gbdt.n_trees`, `gbdt.learning_rate`, `gbdt.max_depth`, `gbdt.min_samples_leaf`, `gbdt.l2_leaf_reg` | untuned parameters |
//! | `folds` | CV folds for tuning |

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use privfed_core::gbdt::{default_grid, GbdtParams};
use thiserror::Error;

use crate::node::Dissemination;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid value for {key}: {value}")]
    BadValue { key: String, value: String },
    #[error("unknown key {0}")]
    UnknownKey(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureMode {
    Full,
    Top5,
    Least5,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Full, FeatureMode::Top5, FeatureMode::Least5];
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Full => "Full",
            FeatureMode::Top5 => "Top5",
            FeatureMode::Least5 => "Least5",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(FeatureMode::Full),
            "top5" | "top" => Ok(FeatureMode::Top5),
            "least5" | "least" => Ok(FeatureMode::Least5),
            _ => Err(format!("unknown feature mode {s}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tuning {
    Normal,
    Hpt,
}

impl Tuning {
    pub const ALL: [Tuning; 2] = [Tuning::Normal, Tuning::Hpt];
}

impl fmt::Display for Tuning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tuning::Normal => "Normal",
            Tuning::Hpt => "HPT",
        })
    }
}

impl FromStr for Tuning {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Tuning::Normal),
            "hpt" => Ok(Tuning::Hpt),
            _ => Err(format!("unknown tuning {s}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    Tcp { host: String, port: u16 },
}

impl FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("inprocess") {
            return Ok(TransportKind::InProcess);
        }
        let rest = s.strip_prefix("tcp:").ok_or_else(|| format!("unknown transport {s}"))?;
        let (host, port) = rest.rsplit_once(':').ok_or_else(|| format!("expected tcp:HOST:PORT, got {s}"))?;
        let port = port.parse().map_err(|_| format!("bad port in {s}"))?;
        Ok(TransportKind::Tcp { host: host.to_string(), port })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data_path: PathBuf,
    pub seed: u64,
    pub seed_count: usize,
    pub smote_target: usize,
    pub smote_k: usize,
    pub contamination: f64,
    pub forest_trees: usize,
    pub forest_subsample: usize,
    pub pca_threshold: f64,
    pub top_k: usize,
    pub feature_mode: FeatureMode,
    pub tuning: Tuning,
    pub matrix: bool,
    pub rounds: u32,
    pub transport: TransportKind,
    pub leakage_safe: bool,
    pub dissemination: Dissemination,
    pub params: GbdtParams,
    pub grid: Vec<GbdtParams>,
    pub folds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_path: PathBuf::from("data/wdbc.data"),
            seed: 0,
            seed_count: 5,
            smote_target: 20_000,
            smote_k: 5,
            contamination: 0.10,
            forest_trees: 100,
            forest_subsample: 256,
            pca_threshold: 0.95,
            top_k: 5,
            feature_mode: FeatureMode::Full,
            tuning: Tuning::Normal,
            matrix: false,
            rounds: 1,
            transport: TransportKind::InProcess,
            leakage_safe: false,
            dissemination: Dissemination::EvaluateOnly,
            params: GbdtParams::default(),
            grid: default_grid(),
            folds: 3,
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.seed_count as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    /// `(mode, tuning)` cells to run, in report order.
    pub fn cells(&self) -> Vec<(FeatureMode, Tuning)> {
        if self.matrix {
            Tuning::ALL.iter().flat_map(|&t| FeatureMode::ALL.iter().map(move |&m| (m, t))).collect()
        } else {
            vec![(self.feature_mode, self.tuning)]
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parsed<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue { key: key.to_string(), value: value.to_string() })
        }
        let bad = || ConfigError::BadValue { key: key.to_string(), value: value.to_string() };
        match key {
            "data_path" => self.data_path = PathBuf::from(value),
            "seed" => self.seed = parsed(key, value)?,
            "seeds" => self.seed_count = parsed(key, value)?,
            "smote.target_per_class" => self.smote_target = parsed(key, value)?,
            "smote.k" => self.smote_k = parsed(key, value)?,
            "contamination" => self.contamination = parsed(key, value)?,
            "forest.trees" => self.forest_trees = parsed(key, value)?,
            "forest.subsample" => self.forest_subsample = parsed(key, value)?,
            "pca_threshold" => self.pca_threshold = parsed(key, value)?,
            "top_k" => self.top_k = parsed(key, value)?,
            "feature_mode" => self.feature_mode = value.parse().map_err(|_| bad())?,
            "tuning" => self.tuning = value.parse().map_err(|_| bad())?,
            "matrix" => self.matrix = parse_bool(value).ok_or_else(bad)?,
            "rounds" => self.rounds = parsed(key, value)?,
            "transport" => self.transport = value.parse().map_err(|_| bad())?,
            "leakage_safe" => self.leakage_safe = parse_bool(value).ok_or_else(bad)?,
            "dissemination" => {
                self.dissemination = match value.to_ascii_lowercase().as_str() {
                    "evaluate" | "evaluate_only" => Dissemination::EvaluateOnly,
                    "adopt" => Dissemination::Adopt,
                    _ => return Err(bad()),
                }
            }
            "gbdt.n_trees" => self.params.n_trees = parsed(key, value)?,
            "gbdt.learning_rate" => self.params.learning_rate = parsed(key, value)?,
            "gbdt.max_depth" => self.params.max_depth = parsed(key, value)?,
            "gbdt.min_samples_leaf" => self.params.min_samples_leaf = parsed(key, value)?,
            "gbdt.l2_leaf_reg" => self.params.l2_leaf_reg = parsed(key, value)?,
            "folds" => self.folds = parsed(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a config file's assignments on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: "expected key = value".into() })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.rounds == 0 {
            return invalid("rounds must be at least 1");
        }
        if self.seed_count == 0 {
            return invalid("seeds must be at least 1");
        }
        if !(self.contamination > 0.0 && self.contamination < 1.0) {
            return invalid("contamination must lie in (0, 1)");
        }
        if !(self.pca_threshold > 0.0 && self.pca_threshold <= 1.0) {
            return invalid("pca_threshold must lie in (0, 1]");
        }
        if self.smote_k == 0 || self.smote_target == 0 {
            return invalid("smote.k and smote.target_per_class must be positive");
        }
        if self.forest_trees == 0 || self.forest_subsample < 2 {
            return invalid("forest needs at least one tree and a subsample of 2");
        }
        if self.top_k == 0 {
            return invalid("top_k must be positive");
        }
        if self.folds < 2 {
            return invalid("folds must be at least 2");
        }
        if self.grid.is_empty() {
            return invalid("tuning grid is empty");
        }
        self.params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for p in &self.grid {
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "# demo\nseed = 42\nfeature_mode = least5 # trailing\ntuning=hpt\n\ntransport = tcp:127.0.0.1:9000\nleakage_safe = true\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.feature_mode, FeatureMode::Least5);
        assert_eq!(cfg.tuning, Tuning::Hpt);
        assert_eq!(cfg.transport, TransportKind::Tcp { host: "127.0.0.1".into(), port: 9000 });
        assert!(cfg.leakage_safe);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.apply_text("nope = 1"), Err(ConfigError::UnknownKey("nope".into())));
        assert!(matches!(cfg.apply_text("seed"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(cfg.apply_text("seed = x"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn zero_rounds_invalid() {
        let cfg = ExperimentConfig { rounds: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn matrix_cells() {
        let cfg = ExperimentConfig { matrix: true, ..Default::default() };
        assert_eq!(cfg.cells().len(), 6);
        assert_eq!(cfg.cells()[0], (FeatureMode::Full, Tuning::Normal));
        assert_eq!(ExperimentConfig::default().cells(), vec![(FeatureMode::Full, Tuning::Normal)]);
    }
}
