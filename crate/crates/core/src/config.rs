//! JSON run configuration shared by the command-line commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{CsvSchema, WindowSpec};
use crate::distances::DistanceKind;
use crate::error::{Error, Result};
use crate::tdc::{DEFAULT_K_CANDIDATES, DEFAULT_UNITS};
use crate::tdm::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default = "default_time_col")]
    pub time_col: String,
    pub target_col: String,
    pub features: Vec<String>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "one")]
    pub horizon: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "default_ratios")]
    pub ratios: [f64; 3],
    /// Min-max the regression target too. Class labels are never scaled.
    #[serde(default = "yes")]
    pub normalize_target: bool,
}

/// Number of periods: a fixed value or `"auto"` (objective argmax).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

impl Serialize for KChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Auto => s.serialize_str("auto"),
            KChoice::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(k) => Ok(KChoice::Fixed(k)),
            Raw::S(s) if s == "auto" => Ok(KChoice::Auto),
            Raw::S(s) => s.parse().map(KChoice::Fixed).map_err(|_| {
                serde::de::Error::custom(format!("k must be an integer or \"auto\", got `{s}`"))
            }),
        }
    }
}

impl std::str::FromStr for KChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(KChoice::Auto);
        }
        s.parse().map(KChoice::Fixed).map_err(|_| format!("expected an integer or `auto`, got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdcSection {
    /// `false` trains on one period without matching.
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "DistanceKind::mmd")]
    pub distance: DistanceKind,
    #[serde(default = "auto")]
    pub k: KChoice,
    #[serde(default = "default_candidates")]
    pub k_candidates: Vec<usize>,
    #[serde(default = "default_units")]
    pub units: usize,
}

impl Default for TdcSection {
    fn default() -> Self {
        TdcSection {
            enabled: true,
            distance: DistanceKind::mmd(),
            k: KChoice::Auto,
            k_candidates: default_candidates(),
            units: DEFAULT_UNITS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "regression")]
    pub task: TaskKind,
    /// Class count; inferred from the training labels when absent.
    #[serde(default)]
    pub classes: Option<usize>,
    /// Starting point for the fields below (`activity`, `air`, `power`, `finance`).
    #[serde(default)]
    pub preset: Option<String>,
    pub hidden: Option<usize>,
    pub layers: Option<usize>,
    pub lambda: Option<f64>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub pretrain_epochs: Option<usize>,
    pub seed: Option<u64>,
    pub match_all_layers: Option<bool>,
    pub share_alpha: Option<bool>,
    /// Keep the main epoch with the lowest validation loss.
    #[serde(default)]
    pub select_by_valid: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            task: TaskKind::Regression,
            classes: None,
            preset: None,
            hidden: None,
            layers: None,
            lambda: None,
            lr: None,
            batch: None,
            epochs: None,
            pretrain_epochs: None,
            seed: None,
            match_all_layers: None,
            share_alpha: None,
            select_by_valid: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutSection {
    pub model: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub split: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub tdc: TdcSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub out: OutSection,
}

fn default_time_col() -> String {
    "t".into()
}
fn default_window() -> usize {
    24
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn auto() -> KChoice {
    KChoice::Auto
}
fn regression() -> TaskKind {
    TaskKind::Regression
}
fn default_ratios() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}
fn default_candidates() -> Vec<usize> {
    DEFAULT_K_CANDIDATES.to_vec()
}
fn default_units() -> usize {
    DEFAULT_UNITS
}

impl RunConfig {
    /// Reads and validates a config file. Relative data paths resolve
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.data.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data.path = dir.join(&cfg.data.path);
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn schema(&self) -> CsvSchema {
        let mut columns = self.data.features.clone();
        if !columns.contains(&self.data.target_col) {
            columns.push(self.data.target_col.clone());
        }
        CsvSchema {
            time_col: self.data.time_col.clone(),
            columns,
        }
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            features: self.data.features.clone(),
            target: self.data.target_col.clone(),
            window: self.data.window,
            horizon: self.data.horizon,
            stride: self.data.stride,
        }
    }

    /// Whether `prepare` should scale the target column.
    pub fn scale_target(&self) -> bool {
        self.data.normalize_target && self.train.task == TaskKind::Regression
    }

    /// The effective training configuration (preset, then explicit fields).
    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let mut c = match &t.preset {
            Some(name) => TrainConfig::preset(name)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {$(
                if let Some(v) = t.$field {
                    c.$target = v;
                }
            )*};
        }
        set!(hidden => hidden, layers => layers, lambda => lambda, lr => lr, batch => batch_size,
             epochs => epochs, pretrain_epochs => pretrain_epochs, seed => seed,
             match_all_layers => match_all_layers, share_alpha => share_alpha);
        c.distance = self.tdc.distance.clone();
        c.k_candidates = match self.tdc.k {
            KChoice::Auto => self.tdc.k_candidates.clone(),
            KChoice::Fixed(k) => vec![k],
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.features.is_empty() {
            return Err(Error::Config("data.features is empty".into()));
        }
        if d.window == 0 || d.horizon == 0 || d.stride == 0 {
            return Err(Error::Config("window, horizon and stride must be >= 1".into()));
        }
        if self.train.task == TaskKind::Classification && d.horizon != 1 {
            return Err(Error::Config("classification needs horizon 1".into()));
        }
        if self.train.classes == Some(0) || self.train.classes == Some(1) {
            return Err(Error::Config("classification needs at least 2 classes".into()));
        }
        if self.tdc.units == 0 {
            return Err(Error::Config("tdc.units must be >= 1".into()));
        }
        if self.tdc.enabled {
            let ks = match self.tdc.k {
                KChoice::Auto => self.tdc.k_candidates.clone(),
                KChoice::Fixed(k) => vec![k],
            };
            if ks.is_empty() {
                return Err(Error::Config("empty K candidate set".into()));
            }
            if let Some(&k) = ks.iter().find(|&&k| k < 2 || k > self.tdc.units) {
                return Err(Error::Config(format!("K = {k} outside 2..={}", self.tdc.units)));
            }
        }
        crate::dataio::split_sizes(1000, d.ratios).map(|_| ())?;
        self.train_config().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"data": {"path": "d.csv", "target_col": "y", "features": ["x0", "x1"]}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.tdc.k, KChoice::Auto);
        assert_eq!(c.tdc.units, 10);
        assert_eq!(c.data.ratios, [0.6, 0.2, 0.2]);
        c.validate().unwrap();
        assert_eq!(c.train_config().unwrap(), TrainConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.tdc.k = KChoice::Fixed(3);
        c.train.lambda = Some(0.0);
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn k_accepts_int_and_auto() {
        let c = RunConfig::from_json(
            r#"{"data": {"path": "d", "target_col": "y", "features": ["a"]}, "tdc": {"k": 3, "distance": "coral"}}"#,
        )
        .unwrap();
        assert_eq!(c.tdc.k, KChoice::Fixed(3));
        assert_eq!(c.tdc.distance, DistanceKind::Coral);
        assert_eq!(c.train_config().unwrap().k_candidates, vec![3]);
        assert!(RunConfig::from_json(r#"{"data": {"path": "d", "target_col": "y", "features": ["a"]}, "tdc": {"k": "many"}}"#).is_err());
    }

    #[test]
    fn preset_then_overrides() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.train.preset = Some("air".into());
        c.train.lr = Some(1e-3);
        let t = c.train_config().unwrap();
        assert_eq!((t.hidden, t.lambda, t.lr, t.batch_size), (64, 0.5, 1e-3, 36));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for bad in [
            r#"{"data": {"path": "d", "target_col": "y", "features": []}}"#,
            r#"{"data": {"path": "d", "target_col": "y", "features": ["a"]}, "tdc": {"k": 99}}"#,
            r#"{"data": {"path": "d", "target_col": "y", "features": ["a"]}, "train": {"lambda": -1}}"#,
            r#"{"data": {"path": "d", "target_col": "y", "features": ["a"], "ratios": [0.5, 0.5, 0.5]}}"#,
            r#"{"data": {"path": "d", "target_col": "y", "features": ["a"]}, "tdc": {"distance": "euclid"}}"#,
            r#"{"data": {"path": "d", "target_col": "y", "features": ["a"]}, "extra": 1}"#,
        ] {
            let r = RunConfig::from_json(bad).and_then(|c| c.validate());
            assert!(matches!(r, Err(Error::Config(_))), "{bad}: {r:?}");
        }
    }

    #[test]
    fn schema_includes_target_once() {
        let c = RunConfig::from_json(r#"{"data": {"path": "d", "target_col": "y", "features": ["x", "y"]}}"#).unwrap();
        assert_eq!(c.schema().columns, vec!["x", "y"]);
    }
}
