use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use s2t_core::dataset::{CorpusSpec, SplitConfig, StyleBounds};
use s2t_core::model::ModelConfig;
use s2t_core::training::TrainConfig;
use s2t_core::{Error, Result};

const PRESETS: &[(&str, &str)] = &[
    ("v61", include_str!("../presets/v61.json")),
    ("v62", include_str!("../presets/v62.json")),
    ("v63", include_str!("../presets/v63.json")),
    ("v64", include_str!("../presets/v64.json")),
    ("v65", include_str!("../presets/v65.json")),
    ("v66", include_str!("../presets/v66.json")),
    ("v67", include_str!("../presets/v67.json")),
    ("v68", include_str!("../presets/v68.json")),
    ("v74", include_str!("../presets/v74.json")),
    ("v80", include_str!("../presets/v80.json")),
    ("desk", include_str!("../presets/desk.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_json(name: &str) -> Result<Value> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known: {}", preset_names().collect::<Vec<_>>().join(", "))))?;
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub subjects: usize,
    pub sentences_per_subject: usize,
    /// Size of the generated corpus the sentences are drawn from.
    pub corpus_sentences: usize,
    pub split: SplitConfig,
    pub style: StyleBounds,
    pub timestamps: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            subjects: 40,
            sentences_per_subject: 100,
            corpus_sentences: 3000,
            split: SplitConfig::default(),
            style: StyleBounds::default(),
            timestamps: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VocabChoice {
    /// Letters and space.
    #[default]
    Letters,
    /// Desk glyphs, space and period.
    Desk,
    /// Letters, space and the given punctuation characters.
    Punctuated { punctuation: String },
    /// BPE learned on the mixed en/fr/de corpus, or read from `path`.
    Bpe {
        size: usize,
        #[serde(default)]
        path: Option<PathBuf>,
    },
}

/// Everything a subcommand needs, validated before any work starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub corpus: CorpusSpec,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub vocab: VocabChoice,
    /// 32 or 64.
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default)]
    pub deterministic: bool,
}

fn default_precision() -> u32 {
    32
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.precision != 32 && self.precision != 64 {
            return Err(Error::Config(format!("precision must be 32 or 64, got {}", self.precision)));
        }
        if self.corpus.max_strokes + 2 > self.model.n {
            return Err(Error::Config(format!(
                "corpus.max_strokes = {} does not fit model.n = {} with framing",
                self.corpus.max_strokes, self.model.n
            )));
        }
        if let VocabChoice::Bpe { size, .. } = self.vocab {
            if size != self.model.vocab_size {
                return Err(Error::Config(format!("vocab.size = {size} but model.vocab_size = {}", self.model.vocab_size)));
            }
        }
        Ok(())
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let unknown = || Error::Config(format!("unknown config key {key:?}"));
    let mut parts = key.split('.').peekable();
    let mut node = root;
    while let Some(part) = parts.next() {
        let obj: &mut Map<String, Value> = node.as_object_mut().ok_or_else(unknown)?;
        if parts.peek().is_none() {
            let slot = obj.get_mut(part).ok_or_else(unknown)?;
            *slot = value;
            return Ok(());
        }
        node = obj.get_mut(part).ok_or_else(unknown)?;
    }
    Err(unknown())
}

/// Sources of a run configuration, lowest precedence first.
#[derive(Debug, Default)]
pub struct ConfigSources<'a> {
    pub preset: Option<&'a str>,
    pub file: Option<&'a Path>,
    /// Dotted-key overrides, values given as JSON or bare strings.
    pub overrides: &'a [(String, String)],
    pub seed: Option<u64>,
    pub precision: Option<u32>,
    pub deterministic: bool,
}

pub fn resolve(src: &ConfigSources<'_>) -> Result<RunConfig> {
    let mut value = match src.preset {
        Some(p) => preset_json(p)?,
        None => Value::Object(Map::new()),
    };
    if let Some(path) = src.file {
        let text = std::fs::read_to_string(path)?;
        merge(&mut value, serde_json::from_str(&text)?);
    }
    if src.preset.is_none() && src.file.is_none() {
        return Err(Error::Config("a run needs --preset or --config".into()));
    }
    let parsed: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    // round-trip through the typed form so every defaulted key can be overridden
    let mut full = serde_json::to_value(&parsed)?;
    for (key, raw) in src.overrides {
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        set_path(&mut full, key, v)?;
    }
    let mut config: RunConfig = serde_json::from_value(full).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(seed) = src.seed {
        config.seed = seed;
    }
    if let Some(p) = src.precision {
        config.precision = p;
    }
    config.deterministic |= src.deterministic;
    config.train.seed = config.seed;
    config.train.deterministic = config.deterministic;
    config.validate()?;
    Ok(config)
}
