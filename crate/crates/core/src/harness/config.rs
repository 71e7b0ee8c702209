use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attrnet::PredictorConfig;
use crate::decode::{DEFAULT_BEAM, DEFAULT_MAX_LEN};
use crate::error::{Error, Result};
use crate::microworld::{GeneratorConfig, TemplateGrammar};
use crate::seqcore::TrainConfig;
use crate::tasks::{InputMode, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub scenes: usize,
    /// Train, validation and test fractions.
    pub splits: (f64, f64, f64),
    pub generator: GeneratorConfig,
    pub grammar: TemplateGrammar,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            scenes: 2000,
            splits: (0.7, 0.15, 0.15),
            generator: GeneratorConfig::default(),
            grammar: TemplateGrammar::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabConfig {
    /// Number of attributes.
    pub c: usize,
    pub min_count: usize,
    /// Merge-map file; the grammar's own plural and tense table when absent.
    pub merge_map: Option<PathBuf>,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            c: 24,
            min_count: 2,
            merge_map: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpandConfig {
    /// Relation-graph file; the shipped micro-world graph when absent.
    pub lexicon_graph: Option<PathBuf>,
    /// Embedding file; the shipped micro-world embeddings when absent.
    pub embeddings: Option<PathBuf>,
    pub min_questions: usize,
    pub clamp: bool,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        ExpandConfig {
            lexicon_graph: None,
            embeddings: None,
            min_questions: 5,
            clamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub beam: usize,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam: DEFAULT_BEAM,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

fn qa_single_default() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.0005,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub corpus: CorpusConfig,
    pub vocab: VocabConfig,
    pub predictor: PredictorConfig,
    pub expand: ExpandConfig,
    pub caption: TrainConfig,
    pub qa_single: TrainConfig,
    pub qa_seq: TrainConfig,
    pub decode: DecodeConfig,
    pub tasks: Vec<TaskKind>,
    pub modes: Vec<InputMode>,
    /// Metric columns of the aggregate table; every computed metric when empty.
    pub metrics: Vec<String>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            corpus: CorpusConfig::default(),
            vocab: VocabConfig::default(),
            predictor: PredictorConfig::default(),
            expand: ExpandConfig::default(),
            caption: TrainConfig::default(),
            qa_single: qa_single_default(),
            qa_seq: TrainConfig::default(),
            decode: DecodeConfig::default(),
            tasks: vec![TaskKind::Caption, TaskKind::QaSingle, TaskKind::QaSeq],
            modes: vec![InputMode::AttGt, InputMode::AttCnn, InputMode::RawFeature],
            metrics: Vec::new(),
            seeds: vec![1, 2, 3],
            out_dir: PathBuf::from("runs/experiment"),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML document. Relative file paths resolve against `base`.
    pub fn from_toml_str(s: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(s)?;
        for p in [
            &mut cfg.vocab.merge_map,
            &mut cfg.expand.lexicon_graph,
            &mut cfg.expand.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.modes.is_empty() || self.tasks.is_empty() {
            return Err(Error::config("at least one mode and one task are required"));
        }
        if self.corpus.scenes < 3 {
            return Err(Error::config("the corpus needs a scene for each split"));
        }
        if self.vocab.c == 0 || self.vocab.min_count == 0 {
            return Err(Error::config("vocab.c and vocab.min_count must be positive"));
        }
        if self.decode.beam == 0 || self.decode.max_len == 0 {
            return Err(Error::config("beam width and max length must be positive"));
        }
        for p in [
            &self.vocab.merge_map,
            &self.expand.lexicon_graph,
            &self.expand.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(Error::config(format!("referenced file {} does not exist", p.display())));
            }
        }
        let known = crate::metrics::BLEU_KEYS
            .iter()
            .copied()
            .chain([
                crate::metrics::PPL,
                crate::metrics::ACCURACY,
                crate::metrics::WUPS_09,
                crate::metrics::WUPS_00,
                super::SYNONYM_ACCURACY,
            ])
            .collect::<Vec<_>>();
        if let Some(m) = self.metrics.iter().find(|m| !known.contains(&m.as_str())) {
            return Err(Error::config(format!("unknown metric `{m}`")));
        }
        self.corpus.generator.validate()?;
        self.predictor.validate()?;
        for t in [&self.caption, &self.qa_single, &self.qa_seq] {
            t.validate()?;
        }
        Ok(())
    }
}
