//! Seeded end-to-end experiments: corpus, vocabularies, attribute predictor,
//! task heads, decoding, scoring and the aggregate ablation table.

mod checkpoint;
mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    load_checkpoint, load_predictor, model_checkpoint, model_from_checkpoint, save_checkpoint, save_predictor,
    Checkpoint, Expect, FORMAT_VERSION, MAGIC,
};
pub use config::{CorpusConfig, DecodeConfig, ExpandConfig, ExperimentConfig, VocabConfig};

use crate::attrnet::{
    cluster_and_select, predict_attributes, propose, train_predictor, PredictorParams, TrainedPredictor,
};
use crate::error::{Error, Result};
use crate::expand::{
    build_similarity, expand_vector, select_candidates, EmbeddingTable, LexiconGraph, SimilarityMatrix,
};
use crate::metrics::{self, bleu, wups, MetricReport, TaxonomyTree};
use crate::microworld::io::{read_corpus, write_corpus, write_jsonl};
use crate::microworld::{
    generate_corpus, make_splits, scene_feature_seed, shipped_embeddings, shipped_lexicon_graph, shipped_taxonomy,
    Corpus, QAExample,
};
use crate::rng::derive_seed;
use crate::tasks::{
    answer_qa_seq, answer_qa_single, decode_caption, guess_baseline, perplexity, train_captioner, train_qa_seq,
    train_qa_single, CaptionItem, InputMode, Prediction, QaItem, TaskKind, TrainedModel,
};
use crate::vocab::{
    build_word_dict, ground_truth_attributes, mine_attributes, read_merge_map, AttributeVocab, WordDict,
};

/// Accuracy restricted to questions that name their object by a synonym.
pub const SYNONYM_ACCURACY: &str = "accuracy@synonym";
/// Row label of the per-question-type modal-answer baseline.
pub const GUESS_ROW: &str = "GUESS";

/// Which scenes belong to which split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

/// Everything shared by the cells of one seed.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub seed: u64,
    pub corpus: Corpus,
    pub splits: Splits,
    pub attributes: AttributeVocab,
    pub dict: WordDict,
    pub predictor: Option<TrainedPredictor>,
    pub similarity: Option<SimilarityMatrix>,
    /// Per-mode input vectors indexed by scene id.
    pub vectors: BTreeMap<InputMode, Vec<Vec<f64>>>,
}

pub fn build_corpus(cfg: &ExperimentConfig, seed: u64) -> Result<(Corpus, Splits)> {
    let c = &cfg.corpus;
    let corpus = generate_corpus(c.scenes, seed, &c.generator, &c.grammar)?;
    let ids: Vec<u64> = corpus.scenes.iter().map(|s| s.id).collect();
    let (train, val, test) = make_splits(&ids, c.splits, seed)?;
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::config("a split came out empty; use more scenes"));
    }
    Ok((corpus, Splits { train, val, test }))
}

fn merge_map(cfg: &ExperimentConfig) -> Result<BTreeMap<String, String>> {
    match &cfg.vocab.merge_map {
        Some(p) => read_merge_map(p),
        None => Ok(cfg.corpus.grammar.merge_map()),
    }
}

fn train_captions(corpus: &Corpus, ids: &[u64]) -> Vec<Vec<String>> {
    ids.iter()
        .flat_map(|&i| corpus.captions[i as usize].captions.iter().cloned())
        .collect()
}

fn questions_of<'a>(corpus: &'a Corpus, ids: &[u64]) -> impl Iterator<Item = &'a QAExample> {
    let set: std::collections::BTreeSet<u64> = ids.iter().copied().collect();
    corpus.qa.iter().filter(move |q| set.contains(&q.scene_id))
}

/// Attribute vocabulary from training captions, and the word dictionary
/// over training captions, questions and answers.
pub fn build_vocabularies(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    splits: &Splits,
) -> Result<(AttributeVocab, WordDict)> {
    let captions = train_captions(corpus, &splits.train);
    let attributes = mine_attributes(&captions, cfg.vocab.c, &merge_map(cfg)?)?;
    let mut text = captions;
    for q in questions_of(corpus, &splits.train) {
        text.push(q.question.clone());
        text.push(q.answer.clone());
    }
    let dict = build_word_dict(&text, cfg.vocab.min_count)?;
    Ok((attributes, dict))
}

fn gt_vectors(corpus: &Corpus, attributes: &AttributeVocab) -> Vec<Vec<f64>> {
    corpus
        .captions
        .iter()
        .map(|c| ground_truth_attributes(&c.captions, attributes))
        .collect()
}

/// Trains the attribute predictor on whole-canvas features of the training
/// scenes against their ground-truth attribute labels.
pub fn train_attribute_predictor(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    splits: &Splits,
    attributes: &AttributeVocab,
    seed: u64,
) -> Result<TrainedPredictor> {
    let gt = gt_vectors(corpus, attributes);
    let features: Vec<Vec<f64>> = splits
        .train
        .iter()
        .map(|&i| corpus.captions[i as usize].feature.clone())
        .collect();
    let labels: Vec<Vec<f64>> = splits.train.iter().map(|&i| gt[i as usize].clone()).collect();
    train_predictor(&features, &labels, &cfg.predictor, seed)
}

/// Max-pooled predictions over clustered region hypotheses for every scene.
pub fn predicted_vectors(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    params: &PredictorParams,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let g = &cfg.corpus.generator;
    let layout = g.feature_layout();
    let p = &cfg.predictor;
    corpus
        .scenes
        .iter()
        .map(|scene| {
            let proposals = propose(scene, &p.proposer, derive_seed(seed, scene.id))?;
            let hyps = cluster_and_select(&proposals, p.clusters, p.per_cluster, scene.canvas)?;
            predict_attributes(
                scene,
                params,
                &hyps,
                &layout,
                g.noise,
                scene_feature_seed(seed, scene.id),
            )
        })
        .collect()
}

fn lexicon_resources(cfg: &ExperimentConfig) -> Result<(LexiconGraph, EmbeddingTable)> {
    let lx = &cfg.corpus.generator.lexicon;
    let graph = match &cfg.expand.lexicon_graph {
        Some(p) => LexiconGraph::load(p)?,
        None => shipped_lexicon_graph(lx),
    };
    let emb = match &cfg.expand.embeddings {
        Some(p) => EmbeddingTable::load(p)?,
        None => shipped_embeddings(lx, &cfg.corpus.grammar)?,
    };
    Ok((graph, emb))
}

/// Similarity between the attribute vocabulary and its knowledge expansion.
pub fn expansion_matrix(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    splits: &Splits,
    attributes: &AttributeVocab,
) -> Result<SimilarityMatrix> {
    let (graph, emb) = lexicon_resources(cfg)?;
    let questions: Vec<Vec<String>> = questions_of(corpus, &splits.train)
        .map(|q| q.question.clone())
        .collect();
    let kb = select_candidates(&graph, attributes.words(), &questions, cfg.expand.min_questions);
    build_similarity(attributes.words(), &kb, &emb, cfg.expand.clamp)
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

pub fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Corpus, vocabularies, predictor and input vectors of one seed, with
/// their artifacts written under `<out>/seed-<seed>/`.
pub fn prepare_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let dir = seed_dir(cfg, seed);
    mkdir(&dir)?;
    let (corpus, splits) = stage("corpus", build_corpus(cfg, seed))?;
    stage("corpus", write_corpus(&dir.join("corpus"), &corpus))?;
    stage("corpus", write_json(&dir.join("splits.json"), &splits))?;
    log::info!(
        "seed {seed}: {} scenes, {} questions",
        corpus.scenes.len(),
        corpus.qa.len()
    );

    let (attributes, dict) = stage("vocab", build_vocabularies(cfg, &corpus, &splits))?;
    stage(
        "vocab",
        attributes.save(&dir.join("attributes.txt"), &dir.join("merge_map.tsv")),
    )?;
    stage("vocab", dict.save(&dir.join("words.txt")))?;

    let mut vectors = BTreeMap::new();
    let needs_cnn = cfg.modes.iter().any(|m| m.needs_predictor());
    let mut predictor = None;
    let mut similarity = None;
    for &mode in &cfg.modes {
        let v = match mode {
            InputMode::AttGt => gt_vectors(&corpus, &attributes),
            InputMode::RawFeature => corpus.captions.iter().map(|c| c.feature.clone()).collect(),
            InputMode::AttCnn | InputMode::AttKb => continue,
        };
        vectors.insert(mode, v);
    }
    if needs_cnn {
        let trained = stage(
            "predictor",
            train_attribute_predictor(cfg, &corpus, &splits, &attributes, seed),
        )?;
        stage(
            "predictor",
            save_predictor(
                &trained.params,
                attributes.words(),
                &trained.losses,
                &dir.join("predictor.ckpt"),
            ),
        )?;
        let cnn = stage("predictor", predicted_vectors(cfg, &corpus, &trained.params, seed))?;
        if cfg.modes.contains(&InputMode::AttKb) {
            let s = stage("expand", expansion_matrix(cfg, &corpus, &splits, &attributes))?;
            let kb = stage(
                "expand",
                cnn.iter().map(|v| expand_vector(v, &s)).collect::<Result<Vec<_>>>(),
            )?;
            stage("expand", crate::vocab::write_lines(&dir.join("kb_vocab.txt"), s.cols()))?;
            vectors.insert(InputMode::AttKb, kb);
            similarity = Some(s);
        }
        if cfg.modes.contains(&InputMode::AttCnn) {
            vectors.insert(InputMode::AttCnn, cnn);
        }
        predictor = Some(trained);
    }
    Ok(SeedData {
        seed,
        corpus,
        splits,
        attributes,
        dict,
        predictor,
        similarity,
        vectors,
    })
}

/// Rebuilds a seed's shared data from the artifacts `prepare_seed` (or the
/// staged CLI commands) wrote, computing vectors for `modes` only.
pub fn load_seed(cfg: &ExperimentConfig, seed: u64, modes: &[InputMode]) -> Result<SeedData> {
    let dir = seed_dir(cfg, seed);
    let corpus = stage("corpus", read_corpus(&dir.join("corpus")))?;
    let splits: Splits = stage("corpus", read_json(&dir.join("splits.json")))?;
    let attributes = stage(
        "vocab",
        AttributeVocab::load(&dir.join("attributes.txt"), &dir.join("merge_map.tsv")),
    )?;
    let dict = stage("vocab", WordDict::load(&dir.join("words.txt")))?;
    let mut vectors = BTreeMap::new();
    let mut similarity = None;
    for &mode in modes {
        let v = match mode {
            InputMode::AttGt => gt_vectors(&corpus, &attributes),
            InputMode::RawFeature => corpus.captions.iter().map(|c| c.feature.clone()).collect(),
            InputMode::AttCnn | InputMode::AttKb => {
                let (params, words) = stage("predictor", load_predictor(&dir.join("predictor.ckpt")))?;
                if words != attributes.words() {
                    return Err(
                        Error::Checkpoint("predictor was trained on another attribute vocabulary".into())
                            .in_stage("predictor"),
                    );
                }
                let cnn = stage("predictor", predicted_vectors(cfg, &corpus, &params, seed))?;
                if mode == InputMode::AttKb {
                    let s = stage("expand", expansion_matrix(cfg, &corpus, &splits, &attributes))?;
                    let kb = stage(
                        "expand",
                        cnn.iter().map(|v| expand_vector(v, &s)).collect::<Result<Vec<_>>>(),
                    )?;
                    similarity = Some(s);
                    kb
                } else {
                    cnn
                }
            }
        };
        vectors.insert(mode, v);
    }
    Ok(SeedData {
        seed,
        corpus,
        splits,
        attributes,
        dict,
        predictor: None,
        similarity,
        vectors,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn seed_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.out_dir.join(format!("seed-{seed}"))
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Scores for one (row, seed, task) cell and the files they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub seed: u64,
    pub row: String,
    pub task: TaskKind,
    pub metrics: MetricReport,
    pub checkpoint: Option<String>,
    pub predictions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub task: TaskKind,
    pub row: String,
    pub seeds: Vec<u64>,
    /// Per-metric median over seeds.
    pub medians: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub cells: Vec<CellReport>,
    pub aggregate: Vec<AggregateRow>,
}

impl ExperimentReport {
    pub fn median(&self, task: TaskKind, row: &str, metric: &str) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|r| r.task == task && r.row == row)
            .and_then(|r| r.medians.get(metric).copied())
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Caption items of the scenes `ids` with their `mode` vectors.
pub fn caption_items(data: &SeedData, mode: InputMode, ids: &[u64]) -> Vec<CaptionItem> {
    let vecs = data.vectors.get(&mode);
    ids.iter()
        .map(|&i| CaptionItem {
            scene_id: i,
            vector: vecs.map(|v| v[i as usize].clone()).unwrap_or_default(),
            captions: data.corpus.captions[i as usize].captions.clone(),
        })
        .collect()
}

/// Single-word (`single`) or sentence questions about the scenes `ids`.
pub fn qa_items(data: &SeedData, mode: InputMode, ids: &[u64], single: bool) -> Vec<QaItem> {
    let vecs = data.vectors.get(&mode);
    questions_of(&data.corpus, ids)
        .filter(|q| q.is_single_word() == single)
        .map(|q| QaItem {
            id: q.id,
            scene_id: q.scene_id,
            vector: vecs.map(|v| v[q.scene_id as usize].clone()).unwrap_or_default(),
            question: q.question.clone(),
            answer: q.answer.clone(),
            question_type: q.question_type,
            synonym: q.synonym,
        })
        .collect()
}

fn qa_scores(preds: &[String], items: &[QaItem], tree: &TaxonomyTree) -> Result<MetricReport> {
    let gold: Vec<String> = items.iter().map(|q| q.answer[0].clone()).collect();
    let mut r = MetricReport {
        examples: items.len(),
        ..Default::default()
    };
    r.set(metrics::ACCURACY, metrics::accuracy(preds, &gold)?);
    r.set(metrics::WUPS_09, wups(preds, &gold, tree, 0.9)?);
    r.set(metrics::WUPS_00, wups(preds, &gold, tree, 0.0)?);
    let syn: Vec<usize> = (0..items.len()).filter(|&i| items[i].synonym).collect();
    if !syn.is_empty() {
        let hits = syn.iter().filter(|&&i| preds[i] == gold[i]).count();
        r.set(SYNONYM_ACCURACY, hits as f64 / syn.len() as f64);
    }
    Ok(r)
}

fn rel(cfg: &ExperimentConfig, p: &Path) -> String {
    p.strip_prefix(&cfg.out_dir).unwrap_or(p).display().to_string()
}

/// Trains one task head on the training split, validating on val.
pub fn train_cell(cfg: &ExperimentConfig, data: &SeedData, mode: InputMode, task: TaskKind) -> Result<TrainedModel> {
    let s = &data.splits;
    let seed = data.seed;
    let d = &data.dict;
    stage(
        "train",
        match task {
            TaskKind::Caption => train_captioner(
                &caption_items(data, mode, &s.train),
                &caption_items(data, mode, &s.val),
                d,
                mode,
                &cfg.caption,
                seed,
            ),
            TaskKind::QaSingle => train_qa_single(
                &qa_items(data, mode, &s.train, true),
                &qa_items(data, mode, &s.val, true),
                d,
                mode,
                &cfg.qa_single,
                seed,
            ),
            TaskKind::QaSeq => train_qa_seq(
                &qa_items(data, mode, &s.train, false),
                &qa_items(data, mode, &s.val, false),
                d,
                mode,
                &cfg.qa_seq,
                seed,
            ),
        },
    )
}

/// Model outputs on the test split.
pub fn predict_cell(cfg: &ExperimentConfig, data: &SeedData, model: &TrainedModel) -> Result<Vec<Prediction>> {
    let dec = &cfg.decode;
    let mode = model.mode;
    let test = &data.splits.test;
    let r = match model.task {
        TaskKind::Caption => caption_items(data, mode, test)
            .iter()
            .map(|it| {
                let best = decode_caption(model, &it.vector, dec.beam, dec.max_len)?.remove(0);
                Ok(Prediction {
                    scene_id: it.scene_id,
                    question_id: None,
                    output: model.dict.render(&best.tokens),
                    score: best.log_prob,
                })
            })
            .collect(),
        TaskKind::QaSingle => qa_items(data, mode, test, true)
            .iter()
            .map(|it| {
                let (a, dist) = answer_qa_single(model, &it.vector, &it.question)?;
                let p = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(Prediction {
                    scene_id: it.scene_id,
                    question_id: Some(it.id),
                    output: vec![a],
                    score: p.ln(),
                })
            })
            .collect(),
        TaskKind::QaSeq => qa_items(data, mode, test, false)
            .iter()
            .map(|it| {
                Ok(Prediction {
                    scene_id: it.scene_id,
                    question_id: Some(it.id),
                    output: answer_qa_seq(model, &it.vector, &it.question, dec.beam, dec.max_len)?,
                    score: 0.0,
                })
            })
            .collect(),
    };
    stage("decode", r)
}

fn sentence_qa_scores(preds: &[Vec<String>], items: &[QaItem]) -> Result<MetricReport> {
    let gold: Vec<Vec<String>> = items.iter().map(|t| t.answer.clone()).collect();
    let mut r = MetricReport {
        examples: items.len(),
        ..Default::default()
    };
    r.set(metrics::ACCURACY, metrics::accuracy(preds, &gold)?);
    let refs: Vec<Vec<Vec<String>>> = gold.iter().map(|g| vec![g.clone()]).collect();
    r.set(metrics::BLEU_KEYS[0], bleu(preds, &refs, 1, 0.0)?);
    let syn: Vec<usize> = (0..items.len()).filter(|&i| items[i].synonym).collect();
    if !syn.is_empty() {
        let hits = syn.iter().filter(|&&i| preds[i] == gold[i]).count();
        r.set(SYNONYM_ACCURACY, hits as f64 / syn.len() as f64);
    }
    Ok(r)
}

/// Scores test-split predictions against gold. Caption perplexity needs
/// the model; without one it is omitted.
pub fn score_cell(
    data: &SeedData,
    task: TaskKind,
    preds: &[Prediction],
    model: Option<&TrainedModel>,
    tree: &TaxonomyTree,
) -> Result<MetricReport> {
    let test = &data.splits.test;
    let outs: Vec<Vec<String>> = preds.iter().map(|p| p.output.clone()).collect();
    let check = |n: usize| {
        if n == preds.len() {
            Ok(())
        } else {
            Err(Error::domain(format!("{} predictions for {n} test items", preds.len())))
        }
    };
    let r = (|| match task {
        TaskKind::Caption => {
            let items = caption_items(data, model.map_or(InputMode::AttGt, |m| m.mode), test);
            check(items.len())?;
            let refs: Vec<Vec<Vec<String>>> = items.iter().map(|t| t.captions.clone()).collect();
            let mut r = MetricReport {
                examples: items.len(),
                ..Default::default()
            };
            for (n, key) in metrics::BLEU_KEYS.iter().enumerate() {
                r.set(key, bleu(&outs, &refs, n + 1, 0.0)?);
            }
            if let Some(m) = model {
                r.set(metrics::PPL, perplexity(m, &items)?);
            }
            Ok(r)
        }
        TaskKind::QaSingle => {
            let items = qa_items(data, InputMode::AttGt, test, true);
            check(items.len())?;
            let words: Vec<String> = outs.iter().map(|o| o.join(" ")).collect();
            qa_scores(&words, &items, tree)
        }
        TaskKind::QaSeq => {
            let items = qa_items(data, InputMode::AttGt, test, false);
            check(items.len())?;
            sentence_qa_scores(&outs, &items)
        }
    })();
    stage("score", r)
}

/// Path of a cell's artifact: `<out>/seed-<s>/<row>/<task>.<ext>`.
pub fn cell_path(cfg: &ExperimentConfig, seed: u64, row: &str, task: TaskKind, ext: &str) -> PathBuf {
    seed_dir(cfg, seed).join(row).join(format!("{}.{ext}", task.as_str()))
}

/// Trains, saves, evaluates and reports one task head.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &SeedData,
    mode: InputMode,
    task: TaskKind,
    tree: &TaxonomyTree,
) -> Result<CellReport> {
    mkdir(&seed_dir(cfg, data.seed).join(mode.as_str()))?;
    let ckpt = cell_path(cfg, data.seed, mode.as_str(), task, "ckpt");
    let pred_path = cell_path(cfg, data.seed, mode.as_str(), task, "predictions.jsonl");
    let model = train_cell(cfg, data, mode, task)?;
    stage("train", save_checkpoint(&model, &ckpt))?;
    let preds = predict_cell(cfg, data, &model)?;
    stage("decode", write_jsonl(&pred_path, &preds))?;
    let metrics = score_cell(data, task, &preds, Some(&model), tree)?;
    let report = CellReport {
        seed: data.seed,
        row: mode.as_str().into(),
        task,
        metrics,
        checkpoint: Some(rel(cfg, &ckpt)),
        predictions: rel(cfg, &pred_path),
    };
    stage(
        "report",
        write_json(&cell_path(cfg, data.seed, mode.as_str(), task, "report.json"), &report),
    )?;
    Ok(report)
}

pub fn guess_cell(cfg: &ExperimentConfig, data: &SeedData, tree: &TaxonomyTree) -> Result<CellReport> {
    let train = qa_items(data, InputMode::AttGt, &data.splits.train, true);
    let test = qa_items(data, InputMode::AttGt, &data.splits.test, true);
    let g = guess_baseline(&train)?;
    let preds: Vec<Prediction> = test
        .iter()
        .map(|it| Prediction {
            scene_id: it.scene_id,
            question_id: Some(it.id),
            output: g.answer(it.question_type).to_vec(),
            score: 0.0,
        })
        .collect();
    let metrics = score_cell(data, TaskKind::QaSingle, &preds, None, tree)?;
    mkdir(&seed_dir(cfg, data.seed).join(GUESS_ROW))?;
    let pred_path = cell_path(cfg, data.seed, GUESS_ROW, TaskKind::QaSingle, "predictions.jsonl");
    write_jsonl(&pred_path, &preds)?;
    let report = CellReport {
        seed: data.seed,
        row: GUESS_ROW.into(),
        task: TaskKind::QaSingle,
        metrics,
        checkpoint: None,
        predictions: rel(cfg, &pred_path),
    };
    write_json(
        &cell_path(cfg, data.seed, GUESS_ROW, TaskKind::QaSingle, "report.json"),
        &report,
    )?;
    Ok(report)
}

pub fn aggregate(cfg: &ExperimentConfig, cells: &[CellReport]) -> Vec<AggregateRow> {
    let mut rows: Vec<AggregateRow> = Vec::new();
    for c in cells {
        let key = |r: &AggregateRow| r.task == c.task && r.row == c.row;
        if rows.iter().any(key) {
            continue;
        }
        let group: Vec<&CellReport> = cells.iter().filter(|d| d.task == c.task && d.row == c.row).collect();
        let mut names: Vec<&String> = group.iter().flat_map(|d| d.metrics.scores.keys()).collect();
        names.sort();
        names.dedup();
        let medians = names
            .into_iter()
            .filter(|n| cfg.metrics.is_empty() || cfg.metrics.contains(n))
            .filter_map(|n| {
                let v: Vec<f64> = group.iter().filter_map(|d| d.metrics.get(n)).collect();
                median(&v).map(|m| (n.clone(), m))
            })
            .collect();
        rows.push(AggregateRow {
            task: c.task,
            row: c.row.clone(),
            seeds: group.iter().map(|d| d.seed).collect(),
            medians,
        });
    }
    rows
}

/// Markdown rendering of the aggregate table, one section per task.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = format!("# {}\n", report.name);
    let mut tasks: Vec<TaskKind> = Vec::new();
    for r in &report.aggregate {
        if !tasks.contains(&r.task) {
            tasks.push(r.task);
        }
    }
    for t in tasks {
        let rows: Vec<&AggregateRow> = report.aggregate.iter().filter(|r| r.task == t).collect();
        let mut cols: Vec<&String> = rows.iter().flat_map(|r| r.medians.keys()).collect();
        cols.sort();
        cols.dedup();
        out.push_str(&format!("\n## {} (median over seeds)\n\n| input |", t.as_str()));
        for c in &cols {
            out.push_str(&format!(" {c} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(cols.len()));
        out.push('\n');
        for r in rows {
            out.push_str(&format!("| {} |", r.row));
            for c in &cols {
                match r.medians.get(*c) {
                    Some(v) => out.push_str(&format!(" {v:.4} |")),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_report(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    write_json(&cfg.out_dir.join("report.json"), report)?;
    let p = cfg.out_dir.join("report.md");
    std::fs::write(&p, render_table(report)).map_err(|e| Error::io(&p, e))
}

/// Runs every (mode, seed) cell of the experiment and writes per-cell
/// reports, `report.json` and `report.md` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    stage("config", cfg.validate())?;
    mkdir(&cfg.out_dir)?;
    stage(
        "config",
        std::fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml_string()?).map_err(|e| Error::io(&cfg.out_dir, e)),
    )?;
    let tree = stage("config", shipped_taxonomy(&cfg.corpus.generator.lexicon))?;
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        let data = prepare_seed(cfg, seed)?;
        for &mode in &cfg.modes {
            for &task in &cfg.tasks {
                log::info!("seed {seed}: training {} on {}", task.as_str(), mode.as_str());
                let cell = run_cell(cfg, &data, mode, task, &tree)?;
                log::info!(
                    "seed {seed} {} {}: {:?}",
                    mode.as_str(),
                    task.as_str(),
                    cell.metrics.scores
                );
                cells.push(cell);
            }
        }
        if cfg.tasks.contains(&TaskKind::QaSingle) {
            cells.push(stage("score", guess_cell(cfg, &data, &tree))?);
        }
    }
    let report = ExperimentReport {
        name: cfg.name.clone(),
        aggregate: aggregate(cfg, &cells),
        cells,
    };
    stage("report", write_report(cfg, &report))?;
    Ok(report)
}
