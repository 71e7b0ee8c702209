//! Task heads over the shared LSTM core: captioning, single-word question
//! answering, sentence question answering, and the GUESS baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decode::{beam_search, Hypothesis};
use crate::error::{Error, Result};
use crate::metrics::perplexity_from_nll;
use crate::microworld::QuestionType;
use crate::seqcore::{
    softmax, train_sequences, unroll_nll, LstmDims, LstmParams, LstmState, Sequence, StepInput, TrainConfig,
    TrainingLog,
};
use crate::vocab::{WordDict, START, UNK};

/// What the model receives as its step-(-1) input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InputMode {
    /// Attributes predicted from region hypotheses.
    #[serde(rename = "ATT_CNN")]
    AttCnn,
    /// Binary ground-truth attributes.
    #[serde(rename = "ATT_GT")]
    AttGt,
    /// The whole-canvas feature vector.
    #[serde(rename = "RAW_FEATURE")]
    RawFeature,
    /// Predicted attributes expanded over the knowledge vocabulary.
    #[serde(rename = "ATT_KB")]
    AttKb,
}

impl InputMode {
    pub const ALL: [InputMode; 4] = [
        InputMode::AttGt,
        InputMode::AttCnn,
        InputMode::RawFeature,
        InputMode::AttKb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::AttCnn => "ATT_CNN",
            InputMode::AttGt => "ATT_GT",
            InputMode::RawFeature => "RAW_FEATURE",
            InputMode::AttKb => "ATT_KB",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        InputMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown input mode `{s}`")))
    }

    /// Whether the mode needs a trained attribute predictor.
    pub fn needs_predictor(self) -> bool {
        matches!(self, InputMode::AttCnn | InputMode::AttKb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Caption,
    QaSingle,
    QaSeq,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Caption => "caption",
            TaskKind::QaSingle => "qa_single",
            TaskKind::QaSeq => "qa_seq",
        }
    }
}

/// A scene's input vector with its reference captions.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionItem {
    pub scene_id: u64,
    pub vector: Vec<f64>,
    pub captions: Vec<Vec<String>>,
}

/// A question about a scene, with the scene's input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QaItem {
    pub id: u64,
    pub scene_id: u64,
    pub vector: Vec<f64>,
    pub question: Vec<String>,
    pub answer: Vec<String>,
    pub question_type: QuestionType,
    pub synonym: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: LstmParams,
    pub mode: InputMode,
    pub task: TaskKind,
    pub dict: WordDict,
    /// Output words of a single-word QA head, indexed by softmax position.
    pub answers: Vec<String>,
    pub log: TrainingLog,
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.params.dims().input
    }

    fn check(&self, task: TaskKind, vector: &[f64]) -> Result<()> {
        if self.task != task {
            return Err(Error::domain(format!(
                "model is a {} head, not {}",
                self.task.as_str(),
                task.as_str()
            )));
        }
        if vector.len() != self.input_dim() {
            return Err(Error::domain(format!(
                "{} model expects inputs of length {}, got {}",
                self.mode.as_str(),
                self.input_dim(),
                vector.len()
            )));
        }
        Ok(())
    }
}

/// Words that are never generated.
const BANNED: [usize; 2] = [START, UNK];

fn new_params(input: usize, vocab_out: usize, dict: &WordDict, config: &TrainConfig, seed: u64) -> LstmParams {
    LstmParams::new(
        LstmDims {
            input,
            embedding: config.embedding_dim,
            hidden: config.hidden_dim,
            vocab_in: dict.len(),
            vocab_out,
        },
        seed,
    )
}

fn input_len<'a>(mut vectors: impl Iterator<Item = &'a Vec<f64>>) -> Result<usize> {
    let first = vectors.next().ok_or_else(|| Error::domain("empty training set"))?.len();
    if vectors.any(|v| v.len() != first) {
        return Err(Error::domain("input vectors differ in length"));
    }
    Ok(first)
}

fn encoded_captions<'a>(items: &'a [CaptionItem], dict: &WordDict) -> Vec<Sequence<'a>> {
    items
        .iter()
        .flat_map(|it| {
            it.captions
                .iter()
                .map(|c| Sequence::caption(&it.vector, &dict.encode(c)))
        })
        .collect()
}

pub fn train_captioner(
    train: &[CaptionItem],
    val: &[CaptionItem],
    dict: &WordDict,
    mode: InputMode,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let input = input_len(train.iter().chain(val).map(|it| &it.vector))?;
    let params = new_params(input, dict.len(), dict, config, seed);
    let (params, log) = train_sequences(
        params,
        &encoded_captions(train, dict),
        &encoded_captions(val, dict),
        config,
        seed,
    )?;
    Ok(TrainedModel {
        params,
        mode,
        task: TaskKind::Caption,
        dict: dict.clone(),
        answers: Vec::new(),
        log,
    })
}

/// Ranked captions for one input vector.
pub fn decode_caption(model: &TrainedModel, vector: &[f64], beam: usize, max_len: usize) -> Result<Vec<Hypothesis>> {
    model.check(TaskKind::Caption, vector)?;
    beam_search(
        &model.params,
        vector,
        &[StepInput::Vector, StepInput::Token(START)],
        beam,
        max_len,
        &BANNED,
    )
}

/// Base-2 per-word perplexity of the references, END counted as a word.
pub fn perplexity(model: &TrainedModel, items: &[CaptionItem]) -> Result<f64> {
    let mut nll = 0.0;
    let mut words = 0;
    for it in items {
        model.check(TaskKind::Caption, &it.vector)?;
        for c in &it.captions {
            let seq = Sequence::caption(&it.vector, &model.dict.encode(c));
            nll += unroll_nll(&model.params, &seq)?;
            words += c.len() + 1;
        }
    }
    perplexity_from_nll(nll, words)
}

fn answer_vocabulary(items: &[QaItem]) -> Result<Vec<String>> {
    let mut answers: Vec<String> = Vec::new();
    for it in items {
        if it.answer.len() != 1 {
            return Err(Error::domain(format!(
                "question {} has a {}-word answer; single-word QA needs exactly one",
                it.id,
                it.answer.len()
            )));
        }
        answers.push(it.answer[0].clone());
    }
    answers.sort();
    answers.dedup();
    Ok(answers)
}

fn answer_sequences<'a>(items: &'a [QaItem], dict: &WordDict, answers: &[String]) -> Vec<Sequence<'a>> {
    items
        .iter()
        .filter_map(|it| {
            let a = answers.binary_search(&it.answer[0]).ok()?;
            (!it.question.is_empty()).then(|| Sequence::answer_word(&it.vector, &dict.encode(&it.question), a))
        })
        .collect()
}

/// Single-word QA: the answer is read from the softmax at the last question
/// word, over the answers seen in training.
pub fn train_qa_single(
    train: &[QaItem],
    val: &[QaItem],
    dict: &WordDict,
    mode: InputMode,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let answers = answer_vocabulary(train)?;
    answer_vocabulary(val)?;
    let input = input_len(train.iter().chain(val).map(|it| &it.vector))?;
    let params = new_params(input, answers.len(), dict, config, seed);
    let (params, log) = train_sequences(
        params,
        &answer_sequences(train, dict, &answers),
        &answer_sequences(val, dict, &answers),
        config,
        seed,
    )?;
    Ok(TrainedModel {
        params,
        mode,
        task: TaskKind::QaSingle,
        dict: dict.clone(),
        answers,
        log,
    })
}

/// The most probable answer and the full answer distribution.
pub fn answer_qa_single<S: AsRef<str>>(
    model: &TrainedModel,
    vector: &[f64],
    question: &[S],
) -> Result<(String, Vec<f64>)> {
    model.check(TaskKind::QaSingle, vector)?;
    if question.is_empty() {
        return Err(Error::domain("empty question"));
    }
    let mut inputs = vec![StepInput::Vector];
    inputs.extend(model.dict.encode(question).into_iter().map(StepInput::Token));
    let state = model.params.run(vector, &inputs)?;
    let dist = softmax(&model.params.logits(&state.h));
    let best = dist
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
        )
        .0;
    Ok((model.answers[best].clone(), dist))
}

fn qa_seq_sequences<'a>(items: &'a [QaItem], dict: &WordDict) -> Vec<Sequence<'a>> {
    items
        .iter()
        .map(|it| Sequence::question_answer(&it.vector, &dict.encode(&it.question), &dict.encode(&it.answer)))
        .collect()
}

/// Sentence QA: one LSTM encodes the question, then continues as the
/// decoder from the encoder's final state.
pub fn train_qa_seq(
    train: &[QaItem],
    val: &[QaItem],
    dict: &WordDict,
    mode: InputMode,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    if let Some(bad) = train.iter().chain(val).find(|it| it.answer.is_empty()) {
        return Err(Error::domain(format!("question {} has an empty answer", bad.id)));
    }
    let input = input_len(train.iter().chain(val).map(|it| &it.vector))?;
    let params = new_params(input, dict.len(), dict, config, seed);
    let (params, log) = train_sequences(
        params,
        &qa_seq_sequences(train, dict),
        &qa_seq_sequences(val, dict),
        config,
        seed,
    )?;
    Ok(TrainedModel {
        params,
        mode,
        task: TaskKind::QaSeq,
        dict: dict.clone(),
        answers: Vec::new(),
        log,
    })
}

/// Encoder state after reading the question. It never sees the answer.
pub fn encode_question<S: AsRef<str>>(model: &TrainedModel, question: &[S]) -> Result<LstmState> {
    let inputs: Vec<StepInput> = model.dict.encode(question).into_iter().map(StepInput::Token).collect();
    model.params.run(&[], &inputs)
}

pub fn answer_qa_seq<S: AsRef<str>>(
    model: &TrainedModel,
    vector: &[f64],
    question: &[S],
    beam: usize,
    max_len: usize,
) -> Result<Vec<String>> {
    model.check(TaskKind::QaSeq, vector)?;
    let mut prefix: Vec<StepInput> = model.dict.encode(question).into_iter().map(StepInput::Token).collect();
    prefix.push(StepInput::Vector);
    prefix.push(StepInput::Token(START));
    let hyps = beam_search(&model.params, vector, &prefix, beam, max_len, &BANNED)?;
    Ok(model.dict.render(&hyps[0].tokens))
}

/// Per-question-type modal training answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessBaseline {
    pub by_type: BTreeMap<QuestionType, Vec<String>>,
    pub global: Vec<String>,
}

fn mode_of<'a>(answers: impl Iterator<Item = &'a Vec<String>>) -> Option<Vec<String>> {
    let mut counts: BTreeMap<&Vec<String>, usize> = BTreeMap::new();
    for a in answers {
        *counts.entry(a).or_default() += 1;
    }
    // BTreeMap iterates lexicographically, so the first maximum wins ties
    counts
        .into_iter()
        .fold(None, |best: Option<(&Vec<String>, usize)>, (a, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((a, n)),
        })
        .map(|(a, _)| a.clone())
}

pub fn guess_baseline(train: &[QaItem]) -> Result<GuessBaseline> {
    let global =
        mode_of(train.iter().map(|it| &it.answer)).ok_or_else(|| Error::domain("GUESS needs training questions"))?;
    let mut by_type = BTreeMap::new();
    for qt in QuestionType::ALL {
        if let Some(a) = mode_of(train.iter().filter(|it| it.question_type == qt).map(|it| &it.answer)) {
            by_type.insert(qt, a);
        }
    }
    Ok(GuessBaseline { by_type, global })
}

impl GuessBaseline {
    pub fn answer(&self, question_type: QuestionType) -> &[String] {
        self.by_type.get(&question_type).unwrap_or(&self.global)
    }
}

/// One model output, as written to prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scene_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<u64>,
    pub output: Vec<String>,
    pub score: f64,
}
