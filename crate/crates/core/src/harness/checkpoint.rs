//! Binary checkpoints: magic `A2S1`, a length-prefixed JSON metadata block,
//! then named little-endian f64 tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attrnet::PredictorParams;
use crate::error::{Error, Result};
use crate::seqcore::{LstmDims, LstmParams, TrainingLog};
use crate::tasks::{InputMode, TaskKind, TrainedModel};
use crate::tensor::{Parameters, Tensor};
use crate::vocab::WordDict;

pub const MAGIC: &[u8; 4] = b"A2S1";
pub const FORMAT_VERSION: u32 = 1;

/// Raw checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.metadata)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, len32(meta.len())?);
        out.extend_from_slice(&meta);
        put_u32(&mut out, len32(self.tensors.len())?);
        for (name, t) in &self.tensors {
            put_u32(&mut out, len32(name.len())?);
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, len32(t.shape().len())?);
            for &d in t.shape() {
                put_u32(&mut out, len32(d)?);
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(corrupt("bad magic bytes; not an A2S1 checkpoint"));
        }
        let meta_len = r.u32()? as usize;
        let metadata: serde_json::Value = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| corrupt(format!("unreadable metadata block: {e}")))?;
        let n = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| corrupt("tensor name is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let count = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| corrupt("tensor shape overflows"))?;
            let raw = r.take(count.checked_mul(8).ok_or_else(|| corrupt("tensor too large"))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push((name, Tensor::from_vec(&shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { metadata, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    fn take_tensors(self, names: &[&str]) -> Result<Vec<Tensor>> {
        let got: Vec<&str> = self.tensors.iter().map(|(n, _)| n.as_str()).collect();
        if got != names {
            return Err(Error::Checkpoint(format!("expected tensors {names:?}, found {got:?}")));
        }
        Ok(self.tensors.into_iter().map(|(_, t)| t).collect())
    }
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(format!("corrupt checkpoint: {}", msg.into()))
}

fn len32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Checkpoint(format!("length {n} exceeds 32 bits")))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.bytes.len())))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelMeta {
    format_version: u32,
    kind: String,
    task: TaskKind,
    mode: InputMode,
    dims: LstmDims,
    word_dict_hash: String,
    words: Vec<String>,
    answers: Vec<String>,
    log: TrainingLog,
}

/// What a caller requires of a model checkpoint before accepting it.
#[derive(Debug, Clone, Default)]
pub struct Expect<'a> {
    pub mode: Option<InputMode>,
    pub task: Option<TaskKind>,
    pub word_dict_hash: Option<&'a str>,
}

fn version_of(meta: &serde_json::Value) -> Result<()> {
    match meta.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => Ok(()),
        Some(v) => Err(Error::Checkpoint(format!(
            "format version {v} is not supported (expected {FORMAT_VERSION})"
        ))),
        None => Err(corrupt("metadata has no format_version")),
    }
}

pub fn model_checkpoint(model: &TrainedModel) -> Result<Checkpoint> {
    let meta = ModelMeta {
        format_version: FORMAT_VERSION,
        kind: "lstm".into(),
        task: model.task,
        mode: model.mode,
        dims: model.params.dims(),
        word_dict_hash: model.dict.hash(),
        words: model.dict.words().to_vec(),
        answers: model.answers.clone(),
        log: model.log.clone(),
    };
    Ok(Checkpoint {
        metadata: serde_json::to_value(meta)?,
        tensors: model
            .params
            .named()
            .into_iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect(),
    })
}

pub fn model_from_checkpoint(ck: Checkpoint, expect: &Expect) -> Result<TrainedModel> {
    version_of(&ck.metadata)?;
    let meta: ModelMeta =
        serde_json::from_value(ck.metadata.clone()).map_err(|e| corrupt(format!("model metadata: {e}")))?;
    if meta.kind != "lstm" {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a `{}`, not a language model",
            meta.kind
        )));
    }
    let dict = WordDict::from_tokens(meta.words)?;
    if dict.hash() != meta.word_dict_hash {
        return Err(corrupt("word list does not match its recorded hash"));
    }
    if let Some(h) = expect.word_dict_hash {
        if h != meta.word_dict_hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash mismatch: checkpoint has {}, expected {h}",
                meta.word_dict_hash
            )));
        }
    }
    if let Some(m) = expect.mode {
        if m != meta.mode {
            return Err(Error::Checkpoint(format!(
                "mode mismatch: checkpoint was trained as {}, requested {}",
                meta.mode.as_str(),
                m.as_str()
            )));
        }
    }
    if let Some(t) = expect.task {
        if t != meta.task {
            return Err(Error::Checkpoint(format!(
                "task mismatch: checkpoint is {}, requested {}",
                meta.task.as_str(),
                t.as_str()
            )));
        }
    }
    let names: Vec<&str> = LstmParams::zeros(meta.dims)
        .named()
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    let params = LstmParams::from_tensors(ck.take_tensors(&names)?)?;
    if params.dims() != meta.dims {
        return Err(corrupt("tensor shapes disagree with recorded dimensions"));
    }
    Ok(TrainedModel {
        params,
        mode: meta.mode,
        task: meta.task,
        dict,
        answers: meta.answers,
        log: meta.log,
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    model_checkpoint(model)?.save(path)
}

pub fn load_checkpoint(path: &Path, expect: &Expect) -> Result<TrainedModel> {
    model_from_checkpoint(Checkpoint::load(path)?, expect)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictorMeta {
    format_version: u32,
    kind: String,
    attributes: Vec<String>,
    losses: Vec<f64>,
}

pub fn save_predictor(params: &PredictorParams, attributes: &[String], losses: &[f64], path: &Path) -> Result<()> {
    let meta = PredictorMeta {
        format_version: FORMAT_VERSION,
        kind: "attribute_predictor".into(),
        attributes: attributes.to_vec(),
        losses: losses.to_vec(),
    };
    Checkpoint {
        metadata: serde_json::to_value(meta)?,
        tensors: params
            .named()
            .into_iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect(),
    }
    .save(path)
}

/// The predictor and the attribute words its outputs stand for.
pub fn load_predictor(path: &Path) -> Result<(PredictorParams, Vec<String>)> {
    let ck = Checkpoint::load(path)?;
    version_of(&ck.metadata)?;
    let meta: PredictorMeta =
        serde_json::from_value(ck.metadata.clone()).map_err(|e| corrupt(format!("predictor metadata: {e}")))?;
    if meta.kind != "attribute_predictor" {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a `{}`, not a predictor",
            meta.kind
        )));
    }
    let mut t = ck.take_tensors(&["w1", "b1", "w2", "b2"])?.into_iter();
    let mut next = || t.next().expect("four tensors");
    let params = PredictorParams::from_tensors(next(), next(), next(), next())?;
    if params.outputs() != meta.attributes.len() {
        return Err(corrupt("predictor outputs disagree with its attribute list"));
    }
    Ok((params, meta.attributes))
}
