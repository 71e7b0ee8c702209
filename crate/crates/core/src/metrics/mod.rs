//! Evaluation: corpus BLEU, perplexity, exact-match accuracy and WUPS.

mod bleu;
mod wup;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bleu::{bleu, MAX_ORDER};
pub use wup::{wup_similarity, wups, TaxonomyTree};

/// Fraction of predictions that match their gold answer token-for-token.
pub fn accuracy<S: PartialEq>(predictions: &[S], gold: &[S]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} gold answers",
            predictions.len(),
            gold.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::domain("accuracy over an empty set"));
    }
    let hits = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// `2^(bits per word)` from a total natural-log NLL over `words` predicted
/// tokens (END included). A non-finite total yields `f64::INFINITY`.
pub fn perplexity_from_nll(total_nll: f64, words: usize) -> Result<f64> {
    if words == 0 {
        return Err(Error::domain("perplexity over zero words"));
    }
    if !total_nll.is_finite() {
        log::warn!("a word received zero probability; perplexity is infinite");
        return Ok(f64::INFINITY);
    }
    let bits = total_nll / std::f64::consts::LN_2 / words as f64;
    Ok(2f64.powf(bits))
}

pub const BLEU_KEYS: [&str; 4] = ["BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4"];
pub const PPL: &str = "PPL";
pub const ACCURACY: &str = "accuracy";
pub const WUPS_09: &str = "WUPS@0.9";
pub const WUPS_00: &str = "WUPS@0.0";

/// Named scores for one evaluated model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scores: BTreeMap<String, f64>,
    pub examples: usize,
}

impl MetricReport {
    pub fn set(&mut self, key: &str, v: f64) {
        self.scores.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.scores.get(key).copied()
    }
}
