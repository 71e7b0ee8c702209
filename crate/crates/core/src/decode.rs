//! Beam-search generation from a primed LSTM state.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::seqcore::{log_softmax, lstm_step, LstmParams, LstmState, StepInput};
use crate::vocab::END;

pub const DEFAULT_BEAM: usize = 5;
pub const DEFAULT_MAX_LEN: usize = 20;

/// A generated sentence. `tokens` excludes END; `finished` tells whether
/// END was emitted or the hypothesis was cut at the length limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

#[derive(Debug, Clone)]
struct Entry {
    tokens: Vec<usize>,
    log_prob: f64,
    finished: bool,
    state: LstmState,
    /// Log-probabilities of the next word given this prefix.
    next: Vec<f64>,
}

/// Beam search from the state reached after consuming `prefix` (for a
/// captioner `[Vector, Token(START)]`). Every live hypothesis is extended by
/// every non-banned word; finished and live hypotheses compete for the same
/// `b` slots by unnormalised log-probability, ties broken by word id and
/// then by parent rank. Returns up to `b` hypotheses, best first.
pub fn beam_search(
    params: &LstmParams,
    vector: &[f64],
    prefix: &[StepInput],
    b: usize,
    max_len: usize,
    banned: &[usize],
) -> Result<Vec<Hypothesis>> {
    if b == 0 || max_len == 0 {
        return Err(Error::domain("beam width and max length must be positive"));
    }
    if prefix.is_empty() {
        return Err(Error::domain("beam search needs a priming prefix"));
    }
    let state = params.run(vector, prefix)?;
    let next = log_softmax(&params.logits(&state.h));
    let mut beam = vec![Entry {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: false,
        state,
        next,
    }];
    for _ in 0..max_len {
        if beam.iter().all(|e| e.finished) {
            break;
        }
        // (score, word, parent rank, parent)
        let mut cands: Vec<(f64, usize, usize, &Entry)> = Vec::new();
        for (rank, e) in beam.iter().enumerate() {
            if e.finished {
                cands.push((e.log_prob, END, rank, e));
                continue;
            }
            for (w, &lp) in e.next.iter().enumerate() {
                if banned.contains(&w) {
                    continue;
                }
                cands.push((e.log_prob + lp, w, rank, e));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cands.truncate(b);
        let mut next_beam = Vec::with_capacity(cands.len());
        for (score, w, _, parent) in cands {
            if parent.finished {
                next_beam.push(parent.clone());
            } else if w == END {
                next_beam.push(Entry {
                    tokens: parent.tokens.clone(),
                    log_prob: score,
                    finished: true,
                    state: parent.state.clone(),
                    next: Vec::new(),
                });
            } else {
                let x = params.embed(StepInput::Token(w), vector)?;
                let (state, _) = lstm_step(params, &parent.state, &x)?;
                let next = log_softmax(&params.logits(&state.h));
                let mut tokens = parent.tokens.clone();
                tokens.push(w);
                next_beam.push(Entry {
                    tokens,
                    log_prob: score,
                    finished: false,
                    state,
                    next,
                });
            }
        }
        beam = next_beam;
    }
    let mut out: Vec<Hypothesis> = beam
        .into_iter()
        .map(|e| Hypothesis {
            tokens: e.tokens,
            log_prob: e.log_prob,
            finished: e.finished,
        })
        .collect();
    out.sort_by(|a, b| b.log_prob.partial_cmp(&a.log_prob).unwrap_or(Ordering::Equal));
    Ok(out)
}

/// Greedy argmax decoding with the smallest id winning ties.
pub fn greedy(
    params: &LstmParams,
    vector: &[f64],
    prefix: &[StepInput],
    max_len: usize,
    banned: &[usize],
) -> Result<Hypothesis> {
    let mut state = params.run(vector, prefix)?;
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    for _ in 0..max_len {
        let lp = log_softmax(&params.logits(&state.h));
        let (w, best) = lp.iter().enumerate().filter(|(w, _)| !banned.contains(w)).fold(
            (usize::MAX, f64::NEG_INFINITY),
            |acc, (w, &v)| {
                if v > acc.1 {
                    (w, v)
                } else {
                    acc
                }
            },
        );
        log_prob += best;
        if w == END {
            return Ok(Hypothesis {
                tokens,
                log_prob,
                finished: true,
            });
        }
        tokens.push(w);
        let x = params.embed(StepInput::Token(w), vector)?;
        state = lstm_step(params, &state, &x)?.0;
    }
    Ok(Hypothesis {
        tokens,
        log_prob,
        finished: false,
    })
}
