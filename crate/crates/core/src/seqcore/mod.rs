//! LSTM language-model core: cell dynamics, embeddings, softmax output,
//! sequence likelihood, regularised cost with backpropagation through time,
//! and clipped SGD.
//!
//! Every task is expressed as one unrolled [`Sequence`]: each step consumes
//! either the example's input vector (through `W_ea`) or a word (through
//! `W_es`), and optionally predicts a target word.

mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, streams};
use crate::tensor::{Parameters, Tensor};
use crate::vocab::{END, START};

pub use train::{
    caption_cost, clip_and_step, sequence_cost, sgd_update, train_sequences, Gradients, TrainConfig, TrainingLog,
};

/// Gate order inside the stacked weight matrices.
pub const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmDims {
    /// Length of the attached input vector (attributes or raw feature).
    pub input: usize,
    pub embedding: usize,
    pub hidden: usize,
    /// Words that can be consumed.
    pub vocab_in: usize,
    /// Words the softmax ranges over.
    pub vocab_out: usize,
}

/// All trainable weights of one LSTM language model.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[4h, e]` input-to-gate weights, gates stacked as i, f, o, g.
    pub w_x: Tensor,
    /// `[4h, h]` recurrent weights.
    pub w_h: Tensor,
    /// `[4h]`
    pub b: Tensor,
    /// `[e, input]` attribute (or feature) embedding.
    pub w_ea: Tensor,
    /// `[vocab_in, e]` word embedding, one row per word.
    pub w_es: Tensor,
    /// `[vocab_out, h]`
    pub w_out: Tensor,
    /// `[vocab_out]`
    pub b_out: Tensor,
    /// `[h]` initial memory cell.
    pub c0: Tensor,
}

impl Parameters for LstmParams {
    fn named(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("w_x", &self.w_x),
            ("w_h", &self.w_h),
            ("b", &self.b),
            ("w_ea", &self.w_ea),
            ("w_es", &self.w_es),
            ("w_out", &self.w_out),
            ("b_out", &self.b_out),
            ("c0", &self.c0),
        ]
    }

    fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("w_x", &mut self.w_x),
            ("w_h", &mut self.w_h),
            ("b", &mut self.b),
            ("w_ea", &mut self.w_ea),
            ("w_es", &mut self.w_es),
            ("w_out", &mut self.w_out),
            ("b_out", &mut self.b_out),
            ("c0", &mut self.c0),
        ]
    }
}

impl LstmParams {
    /// Xavier-initialised weights, zero biases and a memory cell drawn from
    /// U(-0.1, 0.1).
    pub fn new(dims: LstmDims, seed: u64) -> Self {
        let mut rng = rng_from(derive_seed(seed, streams::LANGUAGE));
        let LstmDims {
            input,
            embedding: e,
            hidden: h,
            vocab_in,
            vocab_out,
        } = dims;
        LstmParams {
            w_x: Tensor::xavier(4 * h, e, &mut rng),
            w_h: Tensor::xavier(4 * h, h, &mut rng),
            b: Tensor::zeros(&[4 * h]),
            w_ea: Tensor::xavier(e, input, &mut rng),
            w_es: Tensor::xavier(vocab_in, e, &mut rng),
            w_out: Tensor::xavier(vocab_out, h, &mut rng),
            b_out: Tensor::zeros(&[vocab_out]),
            c0: Tensor::uniform(&[h], 0.1, &mut rng),
        }
    }

    pub fn zeros(dims: LstmDims) -> Self {
        let LstmDims {
            input,
            embedding: e,
            hidden: h,
            vocab_in,
            vocab_out,
        } = dims;
        LstmParams {
            w_x: Tensor::zeros(&[4 * h, e]),
            w_h: Tensor::zeros(&[4 * h, h]),
            b: Tensor::zeros(&[4 * h]),
            w_ea: Tensor::zeros(&[e, input]),
            w_es: Tensor::zeros(&[vocab_in, e]),
            w_out: Tensor::zeros(&[vocab_out, h]),
            b_out: Tensor::zeros(&[vocab_out]),
            c0: Tensor::zeros(&[h]),
        }
    }

    /// Rebuilds parameters from tensors in [`Parameters::named`] order,
    /// checking that their shapes agree.
    pub fn from_tensors(mut tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != 8 {
            return Err(Error::domain(format!("expected 8 LSTM tensors, got {}", tensors.len())));
        }
        let c0 = tensors.pop().expect("len checked");
        let b_out = tensors.pop().expect("len checked");
        let w_out = tensors.pop().expect("len checked");
        let w_es = tensors.pop().expect("len checked");
        let w_ea = tensors.pop().expect("len checked");
        let b = tensors.pop().expect("len checked");
        let w_h = tensors.pop().expect("len checked");
        let w_x = tensors.pop().expect("len checked");
        let p = LstmParams {
            w_x,
            w_h,
            b,
            w_ea,
            w_es,
            w_out,
            b_out,
            c0,
        };
        let dims = p.dims();
        if LstmParams::zeros(dims)
            .named()
            .iter()
            .zip(p.named())
            .any(|((_, want), (_, got))| want.shape() != got.shape())
        {
            return Err(Error::domain("inconsistent LSTM tensor shapes"));
        }
        Ok(p)
    }

    pub fn dims(&self) -> LstmDims {
        LstmDims {
            input: self.w_ea.cols(),
            embedding: self.w_ea.rows(),
            hidden: self.w_h.cols(),
            vocab_in: self.w_es.rows(),
            vocab_out: self.w_out.rows(),
        }
    }

    pub fn initial_state(&self) -> LstmState {
        let h = self.dims().hidden;
        LstmState {
            h: vec![0.0; h],
            c: self.c0.data().to_vec(),
        }
    }

    /// Embedded step input: `W_ea v` for the vector, `W_es[w]` for a word.
    pub fn embed(&self, input: StepInput, vector: &[f64]) -> Result<Vec<f64>> {
        match input {
            StepInput::Vector => {
                if vector.len() != self.w_ea.cols() {
                    return Err(Error::domain(format!(
                        "input vector of length {} for a model expecting {}",
                        vector.len(),
                        self.w_ea.cols()
                    )));
                }
                Ok(self.w_ea.matvec(vector))
            }
            StepInput::Token(w) => {
                if w >= self.w_es.rows() {
                    return Err(Error::domain(format!(
                        "token id {w} outside a dictionary of {}",
                        self.w_es.rows()
                    )));
                }
                Ok(self.w_es.row(w).to_vec())
            }
        }
    }

    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        let mut s = self.b_out.data().to_vec();
        self.w_out.matvec_acc(h, &mut s);
        s
    }

    /// Consumes `inputs` from the initial state and returns the final state.
    pub fn run(&self, vector: &[f64], inputs: &[StepInput]) -> Result<LstmState> {
        let mut state = self.initial_state();
        for &inp in inputs {
            let x = self.embed(inp, vector)?;
            state = lstm_step(self, &state, &x)?.0;
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Post-activation gate values of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    crate::attrnet::sigmoid(x)
}

/// One LSTM step: `c = f*c_prev + i*g`, `h = o*tanh(c)`.
pub fn lstm_step(params: &LstmParams, prev: &LstmState, x: &[f64]) -> Result<(LstmState, Gates)> {
    let h = prev.h.len();
    if x.len() != params.w_x.cols() || h != params.w_h.cols() || prev.c.len() != h {
        return Err(Error::domain("LSTM step dimensions do not match the parameters"));
    }
    if !x.iter().chain(&prev.h).chain(&prev.c).all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite LSTM step input".into()));
    }
    let mut z = params.b.data().to_vec();
    params.w_x.matvec_acc(x, &mut z);
    params.w_h.matvec_acc(&prev.h, &mut z);
    let gates = Gates {
        i: z[..h].iter().map(|&v| sigmoid(v)).collect(),
        f: z[h..2 * h].iter().map(|&v| sigmoid(v)).collect(),
        o: z[2 * h..3 * h].iter().map(|&v| sigmoid(v)).collect(),
        g: z[3 * h..].iter().map(|v| v.tanh()).collect(),
    };
    let c: Vec<f64> = (0..h)
        .map(|k| gates.f[k] * prev.c[k] + gates.i[k] * gates.g[k])
        .collect();
    let hn: Vec<f64> = (0..h).map(|k| gates.o[k] * c[k].tanh()).collect();
    Ok((LstmState { h: hn, c }, gates))
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&s| (s - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&s| s - lse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepInput {
    /// The example's attached input vector.
    Vector,
    Token(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub input: StepInput,
    pub target: Option<usize>,
}

/// One unrolled training or scoring example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<'a> {
    pub vector: &'a [f64],
    pub steps: Vec<Step>,
}

impl<'a> Sequence<'a> {
    /// `[v, START, S_1..S_L]` predicting `[-, S_1..S_L, END]`.
    pub fn caption(vector: &'a [f64], sentence: &[usize]) -> Self {
        let mut steps = vec![Step {
            input: StepInput::Vector,
            target: None,
        }];
        let mut prev = START;
        for &w in sentence.iter().chain(std::iter::once(&END)) {
            steps.push(Step {
                input: StepInput::Token(prev),
                target: Some(w),
            });
            prev = w;
        }
        Sequence { vector, steps }
    }

    /// `[v, Q_1..Q_L]` with the answer predicted at the last question word.
    pub fn answer_word(vector: &'a [f64], question: &[usize], answer: usize) -> Self {
        let mut steps = vec![Step {
            input: StepInput::Vector,
            target: None,
        }];
        for (t, &q) in question.iter().enumerate() {
            steps.push(Step {
                input: StepInput::Token(q),
                target: (t + 1 == question.len()).then_some(answer),
            });
        }
        Sequence { vector, steps }
    }

    /// Encoder over `Q_1..Q_L`, then the decoder `[v, START, A_1..A_T]`
    /// predicting `[-, A_1..A_T, END]` with the same weights.
    pub fn question_answer(vector: &'a [f64], question: &[usize], answer: &[usize]) -> Self {
        let mut steps: Vec<Step> = question
            .iter()
            .map(|&q| Step {
                input: StepInput::Token(q),
                target: None,
            })
            .collect();
        steps.extend(Sequence::caption(vector, answer).steps);
        Sequence { vector, steps }
    }

    pub fn targets(&self) -> usize {
        self.steps.iter().filter(|s| s.target.is_some()).count()
    }
}

/// Negative log-likelihood of a sequence's targets, without dropout.
pub fn unroll_nll(params: &LstmParams, seq: &Sequence) -> Result<f64> {
    let mut state = params.initial_state();
    let mut nll = 0.0;
    for step in &seq.steps {
        let x = params.embed(step.input, seq.vector)?;
        state = lstm_step(params, &state, &x)?.0;
        if let Some(t) = step.target {
            if t >= params.w_out.rows() {
                return Err(Error::domain(format!("target id {t} outside the output vocabulary")));
            }
            nll -= log_softmax(&params.logits(&state.h))[t];
        }
    }
    Ok(nll)
}

/// `-sum_t log p(S_t | S_<t, v)` of a caption, END included.
pub fn sequence_nll(params: &LstmParams, att: &[f64], sentence: &[usize]) -> Result<f64> {
    unroll_nll(params, &Sequence::caption(att, sentence))
}
