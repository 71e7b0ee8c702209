use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{lstm_step, softmax, unroll_nll, Gates, LstmParams, LstmState, Sequence, StepInput};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, streams, Rng};
use crate::tensor::Parameters;

/// Gradients share the parameter layout.
pub type Gradients = LstmParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 100,
            clip_norm: 5.0,
            dropout_rate: 0.5,
            l2_lambda: 1e-4,
            epochs: 10,
            embedding_dim: 256,
            hidden_dim: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.clip_norm > 0.0) {
            return Err(Error::config("learning_rate and clip_norm must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch_size and epochs must be positive"));
        }
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::config("model dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must lie in [0, 1)"));
        }
        if !self.l2_lambda.is_finite() || self.l2_lambda < 0.0 {
            return Err(Error::config("l2_lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Inverted dropout mask, or `None` in evaluation mode.
fn mask(n: usize, dropout: &mut Option<(&mut Rng, f64)>) -> Option<Vec<f64>> {
    let (rng, rate) = dropout.as_mut()?;
    if *rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - *rate;
    Some(
        (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect(),
    )
}

fn apply(v: &mut [f64], m: &Option<Vec<f64>>) {
    if let Some(m) = m {
        v.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
}

struct Cache {
    input: StepInput,
    x: Vec<f64>,
    x_mask: Option<Vec<f64>>,
    prev: LstmState,
    gates: Gates,
    c: Vec<f64>,
    h_out: Vec<f64>,
    h_mask: Option<Vec<f64>>,
    probs: Option<(usize, Vec<f64>)>,
}

/// Forward and backward pass over one sequence. Adds `scale` times the
/// gradient of its NLL into `grads` and returns the unscaled NLL.
pub fn sequence_cost(
    params: &LstmParams,
    seq: &Sequence,
    scale: f64,
    mut dropout: Option<(&mut Rng, f64)>,
    grads: &mut Gradients,
) -> Result<f64> {
    let hd = params.dims().hidden;
    let vout = params.w_out.rows();
    let mut state = params.initial_state();
    let mut caches = Vec::with_capacity(seq.steps.len());
    let mut nll = 0.0;
    for step in &seq.steps {
        let mut x = params.embed(step.input, seq.vector)?;
        let x_mask = mask(x.len(), &mut dropout);
        apply(&mut x, &x_mask);
        let (next, gates) = lstm_step(params, &state, &x)?;
        let mut h_out = next.h.clone();
        let (h_mask, probs) = match step.target {
            Some(t) => {
                if t >= vout {
                    return Err(Error::domain(format!(
                        "target id {t} outside the output vocabulary of {vout}"
                    )));
                }
                let m = mask(hd, &mut dropout);
                apply(&mut h_out, &m);
                let p = softmax(&params.logits(&h_out));
                nll -= p[t].ln();
                (m, Some((t, p)))
            }
            None => (None, None),
        };
        caches.push(Cache {
            input: step.input,
            x,
            x_mask,
            prev: std::mem::replace(&mut state, next.clone()),
            gates,
            c: next.c,
            h_out,
            h_mask,
            probs,
        });
    }
    if !nll.is_finite() {
        return Err(Error::Numeric(format!("sequence NLL is {nll}")));
    }

    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    for cache in caches.iter().rev() {
        let mut dh = dh_next.clone();
        if let Some((t, p)) = &cache.probs {
            let mut dl: Vec<f64> = p.iter().map(|v| v * scale).collect();
            dl[*t] -= scale;
            grads.w_out.add_outer(&dl, &cache.h_out);
            grads.b_out.add_assign(&dl);
            let mut dho = vec![0.0; hd];
            params.w_out.matvec_t_acc(&dl, &mut dho);
            apply(&mut dho, &cache.h_mask);
            dh.iter_mut().zip(&dho).for_each(|(a, b)| *a += b);
        }
        let g = &cache.gates;
        for k in 0..hd {
            let tc = cache.c[k].tanh();
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * g.o[k] * (1.0 - tc * tc);
            dz[k] = dc * g.g[k] * g.i[k] * (1.0 - g.i[k]);
            dz[hd + k] = dc * cache.prev.c[k] * g.f[k] * (1.0 - g.f[k]);
            dz[2 * hd + k] = d_o * g.o[k] * (1.0 - g.o[k]);
            dz[3 * hd + k] = dc * g.i[k] * (1.0 - g.g[k] * g.g[k]);
            dc_next[k] = dc * g.f[k];
        }
        grads.w_x.add_outer(&dz, &cache.x);
        grads.w_h.add_outer(&dz, &cache.prev.h);
        grads.b.add_assign(&dz);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        params.w_h.matvec_t_acc(&dz, &mut dh_next);
        let mut dx = vec![0.0; cache.x.len()];
        params.w_x.matvec_t_acc(&dz, &mut dx);
        apply(&mut dx, &cache.x_mask);
        match cache.input {
            StepInput::Vector => grads.w_ea.add_outer(&dx, seq.vector),
            StepInput::Token(w) => grads.w_es.row_mut(w).iter_mut().zip(&dx).for_each(|(a, b)| *a += b),
        }
    }
    grads.c0.add_assign(&dc_next);
    Ok(nll)
}

fn add_regularizer(params: &LstmParams, grads: &mut Gradients, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    for ((_, g), (_, p)) in grads.named_mut().into_iter().zip(params.named()) {
        g.axpy(2.0 * lambda, p);
    }
    lambda * params.norm_sq()
}

/// Mean NLL over `batch` plus `lambda * ||theta||^2`, and its gradient.
pub fn caption_cost(params: &LstmParams, batch: &[Sequence], lambda: f64) -> Result<(f64, Gradients)> {
    batch_cost(params, batch, lambda, None)
}

fn batch_cost(
    params: &LstmParams,
    batch: &[Sequence],
    lambda: f64,
    mut dropout: Option<(&mut Rng, f64)>,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::domain("cost over an empty batch"));
    }
    let mut grads = LstmParams::zeros(params.dims());
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for seq in batch {
        let d = dropout.as_mut().map(|(r, p)| (&mut **r, *p));
        total += sequence_cost(params, seq, scale, d, &mut grads)?;
    }
    let cost = total * scale + add_regularizer(params, &mut grads, lambda);
    if !cost.is_finite() {
        return Err(Error::Numeric(format!("cost is {cost}")));
    }
    Ok((cost, grads))
}

/// Scales `grads` down to global norm `clip_norm` when above it, then takes
/// one plain SGD step. Returns the norm before clipping.
pub fn clip_and_step(params: &mut LstmParams, grads: &Gradients, lr: f64, clip_norm: f64) -> f64 {
    let norm = grads.norm_sq().sqrt();
    let factor = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    for ((_, p), (_, g)) in params.named_mut().into_iter().zip(grads.named()) {
        p.axpy(-lr * factor, g);
    }
    norm
}

pub fn sgd_update(params: &mut LstmParams, grads: &Gradients, config: &TrainConfig) {
    clip_and_step(params, grads, config.learning_rate, config.clip_norm);
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Regularised cost on the training set before the first update.
    pub initial_cost: f64,
    /// Mean regularised mini-batch cost of each epoch.
    pub train_cost: Vec<f64>,
    /// Mean NLL per validation example after each epoch.
    pub val_cost: Vec<f64>,
    /// Epoch whose parameters were kept (lowest validation cost).
    pub best_epoch: usize,
}

fn mean_nll(params: &LstmParams, seqs: &[Sequence]) -> Result<f64> {
    let mut total = 0.0;
    for s in seqs {
        total += unroll_nll(params, s)?;
    }
    Ok(total / seqs.len() as f64)
}

/// Mini-batch SGD over `train`. When `val` is nonempty the parameters of
/// the epoch with the lowest validation cost are returned.
pub fn train_sequences(
    mut params: LstmParams,
    train: &[Sequence],
    val: &[Sequence],
    config: &TrainConfig,
    seed: u64,
) -> Result<(LstmParams, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::domain("no training sequences"));
    }
    let mut order_rng = rng_from(derive_seed(seed, streams::LANGUAGE + 100));
    let mut drop_rng = rng_from(derive_seed(seed, streams::LANGUAGE + 200));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog {
        initial_cost: mean_nll(&params, train)? + config.l2_lambda * params.norm_sq(),
        ..Default::default()
    };
    let mut best: Option<(f64, LstmParams)> = None;
    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sequence> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (cost, grads) = batch_cost(
                &params,
                &batch,
                config.l2_lambda,
                Some((&mut drop_rng, config.dropout_rate)),
            )
            .map_err(|e| Error::Divergence {
                epoch,
                detail: e.to_string(),
            })?;
            clip_and_step(&mut params, &grads, config.learning_rate, config.clip_norm);
            sum += cost;
            batches += 1;
        }
        if !params.norm_sq().is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: "parameters became non-finite".into(),
            });
        }
        log.train_cost.push(sum / batches as f64);
        if !val.is_empty() {
            let v = mean_nll(&params, val)?;
            log.val_cost.push(v);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, params.clone()));
                log.best_epoch = epoch;
            }
        } else {
            log.best_epoch = epoch;
        }
        log::debug!(
            "epoch {epoch}: train {:.4} val {:?}",
            log.train_cost[epoch],
            log.val_cost.last()
        );
    }
    Ok((best.map_or(params, |(_, p)| p), log))
}
