//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use attrv2l::attrnet::ncut_value;
use attrv2l::microworld::RegionBox;
use attrv2l::rng::{rng_from, Rng};
use attrv2l::seqcore::{caption_cost, unroll_nll, LstmDims, LstmParams, Sequence, StepInput};
use attrv2l::tensor::Parameters;
use attrv2l::vocab::END;
use rand::Rng as _;

pub fn random_model(dims: LstmDims, seed: u64, scale: f64) -> LstmParams {
    let mut p = LstmParams::new(dims, seed);
    let mut rng = rng_from(seed ^ 0xA5A5);
    for (_, t) in p.named_mut() {
        t.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-scale..scale));
    }
    p
}

pub fn random_tokens(rng: &mut Rng, len: usize, lo: usize, hi: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// Largest relative error between the analytic gradient of the regularised
/// batch cost and central finite differences, over every parameter entry.
pub fn gradient_error(params: &LstmParams, batch: &[Sequence], lambda: f64) -> f64 {
    let (_, grads) = caption_cost(params, batch, lambda).unwrap();
    let cost = |p: &LstmParams| -> f64 {
        let nll: f64 = batch.iter().map(|s| unroll_nll(p, s).unwrap()).sum();
        nll / batch.len() as f64 + lambda * p.norm_sq()
    };
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    let analytic: Vec<Vec<f64>> = grads.named().iter().map(|(_, t)| t.data().to_vec()).collect();
    for (ti, an) in analytic.iter().enumerate() {
        for (k, &ak) in an.iter().enumerate() {
            let orig = probe.named()[ti].1.data()[k];
            let mut at = |d: f64| {
                probe.named_mut()[ti].1.data_mut()[k] = orig + d;
                cost(&probe)
            };
            // fourth-order central stencil
            let fd = (at(-2.0 * eps) - 8.0 * at(-eps) + 8.0 * at(eps) - at(2.0 * eps)) / (12.0 * eps);
            probe.named_mut()[ti].1.data_mut()[k] = orig;
            let denom = (ak.abs() + fd.abs()).max(1e-6);
            worst = worst.max((ak - fd).abs() / denom);
        }
    }
    worst
}

/// Every completion of up to `max_len` words from the primed state: END at
/// any position, or `max_len` words without END. Returns the best sequence
/// (END excluded) and its log-probability; ties go to the first enumerated.
pub fn exhaustive_best(params: &LstmParams, vector: &[f64], prefix: &[StepInput], max_len: usize) -> (Vec<usize>, f64) {
    let v = params.dims().vocab_out;
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::NEG_INFINITY);
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(words) = stack.pop() {
        let score = |seq: &[usize], with_end: bool| -> f64 {
            let mut steps: Vec<StepInput> = prefix.to_vec();
            let mut total = 0.0;
            let mut targets: Vec<usize> = seq.to_vec();
            if with_end {
                targets.push(END);
            }
            // probability chain computed step by step
            let mut state = params.run(vector, &steps).unwrap();
            for (i, &w) in targets.iter().enumerate() {
                let logits = params.logits(&state.h);
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|s| (s - m).exp()).sum();
                total += logits[w] - m - z.ln();
                if i + 1 < targets.len() {
                    steps.push(StepInput::Token(w));
                    state = params.run(vector, &steps).unwrap();
                }
            }
            total
        };
        if words.len() < max_len {
            let s = score(&words, true);
            if s > best.1 {
                best = (words.clone(), s);
            }
            for w in (0..v).rev() {
                if w != END {
                    let mut next = words.clone();
                    next.push(w);
                    stack.push(next);
                }
            }
        } else {
            let s = score(&words, false);
            if s > best.1 {
                best = (words.clone(), s);
            }
        }
    }
    best
}

/// Lowest two-way normalized cut over all bipartitions.
pub fn brute_force_ncut(boxes: &[RegionBox]) -> f64 {
    let n = boxes.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
        best = best.min(ncut_value(boxes, &labels));
    }
    best
}

/// Two clusters of overlapping boxes on opposite sides of a 100x100 canvas,
/// `n` boxes in total.
pub fn two_blob_boxes(rng: &mut Rng, n: usize) -> Vec<RegionBox> {
    let split = rng.random_range(1..n);
    (0..n)
        .map(|i| {
            let (cx, cy) = if i < split { (25.0, 30.0) } else { (72.0, 65.0) };
            let w = rng.random_range(10.0..20.0);
            let h = rng.random_range(10.0..20.0);
            let x = cx + rng.random_range(-6.0..6.0);
            let y = cy + rng.random_range(-6.0..6.0);
            RegionBox::new(x - w / 2.0, y - h / 2.0, x + w / 2.0, y + h / 2.0).unwrap()
        })
        .collect()
}
