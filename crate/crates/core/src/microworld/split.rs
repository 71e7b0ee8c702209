use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, streams};

/// Partitions `items` into (train, val, test) with the given ratios. Each
/// split keeps the items' original relative order.
pub fn make_splits<T: Clone>(items: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, streams::SPLIT)));
    let n_train = (n as f64 * a).round() as usize;
    let n_val = ((n as f64 * b).round() as usize).min(n - n_train);
    let mut label = vec![2u8; n];
    for &i in &order[..n_train] {
        label[i] = 0;
    }
    for &i in &order[n_train..n_train + n_val] {
        label[i] = 1;
    }
    let pick = |k: u8| -> Vec<T> {
        items
            .iter()
            .zip(&label)
            .filter(|(_, &l)| l == k)
            .map(|(x, _)| x.clone())
            .collect()
    };
    Ok((pick(0), pick(1), pick(2)))
}
