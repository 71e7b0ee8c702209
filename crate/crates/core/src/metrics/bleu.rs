use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(|s| s.as_ref()).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus-level BLEU-n with clipped n-gram precision, uniform geometric mean
/// over orders `1..=n` and the closest-reference brevity penalty.
///
/// `smoothing` adds an epsilon to zero numerators; pass 0 for standard BLEU.
pub fn bleu<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<Vec<S>>], n: usize, smoothing: f64) -> Result<f64> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(Error::domain(format!("BLEU order {n} outside 1..=4")));
    }
    if candidates.is_empty() {
        return Err(Error::domain("BLEU over an empty candidate corpus"));
    }
    if candidates.len() != references.len() {
        return Err(Error::domain("candidate and reference counts differ"));
    }
    let mut matched = vec![0usize; n];
    let mut total = vec![0usize; n];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::domain("candidate without references"));
        }
        cand_len += cand.len();
        // closest reference length, shorter one on ties
        ref_len += refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as i64 - cand.len() as i64).abs(), l))
            .expect("nonempty");
        for k in 1..=n {
            let counts = ngram_counts(cand, k);
            let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, k) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in &counts {
                matched[k - 1] += (*c).min(max_ref.get(g).copied().unwrap_or(0));
            }
            total[k - 1] += cand.len().saturating_sub(k - 1);
        }
    }
    if cand_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for k in 0..n {
        if total[k] == 0 {
            return Ok(0.0);
        }
        let num = if matched[k] == 0 {
            if smoothing <= 0.0 {
                return Ok(0.0);
            }
            smoothing
        } else {
            matched[k] as f64
        };
        log_sum += (num / total[k] as f64).ln();
    }
    let bp = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    Ok(bp * (log_sum / n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_candidate_scores_one() {
        let c = vec![t("a red ball near the left")];
        let r = vec![vec![t("a red ball near the left")]];
        for n in 1..=4 {
            assert_eq!(bleu(&c, &r, n, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn disjoint_candidate_scores_zero() {
        let c = vec![t("x y z")];
        let r = vec![vec![t("a b c")]];
        assert_eq!(bleu(&c, &r, 1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty_example() {
        let c = vec![t("the cat sat")];
        let r = vec![vec![t("the cat sat on the mat")]];
        let b = bleu(&c, &r, 1, 0.0).unwrap();
        assert!((b - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let empty: Vec<Vec<&str>> = vec![];
        assert!(bleu(&empty, &[], 1, 0.0).is_err());
        assert!(bleu(&[t("a")], &[vec![t("a")]], 5, 0.0).is_err());
        assert!(bleu(&[t("a")], &[vec![]], 1, 0.0).is_err());
    }

    #[test]
    fn corpus_level_higher_order_can_exceed_unigram() {
        // the one-word candidate adds an unmatched unigram but no bigram
        let c = vec![t("b"), t("a b")];
        let r = vec![vec![t("a")], vec![t("a b")]];
        let b1 = bleu(&c, &r, 1, 0.0).unwrap();
        let b2 = bleu(&c, &r, 2, 0.0).unwrap();
        assert!((b1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((b2 - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn multi_reference_clipping_can_favour_bigrams() {
        // each reference licenses one "d" but a different bigram
        let c = vec![t("d b d")];
        let r = vec![vec![t("d b"), t("b d")]];
        let b1 = bleu(&c, &r, 1, 0.0).unwrap();
        let b2 = bleu(&c, &r, 2, 0.0).unwrap();
        assert!((b1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((b2 - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    fn sentence() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 1..7)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn higher_orders_are_bounded_by_unigram_root(
            data in prop::collection::vec((sentence(), prop::collection::vec(sentence(), 1..4)), 1..6)
        ) {
            // only p_1 <= 1 of the other precisions is guaranteed, which gives
            // BLEU-n <= BP^(1-1/n) * BLEU-1^(1/n) <= BLEU-1^(1/n)
            let (c, r): (Vec<_>, Vec<_>) = data.into_iter().unzip();
            let b1 = bleu(&c, &r, 1, 0.0).unwrap();
            for n in 2..=4 {
                let bn = bleu(&c, &r, n, 0.0).unwrap();
                prop_assert!((0.0..=1.0).contains(&bn));
                prop_assert!(bn <= b1.powf(1.0 / n as f64) + 1e-12);
            }
        }

        #[test]
        fn corpus_order_does_not_matter(
            data in prop::collection::vec((sentence(), prop::collection::vec(sentence(), 1..4)), 1..6)
        ) {
            let (c, r): (Vec<_>, Vec<_>) = data.iter().cloned().unzip();
            let (mut c2, mut r2) = (c.clone(), r.clone());
            c2.reverse();
            r2.reverse();
            for n in 1..=4 {
                let a = bleu(&c, &r, n, 0.0).unwrap();
                let b = bleu(&c2, &r2, n, 0.0).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
