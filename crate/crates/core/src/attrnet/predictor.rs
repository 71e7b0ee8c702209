use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{logistic_loss, AttributeScores, AttributeVector, HypothesisSet, ProposerConfig};
use crate::error::{Error, Result};
use crate::microworld::{region_features, FeatureLayout, Scene};
use crate::rng::{derive_seed, rng_from, streams};
use crate::tensor::{Parameters, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// The learning rate drops tenfold after this many epochs, repeatedly.
    pub decay_every: usize,
    pub batch_size: usize,
    pub dropout: f64,
    /// Number of proposal clusters.
    pub clusters: usize,
    /// Hypotheses kept per cluster.
    pub per_cluster: usize,
    pub proposer: ProposerConfig,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            hidden: 64,
            epochs: 40,
            learning_rate: 0.05,
            momentum: 0.9,
            decay_every: 10,
            batch_size: 32,
            dropout: 0.5,
            clusters: 10,
            per_cluster: 5,
            proposer: ProposerConfig::default(),
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 || self.decay_every == 0 {
            return Err(Error::config("predictor sizes and epochs must be positive"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("predictor needs lr > 0 and momentum in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        if self.clusters == 0 || self.per_cluster == 0 {
            return Err(Error::config("clusters and per_cluster must be positive"));
        }
        self.proposer.validate()
    }
}

/// Two-layer scorer: `s = W2 relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl Parameters for PredictorParams {
    fn named(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)]
    }

    fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
        ]
    }
}

impl PredictorParams {
    pub fn new(input: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = rng_from(derive_seed(seed, streams::PREDICTOR));
        PredictorParams {
            w1: Tensor::xavier(hidden, input, &mut rng),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::xavier(outputs, hidden, &mut rng),
            b2: Tensor::zeros(&[outputs]),
        }
    }

    pub fn from_tensors(w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Result<Self> {
        let p = PredictorParams { w1, b1, w2, b2 };
        let ok = p.w1.shape().len() == 2
            && p.w2.shape().len() == 2
            && p.b1.shape() == [p.w1.rows()]
            && p.w2.cols() == p.w1.rows()
            && p.b2.shape() == [p.w2.rows()];
        if !ok {
            return Err(Error::domain("inconsistent predictor tensor shapes"));
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn outputs(&self) -> usize {
        self.w2.rows()
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b1.data().to_vec();
        self.w1.matvec_acc(x, &mut z);
        z.iter_mut().for_each(|v| *v = v.max(0.0));
        z
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::domain(format!(
                "feature of length {} for a predictor expecting {}",
                x.len(),
                self.input_dim()
            )));
        }
        let a = self.hidden(x);
        let mut s = self.b2.data().to_vec();
        self.w2.matvec_acc(&a, &mut s);
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPredictor {
    pub params: PredictorParams,
    /// Full-set loss before training and after each epoch, without dropout.
    pub losses: Vec<f64>,
}

fn mean_loss(params: &PredictorParams, features: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<f64> {
    let logits = features.iter().map(|x| params.logits(x)).collect::<Result<Vec<_>>>()?;
    Ok(logistic_loss(&logits, labels)?.0)
}

/// Mini-batch SGD with momentum on the logistic loss over whole-canvas
/// features, with inverted dropout on the hidden layer.
pub fn train_predictor(
    features: &[Vec<f64>],
    labels: &[Vec<f64>],
    config: &PredictorConfig,
    seed: u64,
) -> Result<TrainedPredictor> {
    config.validate()?;
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::domain("predictor needs one label vector per feature"));
    }
    let d = features[0].len();
    let c = labels[0].len();
    if features.iter().any(|x| x.len() != d) || labels.iter().any(|y| y.len() != c) {
        return Err(Error::domain("ragged predictor training data"));
    }
    let mut params = PredictorParams::new(d, config.hidden, c, seed);
    let mut velocity: Vec<Tensor> = params.named().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
    let mut rng = rng_from(derive_seed(seed, streams::PREDICTOR + 100));
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut losses = vec![mean_loss(&params, features, labels)?];
    let keep = 1.0 - config.dropout;
    let h = config.hidden;

    for epoch in 0..config.epochs {
        let lr = config.learning_rate * 0.1f64.powi((epoch / config.decay_every) as i32);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads: Vec<Tensor> = params.named().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
            let mut acts = Vec::with_capacity(batch.len());
            let mut logits = Vec::with_capacity(batch.len());
            for &i in batch {
                let mut a = params.hidden(&features[i]);
                let mask: Vec<f64> = (0..h)
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let dropped: Vec<f64> = a.iter().zip(&mask).map(|(v, m)| v * m).collect();
                let mut s = params.b2.data().to_vec();
                params.w2.matvec_acc(&dropped, &mut s);
                logits.push(s);
                a.iter_mut()
                    .zip(&mask)
                    .for_each(|(v, m)| if *v > 0.0 { *v = *m } else { *v = 0.0 });
                acts.push((dropped, a));
            }
            let batch_labels: Vec<Vec<f64>> = batch.iter().map(|&i| labels[i].clone()).collect();
            let (loss, g_logits) = logistic_loss(&logits, &batch_labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("predictor loss became {loss} at lr {lr}"),
                });
            }
            for ((&i, (dropped, gate)), gs) in batch.iter().zip(&acts).zip(&g_logits) {
                grads[2].add_outer(gs, dropped);
                grads[3].add_assign(gs);
                let mut ga = vec![0.0; h];
                params.w2.matvec_t_acc(gs, &mut ga);
                ga.iter_mut().zip(gate).for_each(|(g, m)| *g *= m);
                grads[0].add_outer(&ga, &features[i]);
                grads[1].add_assign(&ga);
            }
            for ((_, p), (v, g)) in params.named_mut().into_iter().zip(velocity.iter_mut().zip(&grads)) {
                v.scale(config.momentum);
                v.axpy(-lr, g);
                p.axpy(1.0, v);
            }
        }
        let l = mean_loss(&params, features, labels)?;
        if !l.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("predictor loss became {l} at lr {lr}"),
            });
        }
        log::debug!("predictor epoch {epoch}: loss {l:.5}");
        losses.push(l);
    }
    Ok(TrainedPredictor { params, losses })
}

/// Attribute scores for one feature vector.
pub fn predict_whole(params: &PredictorParams, feature: &[f64]) -> Result<AttributeScores> {
    Ok(AttributeScores::from_logits(params.logits(feature)?))
}

/// Elementwise maximum over per-hypothesis probability vectors.
pub fn max_pool(vectors: &[Vec<f64>]) -> Result<AttributeVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::domain("max-pool over an empty hypothesis set"))?;
    let mut out = first.clone();
    for v in &vectors[1..] {
        if v.len() != out.len() {
            return Err(Error::domain("hypothesis vectors differ in length"));
        }
        for (o, &x) in out.iter_mut().zip(v) {
            *o = o.max(x);
        }
    }
    Ok(out)
}

/// Cross-hypothesis max pooling of the predictor's probabilities over the
/// region features of every hypothesis.
pub fn predict_attributes(
    scene: &Scene,
    params: &PredictorParams,
    hyps: &HypothesisSet,
    layout: &FeatureLayout,
    noise: f64,
    noise_seed: u64,
) -> Result<AttributeVector> {
    if hyps.is_empty() {
        return Err(Error::domain("empty hypothesis set"));
    }
    let per_hyp = hyps
        .boxes()
        .map(|b| {
            let f = region_features(scene, b, noise_seed, layout, noise)?;
            Ok(predict_whole(params, &f)?.probabilities)
        })
        .collect::<Result<Vec<_>>>()?;
    max_pool(&per_hyp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrnet::{cluster_and_select, propose};
    use crate::microworld::{generate_scene, GeneratorConfig};
    use rand_distr::{Distribution, StandardNormal};

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = rng_from(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y = vec![
                (x[0] > 0.0) as u8 as f64,
                (x[1] + x[2] > 0.0) as u8 as f64,
                (x[3] - x[4] > 0.0) as u8 as f64,
            ];
            xs.push(x);
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn separable_set_drives_loss_down() {
        let (xs, ys) = separable(400, 1);
        let cfg = PredictorConfig {
            epochs: 40,
            dropout: 0.1,
            ..Default::default()
        };
        let t = train_predictor(&xs, &ys, &cfg, 5).unwrap();
        assert_eq!(t.losses.len(), 41);
        let (first, last) = (t.losses[0], *t.losses.last().unwrap());
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = separable(60, 2);
        let cfg = PredictorConfig {
            epochs: 3,
            ..Default::default()
        };
        let a = train_predictor(&xs, &ys, &cfg, 9).unwrap();
        let b = train_predictor(&xs, &ys, &cfg, 9).unwrap();
        assert_eq!(a, b);
        let c = train_predictor(&xs, &ys, &cfg, 10).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn divergence_is_reported() {
        let (mut xs, ys) = separable(20, 3);
        xs[0][0] = 1e300;
        let cfg = PredictorConfig {
            epochs: 2,
            learning_rate: 1e10,
            ..Default::default()
        };
        assert!(matches!(
            train_predictor(&xs, &ys, &cfg, 0),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn max_pool_of_one_is_identity() {
        let v = vec![vec![0.2, 0.9, 0.4]];
        assert_eq!(max_pool(&v).unwrap(), v[0]);
        assert!(max_pool(&[]).is_err());
    }

    #[test]
    fn single_hypothesis_prediction_is_its_probability() {
        let cfg = GeneratorConfig::default();
        let layout = cfg.feature_layout();
        let s = generate_scene(4, &cfg).unwrap();
        let params = PredictorParams::new(layout.dim(), 8, 5, 1);
        let hyps = HypothesisSet {
            hypotheses: vec![(s.whole_box(), 1.0)],
            clusters: vec![None],
        };
        let att = predict_attributes(&s, &params, &hyps, &layout, 0.1, 77).unwrap();
        let f = region_features(&s, &s.whole_box(), 77, &layout, 0.1).unwrap();
        assert_eq!(att, predict_whole(&params, &f).unwrap().probabilities);
        let empty = HypothesisSet {
            hypotheses: vec![],
            clusters: vec![],
        };
        assert!(predict_attributes(&s, &params, &empty, &layout, 0.1, 77).is_err());
    }

    #[test]
    fn adding_hypotheses_never_lowers_scores() {
        let cfg = GeneratorConfig::default();
        let layout = cfg.feature_layout();
        let s = generate_scene(12, &cfg).unwrap();
        let params = PredictorParams::new(layout.dim(), 16, 7, 2);
        let props = propose(&s, &ProposerConfig::default(), 12).unwrap();
        let hyps = cluster_and_select(&props, 4, 2, s.canvas).unwrap();
        let mut prev = vec![0.0; 7];
        for n in 1..=hyps.len() {
            let idx: Vec<usize> = (0..n).collect();
            let att = predict_attributes(&s, &params, &hyps.subset(&idx), &layout, 0.1, 3).unwrap();
            assert!(att.iter().zip(&prev).all(|(a, p)| a >= p));
            prev = att;
        }
    }
}
