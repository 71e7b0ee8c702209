use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::iou;
use crate::error::{Error, Result};
use crate::microworld::{RegionBox, Scene};
use crate::rng::{derive_seed, rng_from, streams};

/// Synthetic region proposer: jittered copies of every object box and of
/// every multi-object group box, plus uniformly random boxes, each scored by
/// its best overlap with one of those targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposerConfig {
    pub jitter_per_object: usize,
    /// Jitter standard deviation as a fraction of the object's side.
    pub jitter: f64,
    pub random_boxes: usize,
    /// Standard deviation of the noise added to each proposal score.
    pub score_noise: f64,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        ProposerConfig {
            jitter_per_object: 6,
            jitter: 0.2,
            random_boxes: 16,
            score_noise: 0.05,
        }
    }
}

impl ProposerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.jitter_per_object + self.random_boxes == 0 {
            return Err(Error::config("proposer must emit at least one box"));
        }
        if !(self.jitter >= 0.0 && self.score_noise >= 0.0) {
            return Err(Error::config("proposer jitter and score noise must be >= 0"));
        }
        Ok(())
    }
}

fn clamp_box(x0: f64, y0: f64, x1: f64, y1: f64, canvas: (f64, f64)) -> Option<RegionBox> {
    let (w, h) = canvas;
    let b = (x0.clamp(0.0, w), y0.clamp(0.0, h), x1.clamp(0.0, w), y1.clamp(0.0, h));
    // reject slivers
    if b.2 - b.0 < 1e-3 * w || b.3 - b.1 < 1e-3 * h {
        return None;
    }
    RegionBox::new(b.0, b.1, b.2, b.3).ok()
}

/// Object boxes, then the bounding box of each category with several objects.
pub fn proposal_targets(scene: &Scene) -> Vec<RegionBox> {
    let mut out: Vec<RegionBox> = scene.objects.iter().map(|o| o.bbox).collect();
    let mut seen: Vec<&str> = Vec::new();
    for obj in &scene.objects {
        if seen.contains(&obj.category.as_str()) {
            continue;
        }
        seen.push(&obj.category);
        let mut members = scene
            .objects
            .iter()
            .filter(|o| o.category == obj.category)
            .map(|o| o.bbox);
        let mut u = members.next().expect("obj is a member");
        let mut n = 1;
        for b in members {
            u = RegionBox {
                x0: u.x0.min(b.x0),
                y0: u.y0.min(b.y0),
                x1: u.x1.max(b.x1),
                y1: u.y1.max(b.y1),
            };
            n += 1;
        }
        if n > 1 {
            out.push(u);
        }
    }
    out
}

pub fn propose(scene: &Scene, config: &ProposerConfig, seed: u64) -> Result<Vec<(RegionBox, f64)>> {
    config.validate()?;
    let mut rng = rng_from(derive_seed(seed, streams::PROPOSAL));
    let jitter = Normal::new(0.0, 1.0).map_err(|e| Error::config(e.to_string()))?;
    let (w, h) = scene.canvas;
    let targets = proposal_targets(scene);
    let mut boxes = Vec::new();
    for &b in &targets {
        let (bw, bh) = (b.x1 - b.x0, b.y1 - b.y0);
        let mut made = 0;
        let mut tries = 0;
        while made < config.jitter_per_object && tries < 20 * config.jitter_per_object {
            tries += 1;
            let mut d = || config.jitter * jitter.sample(&mut rng);
            let cand = clamp_box(
                b.x0 + d() * bw,
                b.y0 + d() * bh,
                b.x1 + d() * bw,
                b.y1 + d() * bh,
                scene.canvas,
            );
            if let Some(c) = cand {
                boxes.push(c);
                made += 1;
            }
        }
    }
    while boxes.len() < targets.len() * config.jitter_per_object + config.random_boxes {
        let xs = (rng.random_range(0.0..w), rng.random_range(0.0..w));
        let ys = (rng.random_range(0.0..h), rng.random_range(0.0..h));
        if let Some(c) = clamp_box(
            xs.0.min(xs.1),
            ys.0.min(ys.1),
            xs.0.max(xs.1),
            ys.0.max(ys.1),
            scene.canvas,
        ) {
            boxes.push(c);
        }
    }
    let score_noise =
        Normal::new(0.0, config.score_noise.max(f64::MIN_POSITIVE)).map_err(|e| Error::config(e.to_string()))?;
    Ok(boxes
        .into_iter()
        .map(|b| {
            let overlap = targets.iter().map(|t| iou(&b, t)).fold(0.0, f64::max);
            let noise = if config.score_noise > 0.0 {
                score_noise.sample(&mut rng)
            } else {
                0.0
            };
            (b, overlap + noise)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microworld::{generate_scene, GeneratorConfig};

    #[test]
    fn proposals_are_inside_and_deterministic() {
        let cfg = GeneratorConfig::default();
        let pc = ProposerConfig::default();
        for seed in 0..20 {
            let s = generate_scene(seed, &cfg).unwrap();
            let p = propose(&s, &pc, seed).unwrap();
            assert_eq!(
                p.len(),
                proposal_targets(&s).len() * pc.jitter_per_object + pc.random_boxes
            );
            assert!(p.iter().all(|(b, _)| b.within(s.canvas)));
            assert_eq!(p, propose(&s, &pc, seed).unwrap());
        }
    }

    #[test]
    fn jittered_boxes_outscore_random_ones_on_average() {
        let cfg = GeneratorConfig::default();
        let pc = ProposerConfig::default();
        let s = generate_scene(3, &cfg).unwrap();
        let p = propose(&s, &pc, 3).unwrap();
        let nj = s.objects.len() * pc.jitter_per_object;
        let mean = |xs: &[(RegionBox, f64)]| xs.iter().map(|x| x.1).sum::<f64>() / xs.len() as f64;
        assert!(mean(&p[..nj]) > mean(&p[nj..]));
    }
}
