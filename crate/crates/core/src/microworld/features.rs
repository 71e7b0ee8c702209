use rand_distr::{Distribution, Normal};

use super::{Lexicon, RegionBox, Scene};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

/// Channel layout of a region feature vector (one presence channel per
/// category, color, action, location and count word, then noise-only
/// distractors) and how objects are rendered into it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayout {
    pub categories: Vec<String>,
    pub colors: Vec<String>,
    pub actions: Vec<String>,
    pub locations: Vec<String>,
    pub numbers: Vec<String>,
    pub distractors: usize,
    /// Standard deviation of each object's fixed appearance perturbation.
    pub appearance: f64,
    /// Region share below which an object's signal fades; 0 disables.
    pub dilution: f64,
}

impl FeatureLayout {
    pub fn new(lexicon: &Lexicon, distractors: usize) -> Self {
        FeatureLayout {
            categories: lexicon.categories.clone(),
            colors: lexicon.colors.clone(),
            actions: lexicon.actions.clone(),
            locations: lexicon.locations.clone(),
            numbers: lexicon.numbers.clone(),
            distractors,
            appearance: 0.0,
            dilution: 0.0,
        }
    }

    pub fn signal_dim(&self) -> usize {
        self.categories.len() + self.colors.len() + self.actions.len() + self.locations.len() + self.numbers.len()
    }

    pub fn dim(&self) -> usize {
        self.signal_dim() + self.distractors
    }

    /// Channel names in vector order; distractors are `~0`, `~1`, ...
    pub fn channel_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .categories
            .iter()
            .chain(&self.colors)
            .chain(&self.actions)
            .chain(&self.locations)
            .chain(&self.numbers)
            .cloned()
            .collect();
        out.extend((0..self.distractors).map(|i| format!("~{i}")));
        out
    }

    fn offset_of(list: &[String], base: usize, word: &str) -> Option<usize> {
        list.iter().position(|w| w == word).map(|i| base + i)
    }

    fn object_channels(&self, scene: &Scene, obj: &super::ObjectInstance) -> Vec<usize> {
        let k0 = self.categories.len();
        let a0 = k0 + self.colors.len();
        let l0 = a0 + self.actions.len();
        let mut out = Vec::with_capacity(4);
        out.extend(Self::offset_of(&self.categories, 0, &obj.category));
        out.extend(Self::offset_of(&self.colors, k0, &obj.color));
        if let Some(a) = &obj.action {
            out.extend(Self::offset_of(&self.actions, a0, a));
        }
        let bin = scene.location_bin(&obj.bbox, self.locations.len());
        out.push(l0 + bin);
        out
    }

    fn number_offset(&self) -> usize {
        self.signal_dim() - self.numbers.len()
    }
}

/// How strongly an object shows in a region: its visible fraction, faded
/// by `sqrt(share / dilution)` when it fills less than `dilution` of the
/// region, so small objects are faint in wide views.
fn strength(obj_area: f64, inter: f64, region_area: f64, dilution: f64) -> f64 {
    let visible = inter / obj_area;
    if dilution > 0.0 {
        visible * (inter / region_area / dilution).min(1.0).sqrt()
    } else {
        visible
    }
}

/// Noisy feature of the part of `scene` seen through `region`.
///
/// Word channels carry the strongest showing among the objects with that
/// word. Count channel `n` carries how close some category's visible object
/// count is to `n`, scaled by that category's showing. Each object adds its
/// own fixed appearance perturbation (seeded by `noise_seed` and its index)
/// in proportion to its showing, and the scene adds one background
/// perturbation of standard deviation `noise` to every region alike, so a
/// region's feature depends only on what it sees.
pub fn region_features(
    scene: &Scene,
    region: &RegionBox,
    noise_seed: u64,
    layout: &FeatureLayout,
    noise: f64,
) -> Result<Vec<f64>> {
    if !region.within(scene.canvas) || !(region.x0 < region.x1 && region.y0 < region.y1) {
        return Err(Error::domain(format!(
            "region {region:?} is not inside canvas {:?}",
            scene.canvas
        )));
    }
    let normal = |sd: f64| Normal::new(0.0, sd).map_err(|e| Error::config(e.to_string()));
    let mut v = vec![0.0; layout.dim()];
    let mut perturbation = vec![0.0; layout.dim()];
    let mut visible_count = vec![0.0; layout.categories.len()];
    let mut showing = vec![0.0f64; layout.categories.len()];
    for (k, obj) in scene.objects.iter().enumerate() {
        let inter = obj.bbox.intersection_area(region);
        if inter <= 0.0 {
            continue;
        }
        let s = strength(obj.bbox.area(), inter, region.area(), layout.dilution);
        for ch in layout.object_channels(scene, obj) {
            v[ch] = f64::max(v[ch], s);
        }
        if let Some(c) = layout.categories.iter().position(|c| *c == obj.category) {
            visible_count[c] += inter / obj.bbox.area();
            showing[c] = showing[c].max(s);
        }
        if layout.appearance > 0.0 {
            let mut rng = rng_from(derive_seed(noise_seed, k as u64 + 1));
            let d = normal(layout.appearance)?;
            for p in perturbation.iter_mut() {
                *p += s * d.sample(&mut rng);
            }
        }
    }
    let n0 = layout.number_offset();
    for (c, &vc) in visible_count.iter().enumerate().filter(|(_, &vc)| vc > 0.0) {
        for (i, ch) in v[n0..n0 + layout.numbers.len()].iter_mut().enumerate() {
            let closeness = 1.0 - (vc - (i + 1) as f64).abs();
            *ch = ch.max(closeness * showing[c]);
        }
    }
    if noise > 0.0 {
        let mut rng = rng_from(noise_seed);
        let d = normal(noise)?;
        for p in perturbation.iter_mut() {
            *p += d.sample(&mut rng);
        }
    }
    for (x, p) in v.iter_mut().zip(perturbation) {
        *x += p;
    }
    Ok(v)
}
