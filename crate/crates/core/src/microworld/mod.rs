//! Synthetic micro-world: symbolic scenes standing in for images, template
//! captions, question/answer pairs and noisy region features.

mod features;
mod grammar;
pub mod io;
mod lexicon;
mod qa;
mod split;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, streams};

pub use features::{region_features, FeatureLayout};
pub use grammar::{generate_captions, TemplateGrammar};
pub use lexicon::{shipped_embeddings, shipped_lexicon_graph, shipped_taxonomy};
pub use qa::{generate_qa, QAExample, QuestionType};
pub use split::make_splits;

/// Axis-aligned box in abstract canvas units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RegionBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let b = RegionBox { x0, y0, x1, y1 };
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::domain(format!("degenerate box {b:?}")));
        }
        Ok(b)
    }

    pub fn whole(canvas: (f64, f64)) -> Self {
        RegionBox {
            x0: 0.0,
            y0: 0.0,
            x1: canvas.0,
            y1: canvas.1,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn intersection_area(&self, other: &RegionBox) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }

    pub fn within(&self, canvas: (f64, f64)) -> bool {
        const EPS: f64 = 1e-9;
        self.x0 >= -EPS && self.y0 >= -EPS && self.x1 <= canvas.0 + EPS && self.y1 <= canvas.1 + EPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub category: String,
    pub color: String,
    #[serde(rename = "box")]
    pub bbox: RegionBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: u64,
    pub objects: Vec<ObjectInstance>,
    pub canvas: (f64, f64),
}

/// All objects of one category in a scene. Scenes are generated so that a
/// category occurs in at most one group and each group sits in its own
/// horizontal location bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub category: String,
    pub color: String,
    pub count: usize,
    pub action: Option<String>,
    pub location: String,
}

impl Scene {
    pub fn whole_box(&self) -> RegionBox {
        RegionBox::whole(self.canvas)
    }

    /// Index of the horizontal bin containing `b`'s center.
    pub fn location_bin(&self, b: &RegionBox, bins: usize) -> usize {
        let frac = (b.center_x() / self.canvas.0).clamp(0.0, 1.0 - 1e-12);
        (frac * bins as f64) as usize
    }

    pub fn groups(&self, lexicon: &Lexicon) -> Vec<Group> {
        let mut out: Vec<Group> = Vec::new();
        for obj in &self.objects {
            if let Some(g) = out.iter_mut().find(|g| g.category == obj.category) {
                g.count += 1;
                continue;
            }
            let bin = self.location_bin(&obj.bbox, lexicon.locations.len());
            out.push(Group {
                category: obj.category.clone(),
                color: obj.color.clone(),
                count: 1,
                action: obj.action.clone(),
                location: lexicon.locations[bin].clone(),
            });
        }
        out
    }

    pub fn validate(&self, config: &GeneratorConfig) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::domain(format!("scene {} has no objects", self.id)));
        }
        if self.objects.len() > config.max_objects {
            return Err(Error::domain(format!(
                "scene {} has {} objects, above the configured maximum {}",
                self.id,
                self.objects.len(),
                config.max_objects
            )));
        }
        for o in &self.objects {
            if !o.bbox.within(self.canvas) {
                return Err(Error::domain(format!(
                    "scene {}: box {:?} leaves the canvas",
                    self.id, o.bbox
                )));
            }
        }
        Ok(())
    }
}

/// Word lists the generator draws scene facts and surface forms from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicon {
    pub categories: Vec<String>,
    pub colors: Vec<String>,
    /// Categories that may carry an action.
    pub animate: Vec<String>,
    pub actions: Vec<String>,
    /// Horizontal location bins, left to right.
    pub locations: Vec<String>,
    /// Count words; entry `i` names the count `i + 1`.
    pub numbers: Vec<String>,
    /// Alternative surface forms used by synonym-variant questions.
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let mut synonyms = BTreeMap::new();
        for (w, syn) in [
            ("dog", "puppy"),
            ("cat", "kitty"),
            ("bird", "sparrow"),
            ("ball", "sphere"),
            ("box", "crate"),
            ("cup", "mug"),
        ] {
            synonyms.insert(w.to_string(), vec![syn.to_string()]);
        }
        Lexicon {
            categories: s(&["ball", "box", "cup", "dog", "cat", "bird"]),
            colors: s(&["red", "blue", "green", "yellow", "white"]),
            animate: s(&["dog", "cat", "bird"]),
            actions: s(&["sitting", "running"]),
            locations: s(&["left", "center", "right"]),
            numbers: s(&["one", "two", "three"]),
            synonyms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub canvas: (f64, f64),
    pub min_objects: usize,
    pub max_objects: usize,
    pub max_group_size: usize,
    /// Object side length range as a fraction of the canvas side.
    pub object_size: (f64, f64),
    pub action_rate: f64,
    /// Standard deviation of the scene's background feature noise.
    pub noise: f64,
    /// Standard deviation of each object's appearance noise.
    pub appearance_noise: f64,
    /// Region share below which objects fade from view; 0 disables.
    pub dilution: f64,
    /// Extra feature channels carrying only noise.
    pub distractor_channels: usize,
    /// Probability that a question names its object through a synonym.
    pub synonym_rate: f64,
    pub lexicon: Lexicon,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            canvas: (100.0, 100.0),
            min_objects: 1,
            max_objects: 4,
            max_group_size: 3,
            object_size: (0.12, 0.3),
            action_rate: 0.6,
            noise: 0.15,
            appearance_noise: 0.1,
            dilution: 0.1,
            distractor_channels: 16,
            synonym_rate: 0.3,
            lexicon: Lexicon::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let lx = &self.lexicon;
        if !(self.canvas.0 > 0.0 && self.canvas.1 > 0.0) {
            return Err(Error::config("canvas must have positive width and height"));
        }
        if lx.categories.is_empty() || lx.colors.is_empty() || lx.locations.is_empty() {
            return Err(Error::config("lexicon needs categories, colors and locations"));
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return Err(Error::config(format!(
                "invalid object-count range {}..={}",
                self.min_objects, self.max_objects
            )));
        }
        if self.max_group_size == 0 || lx.numbers.len() < self.max_group_size {
            return Err(Error::config("need a count word for every group size"));
        }
        let max_groups = lx.locations.len().min(lx.categories.len());
        if self.max_objects > max_groups * self.max_group_size {
            return Err(Error::config(format!(
                "max_objects {} cannot be placed in {} groups of at most {}",
                self.max_objects, max_groups, self.max_group_size
            )));
        }
        let (lo, hi) = self.object_size;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0 / lx.locations.len() as f64 + 1e-12) {
            return Err(Error::config(
                "object_size must lie in (0, 1/#locations] with min <= max",
            ));
        }
        if !(0.0..=1.0).contains(&self.action_rate) || !(0.0..=1.0).contains(&self.synonym_rate) {
            return Err(Error::config("rates must lie in [0, 1]"));
        }
        if [self.noise, self.appearance_noise]
            .iter()
            .any(|n| !(*n >= 0.0 && n.is_finite()))
        {
            return Err(Error::config("noise amplitudes must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.dilution) {
            return Err(Error::config("dilution must lie in [0, 1]"));
        }
        if lx.animate.iter().any(|a| !lx.categories.contains(a)) {
            return Err(Error::config("animate categories must be categories"));
        }
        if lx.animate.iter().any(|_| lx.actions.is_empty()) {
            return Err(Error::config("animate categories need at least one action"));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: GeneratorConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn feature_layout(&self) -> FeatureLayout {
        FeatureLayout {
            appearance: self.appearance_noise,
            dilution: self.dilution,
            ..FeatureLayout::new(&self.lexicon, self.distractor_channels)
        }
    }
}

pub fn generate_scene(seed: u64, config: &GeneratorConfig) -> Result<Scene> {
    config.validate()?;
    let lx = &config.lexicon;
    let mut rng = rng_from(derive_seed(seed, streams::SCENE));
    let (w, h) = config.canvas;
    let n = rng.random_range(config.min_objects..=config.max_objects);

    let mut categories: Vec<&String> = lx.categories.iter().collect();
    categories.shuffle(&mut rng);
    let mut bins: Vec<usize> = (0..lx.locations.len()).collect();
    bins.shuffle(&mut rng);
    let slots = categories.len().min(bins.len());

    let mut objects = Vec::with_capacity(n);
    let mut remaining = n;
    let mut g = 0;
    while remaining > 0 {
        let left_after = slots - g - 1;
        let lo = remaining.saturating_sub(left_after * config.max_group_size).max(1);
        let hi = config.max_group_size.min(remaining);
        let count = rng.random_range(lo..=hi);
        let category = categories[g].clone();
        let color = lx.colors[rng.random_range(0..lx.colors.len())].clone();
        let action = if lx.animate.contains(&category) && rng.random_bool(config.action_rate) {
            Some(lx.actions[rng.random_range(0..lx.actions.len())].clone())
        } else {
            None
        };
        let bin = bins[g];
        let bin_w = w / lx.locations.len() as f64;
        for _ in 0..count {
            let bw = rng.random_range(config.object_size.0..=config.object_size.1) * w;
            let bh = rng.random_range(config.object_size.0..=config.object_size.1) * h;
            let cx_lo = (bin as f64 * bin_w).max(bw / 2.0);
            let cx_hi = ((bin + 1) as f64 * bin_w).min(w - bw / 2.0);
            let cx = if cx_lo < cx_hi {
                rng.random_range(cx_lo..cx_hi)
            } else {
                0.5 * (cx_lo + cx_hi)
            };
            let cy = rng.random_range(bh / 2.0..=h - bh / 2.0);
            objects.push(ObjectInstance {
                category: category.clone(),
                color: color.clone(),
                bbox: RegionBox::new(cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0)?,
                action: action.clone(),
            });
        }
        remaining -= count;
        g += 1;
    }
    let scene = Scene {
        id: seed,
        objects,
        canvas: config.canvas,
    };
    scene.validate(config)?;
    Ok(scene)
}

/// One scene's five reference captions plus its whole-canvas feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionedExample {
    pub scene_id: u64,
    pub captions: Vec<Vec<String>>,
    pub feature: Vec<f64>,
}

pub const CAPTIONS_PER_SCENE: usize = 5;

/// A generated corpus: scenes with captions, features and questions.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub scenes: Vec<Scene>,
    pub captions: Vec<CaptionedExample>,
    pub qa: Vec<QAExample>,
}

/// Noise seed for the whole-canvas feature of a scene.
pub fn scene_feature_seed(corpus_seed: u64, scene_id: u64) -> u64 {
    derive_seed(derive_seed(corpus_seed, streams::FEATURE), scene_id)
}

pub fn generate_corpus(
    num_scenes: usize,
    seed: u64,
    config: &GeneratorConfig,
    grammar: &TemplateGrammar,
) -> Result<Corpus> {
    if num_scenes == 0 {
        return Err(Error::config("corpus needs at least one scene"));
    }
    let layout = config.feature_layout();
    let mut scenes = Vec::with_capacity(num_scenes);
    let mut captions = Vec::with_capacity(num_scenes);
    let mut qa = Vec::new();
    for i in 0..num_scenes as u64 {
        let scene_seed = derive_seed(seed, i);
        let mut scene = generate_scene(scene_seed, config)?;
        scene.id = i;
        let caps = generate_captions(&scene, grammar, &config.lexicon, scene_seed)?;
        let feature = region_features(
            &scene,
            &scene.whole_box(),
            scene_feature_seed(seed, i),
            &layout,
            config.noise,
        )?;
        qa.extend(generate_qa(&scene, config, grammar, scene_seed)?);
        captions.push(CaptionedExample {
            scene_id: i,
            captions: caps,
            feature,
        });
        scenes.push(scene);
    }
    Ok(Corpus { scenes, captions, qa })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_scene() {
        let cfg = GeneratorConfig::default();
        assert_eq!(generate_scene(7, &cfg).unwrap(), generate_scene(7, &cfg).unwrap());
    }

    #[test]
    fn different_seeds_give_different_scenes() {
        let cfg = GeneratorConfig::default();
        assert_ne!(generate_scene(7, &cfg).unwrap(), generate_scene(8, &cfg).unwrap());
    }

    #[test]
    fn max_objects_one_gives_single_object() {
        let cfg = GeneratorConfig {
            max_objects: 1,
            ..Default::default()
        };
        for seed in 0..20 {
            assert_eq!(generate_scene(seed, &cfg).unwrap().objects.len(), 1);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = GeneratorConfig::default();
        cfg.lexicon.categories.clear();
        assert!(matches!(generate_scene(1, &cfg), Err(Error::Config(_))));
        let cfg = GeneratorConfig {
            canvas: (0.0, 10.0),
            ..Default::default()
        };
        assert!(matches!(generate_scene(1, &cfg), Err(Error::Config(_))));
        let cfg = GeneratorConfig {
            min_objects: 3,
            max_objects: 2,
            ..Default::default()
        };
        assert!(matches!(generate_scene(1, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn scenes_respect_invariants() {
        let cfg = GeneratorConfig::default();
        for seed in 0..200 {
            let s = generate_scene(seed, &cfg).unwrap();
            s.validate(&cfg).unwrap();
            let groups = s.groups(&cfg.lexicon);
            let mut locs: Vec<_> = groups.iter().map(|g| g.location.clone()).collect();
            locs.sort();
            locs.dedup();
            assert_eq!(locs.len(), groups.len(), "one group per location bin");
            assert_eq!(groups.iter().map(|g| g.count).sum::<usize>(), s.objects.len());
        }
    }

    #[test]
    fn generator_config_round_trips_through_toml() {
        let cfg = GeneratorConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(GeneratorConfig::from_toml_str(&text).unwrap(), cfg);
        assert!(GeneratorConfig::from_toml_str("bogus_key = 1").is_err());
    }
}
