use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Group, Lexicon, Scene, CAPTIONS_PER_SCENE};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, streams};

/// Surface realisations for scene facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateGrammar {
    /// category -> plural form
    pub plurals: BTreeMap<String, String>,
    /// action -> (singular present, plural present), e.g. sitting -> (sits, sit)
    pub action_present: BTreeMap<String, (String, String)>,
    /// Word that introduces a location, as in "near the left".
    pub location_preposition: String,
}

impl Default for TemplateGrammar {
    fn default() -> Self {
        let mut plurals = BTreeMap::new();
        for (s, p) in [
            ("ball", "balls"),
            ("box", "boxes"),
            ("cup", "cups"),
            ("dog", "dogs"),
            ("cat", "cats"),
            ("bird", "birds"),
            ("puppy", "puppies"),
            ("kitty", "kitties"),
            ("sparrow", "sparrows"),
            ("sphere", "spheres"),
            ("crate", "crates"),
            ("mug", "mugs"),
        ] {
            plurals.insert(s.to_string(), p.to_string());
        }
        let mut action_present = BTreeMap::new();
        action_present.insert("sitting".into(), ("sits".into(), "sit".into()));
        action_present.insert("running".into(), ("runs".into(), "run".into()));
        TemplateGrammar {
            plurals,
            action_present,
            location_preposition: "near".into(),
        }
    }
}

impl TemplateGrammar {
    /// Surface form -> canonical attribute word for every plural and tense
    /// variant this grammar can emit.
    pub fn merge_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        for (s, p) in &self.plurals {
            m.insert(p.clone(), s.clone());
        }
        for (a, (sg, pl)) in &self.action_present {
            m.insert(sg.clone(), a.clone());
            m.insert(pl.clone(), a.clone());
        }
        m
    }

    pub(crate) fn plural(&self, category: &str) -> Result<&str> {
        self.plurals
            .get(category)
            .map(String::as_str)
            .ok_or_else(|| Error::Generation(format!("no plural production for `{category}`")))
    }

    fn noun_phrase(&self, g: &Group, lexicon: &Lexicon) -> Result<Vec<String>> {
        if g.count == 1 {
            return Ok(vec!["a".into(), g.color.clone(), g.category.clone()]);
        }
        let num = lexicon
            .numbers
            .get(g.count - 1)
            .ok_or_else(|| Error::Generation(format!("no count word for {} objects", g.count)))?;
        Ok(vec![
            num.clone(),
            g.color.clone(),
            self.plural(&g.category)?.to_string(),
        ])
    }

    fn copula(g: &Group) -> String {
        if g.count == 1 { "is" } else { "are" }.to_string()
    }

    fn list(&self, groups: &[&Group], lexicon: &Lexicon) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for (i, g) in groups.iter().enumerate() {
            if i > 0 {
                out.push("and".into());
            }
            out.extend(self.noun_phrase(g, lexicon)?);
        }
        Ok(out)
    }

    fn joined(&self, groups: &[&Group], clause: impl Fn(&Group) -> Result<Vec<String>>) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for (i, g) in groups.iter().enumerate() {
            if i > 0 {
                out.push("and".into());
            }
            out.extend(clause(g)?);
        }
        Ok(out)
    }

    fn located(&self, g: &Group, lexicon: &Lexicon) -> Result<Vec<String>> {
        let mut out = self.noun_phrase(g, lexicon)?;
        out.push(Self::copula(g));
        out.push(self.location_preposition.clone());
        out.push("the".into());
        out.push(g.location.clone());
        Ok(out)
    }

    fn acting(&self, g: &Group, lexicon: &Lexicon, progressive: bool) -> Result<Vec<String>> {
        let action = g.action.as_ref().expect("caller checks the action");
        let mut out = self.noun_phrase(g, lexicon)?;
        if progressive {
            out.push(Self::copula(g));
            out.push(action.clone());
        } else {
            let (sg, pl) = self
                .action_present
                .get(action)
                .ok_or_else(|| Error::Generation(format!("no present-tense production for `{action}`")))?;
            out.push(if g.count == 1 { sg.clone() } else { pl.clone() });
        }
        Ok(out)
    }
}

/// Produces the five reference captions of a scene: a list of every object
/// group, every group with its location, every acting group with its action,
/// then random single-template captions.
pub fn generate_captions(
    scene: &Scene,
    grammar: &TemplateGrammar,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    let groups = scene.groups(lexicon);
    if groups.is_empty() {
        return Err(Error::domain(format!("scene {} has no objects", scene.id)));
    }
    // fail fast on any missing production, whatever templates get drawn
    for g in &groups {
        if g.count > 1 {
            grammar.plural(&g.category)?;
        }
        if let Some(a) = &g.action {
            if !grammar.action_present.contains_key(a) {
                return Err(Error::Generation(format!("no production for action `{a}`")));
            }
        }
    }
    let mut rng = rng_from(derive_seed(seed, streams::CAPTION));
    let acting: Vec<&Group> = groups.iter().filter(|g| g.action.is_some()).collect();
    let all: Vec<&Group> = groups.iter().collect();

    // The first captions cover every fact, so later random templates only
    // re-use words already present and the attribute labels stay exact.
    let mut captions = Vec::with_capacity(CAPTIONS_PER_SCENE);
    captions.push(grammar.list(&all, lexicon)?);
    captions.push(grammar.joined(&all, |g| grammar.located(g, lexicon))?);
    if !acting.is_empty() {
        captions.push(grammar.joined(&acting, |g| grammar.acting(g, lexicon, true))?);
    }
    while captions.len() < CAPTIONS_PER_SCENE {
        let template = rng.random_range(0..3);
        let cap = match template {
            0 => {
                let mut subset = all.clone();
                subset.shuffle(&mut rng);
                let k = rng.random_range(1..=subset.len());
                subset.truncate(k);
                grammar.list(&subset, lexicon)?
            }
            1 if !acting.is_empty() => {
                let g = acting.choose(&mut rng).expect("nonempty");
                grammar.acting(g, lexicon, rng.random_bool(0.5))?
            }
            _ => {
                let g = all.choose(&mut rng).expect("nonempty");
                grammar.located(g, lexicon)?
            }
        };
        captions.push(cap);
    }
    Ok(captions)
}
