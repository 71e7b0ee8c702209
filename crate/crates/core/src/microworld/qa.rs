use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{GeneratorConfig, Group, Scene, TemplateGrammar};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Object,
    Number,
    Color,
    Location,
}

impl QuestionType {
    pub const ALL: [QuestionType; 4] = [
        QuestionType::Object,
        QuestionType::Number,
        QuestionType::Color,
        QuestionType::Location,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Object => "object",
            QuestionType::Number => "number",
            QuestionType::Color => "color",
            QuestionType::Location => "location",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: u64,
    pub scene_id: u64,
    pub question: Vec<String>,
    pub answer: Vec<String>,
    pub question_type: QuestionType,
    /// The question names its object through a synonym.
    #[serde(default)]
    pub synonym: bool,
}

impl QAExample {
    pub fn is_single_word(&self) -> bool {
        self.answer.len() == 1
    }
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Generates one single-word and one sentence question per question type,
/// each about a randomly chosen object group of the scene.
pub fn generate_qa(
    scene: &Scene,
    config: &GeneratorConfig,
    grammar: &TemplateGrammar,
    seed: u64,
) -> Result<Vec<QAExample>> {
    let lx = &config.lexicon;
    let groups = scene.groups(lx);
    if groups.is_empty() {
        return Err(Error::domain(format!("scene {} has no objects", scene.id)));
    }
    let mut rng = rng_from(derive_seed(seed, streams::QA));
    let mut out = Vec::with_capacity(8);
    for qt in QuestionType::ALL {
        let g: &Group = groups.choose(&mut rng).expect("nonempty");
        let mut referent = g.category.clone();
        let mut synonym = false;
        if qt != QuestionType::Object && rng.random_bool(config.synonym_rate) {
            if let Some(s) = lx.synonyms.get(&g.category).and_then(|s| s.choose(&mut rng)) {
                referent = s.clone();
                synonym = true;
            }
        }
        let plural = grammar.plural(&referent)?.to_string();
        let count_word = lx
            .numbers
            .get(g.count - 1)
            .ok_or_else(|| Error::Generation(format!("no count word for {}", g.count)))?;
        let (noun, cop) = if g.count == 1 {
            (referent.as_str(), "is")
        } else {
            (plural.as_str(), "are")
        };
        let (question, single, sentence) = match qt {
            QuestionType::Object => {
                let np = if g.count == 1 {
                    format!("a {} {}", g.color, g.category)
                } else {
                    format!("{} {} {}", count_word, g.color, grammar.plural(&g.category)?)
                };
                (format!("what is near the {}", g.location), g.category.clone(), np)
            }
            QuestionType::Number => (
                format!("how many {plural} are there"),
                count_word.clone(),
                format!("there {cop} {count_word} {noun}"),
            ),
            QuestionType::Color => (
                format!("what color {cop} the {noun}"),
                g.color.clone(),
                format!("the {noun} {cop} {}", g.color),
            ),
            QuestionType::Location => (
                format!("where {cop} the {noun}"),
                g.location.clone(),
                format!("the {noun} {cop} {} the {}", grammar.location_preposition, g.location),
            ),
        };
        let question = words(&question);
        for answer in [vec![single], words(&sentence)] {
            out.push(QAExample {
                id: 0,
                scene_id: scene.id,
                question: question.clone(),
                answer,
                question_type: qt,
                synonym,
            });
        }
    }
    for (k, ex) in out.iter_mut().enumerate() {
        ex.id = scene.id * 100 + k as u64;
    }
    Ok(out)
}
