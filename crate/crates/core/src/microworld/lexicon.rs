//! Knowledge resources shipped with the micro-world: a small lexical relation
//! graph, low-dimensional word embeddings and an answer taxonomy.

use std::collections::BTreeSet;

use rand_distr::{Distribution, StandardNormal};

use super::{Lexicon, TemplateGrammar};
use crate::error::Result;
use crate::expand::{EmbeddingTable, LexiconGraph, Relation};
use crate::metrics::TaxonomyTree;
use crate::rng::{rng_from, streams, Rng};

const EMBEDDING_DIM: usize = 16;
const EMBEDDING_SEED: u64 = 0x5EED_0F11;

const COLOR_SYNONYMS: [(&str, &str); 5] = [
    ("red", "crimson"),
    ("blue", "navy"),
    ("green", "emerald"),
    ("yellow", "golden"),
    ("white", "ivory"),
];
const MERONYMS: [(&str, &str); 5] = [
    ("dog", "tail"),
    ("cat", "whisker"),
    ("bird", "wing"),
    ("cup", "handle"),
    ("box", "lid"),
];
const TROPONYMS: [(&str, &str); 2] = [("running", "sprinting"), ("sitting", "perching")];

fn hypernym(lexicon: &Lexicon, category: &str) -> &'static str {
    if lexicon.animate.iter().any(|a| a == category) {
        "animal"
    } else {
        "toy"
    }
}

pub fn shipped_lexicon_graph(lexicon: &Lexicon) -> LexiconGraph {
    let mut g = LexiconGraph::new();
    let mut add = |a: &str, b: &str, r| {
        g.add_edge(a, b, r).expect("shipped words are distinct");
    };
    for (w, syns) in &lexicon.synonyms {
        for s in syns {
            add(s, w, Relation::Synonym);
        }
    }
    for c in &lexicon.categories {
        add(c, hypernym(lexicon, c), Relation::Hyponym);
    }
    for (base, syn) in COLOR_SYNONYMS {
        if lexicon.colors.iter().any(|c| c == base) {
            add(syn, base, Relation::Synonym);
        }
    }
    for (whole, part) in MERONYMS {
        if lexicon.categories.iter().any(|c| c == whole) {
            add(part, whole, Relation::Meronym);
        }
    }
    for (base, manner) in TROPONYMS {
        if lexicon.actions.iter().any(|a| a == base) {
            add(manner, base, Relation::Troponym);
        }
    }
    g
}

fn gaussian(rng: &mut Rng) -> Vec<f64> {
    (0..EMBEDDING_DIM).map(|_| StandardNormal.sample(rng)).collect()
}

fn blend(base: &[f64], rng: &mut Rng, spread: f64) -> Vec<f64> {
    base.iter().zip(gaussian(rng)).map(|(b, n)| b + spread * n).collect()
}

/// Embeddings for every word the grammar, lexicon and relation graph use.
/// Related words get correlated vectors, unrelated words independent ones.
pub fn shipped_embeddings(lexicon: &Lexicon, grammar: &TemplateGrammar) -> Result<EmbeddingTable> {
    let mut rng = rng_from(EMBEDDING_SEED ^ streams::LEXICON);
    let mut table = EmbeddingTable::new(EMBEDDING_DIM);
    let mut base_words: BTreeSet<String> = ["a", "and", "is", "are", "the", "there"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    base_words.insert(grammar.location_preposition.clone());
    for list in [
        &lexicon.categories,
        &lexicon.colors,
        &lexicon.actions,
        &lexicon.locations,
        &lexicon.numbers,
    ] {
        base_words.extend(list.iter().cloned());
    }
    for w in &base_words {
        table.insert(w, gaussian(&mut rng))?;
    }
    let graph = shipped_lexicon_graph(lexicon);
    let mut pending: Vec<(String, String, Relation)> = graph.edges().to_vec();
    pending.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    // hypernyms: mean of their members plus noise
    for h in ["animal", "toy"] {
        let members: Vec<&[f64]> = lexicon
            .categories
            .iter()
            .filter(|c| hypernym(lexicon, c) == h)
            .filter_map(|c| table.get(c))
            .collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..EMBEDDING_DIM)
            .map(|k| members.iter().map(|m| m[k]).sum::<f64>() / members.len() as f64)
            .collect();
        let v = blend(&mean, &mut rng, 0.5);
        table.insert(h, v)?;
    }
    for (word, base, rel) in pending {
        if table.get(&word).is_some() {
            continue;
        }
        let spread = match rel {
            Relation::Synonym => 0.35,
            Relation::Troponym => 0.6,
            Relation::Hyponym | Relation::Meronym => 0.9,
        };
        let b = table.get(&base).expect("base words embedded first").to_vec();
        let v = blend(&b, &mut rng, spread);
        table.insert(&word, v)?;
    }
    // synonym plurals share their singular's vector direction
    for (s, p) in &grammar.plurals {
        if table.get(p).is_none() {
            if let Some(v) = table.get(s).map(<[f64]>::to_vec) {
                let v = blend(&v, &mut rng, 0.2);
                table.insert(p, v)?;
            }
        }
    }
    Ok(table)
}

/// Answer taxonomy: entity > {object > {animal, toy} > category > synonym,
/// attribute > {color, number, location} > word}.
pub fn shipped_taxonomy(lexicon: &Lexicon) -> Result<TaxonomyTree> {
    let mut links: Vec<(String, String)> = Vec::new();
    let mut link = |c: &str, p: &str| links.push((c.to_string(), p.to_string()));
    link("object", "entity");
    link("attribute", "entity");
    link("animal", "object");
    link("toy", "object");
    link("hue", "attribute");
    link("quantity", "attribute");
    link("place", "attribute");
    for c in &lexicon.categories {
        link(c, hypernym(lexicon, c));
        for s in lexicon.synonyms.get(c).into_iter().flatten() {
            link(s, c);
        }
    }
    for c in &lexicon.colors {
        link(c, "hue");
    }
    for n in &lexicon.numbers {
        link(n, "quantity");
    }
    for l in &lexicon.locations {
        link(l, "place");
    }
    TaxonomyTree::new("entity", &links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expand::build_similarity;

    #[test]
    fn embeddings_cover_graph_and_lexicon() {
        let lx = Lexicon::default();
        let e = shipped_embeddings(&lx, &TemplateGrammar::default()).unwrap();
        let g = shipped_lexicon_graph(&lx);
        for (a, b, _) in g.edges() {
            assert!(e.get(a).is_some() && e.get(b).is_some(), "{a} {b}");
        }
        for w in lx.categories.iter().chain(&lx.colors).chain(&lx.numbers) {
            assert!(e.get(w).is_some());
        }
        let s = build_similarity(
            &["dog".to_string()],
            &["puppy".to_string(), "red".to_string()],
            &e,
            true,
        )
        .unwrap();
        assert!(s.get(0, 0) > 0.8, "synonyms are close: {}", s.get(0, 0));
        assert!(s.get(0, 0) > s.get(0, 1));
    }

    #[test]
    fn taxonomy_covers_answers() {
        let lx = Lexicon::default();
        let t = shipped_taxonomy(&lx).unwrap();
        for w in lx
            .categories
            .iter()
            .chain(&lx.colors)
            .chain(&lx.numbers)
            .chain(&lx.locations)
        {
            assert!(t.contains(w), "{w}");
        }
        assert_eq!(t.depth("dog"), Some(4));
    }
}
