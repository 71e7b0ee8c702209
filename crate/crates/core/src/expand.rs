//! Knowledge-sourced attribute expansion: candidate selection over a lexicon
//! relation graph, an embedding similarity matrix, and max-pool projection of
//! an attribute vector onto the expanded vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::read_lines;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Synonym,
    Hyponym,
    Meronym,
    Troponym,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Synonym => "synonym",
            Relation::Hyponym => "hyponym",
            Relation::Meronym => "meronym",
            Relation::Troponym => "troponym",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "synonym" => Relation::Synonym,
            "hyponym" => Relation::Hyponym,
            "meronym" => Relation::Meronym,
            "troponym" => Relation::Troponym,
            _ => return None,
        })
    }
}

/// Undirected word graph labelled with lexical relations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexiconGraph {
    edges: Vec<(String, String, Relation)>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl LexiconGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_edge(&mut self, a: &str, b: &str, rel: Relation) -> Result<()> {
        if a == b {
            return Err(Error::domain(format!("self-loop on `{a}`")));
        }
        self.edges.push((a.to_string(), b.to_string(), rel));
        self.adjacency.entry(a.into()).or_default().insert(b.into());
        self.adjacency.entry(b.into()).or_default().insert(a.into());
        Ok(())
    }

    pub fn neighbors(&self, word: &str) -> impl Iterator<Item = &str> {
        self.adjacency
            .get(word)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn edges(&self) -> &[(String, String, Relation)] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Three whitespace-separated columns per line: word, word, relation.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut g = LexiconGraph::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let err = |detail: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                detail,
            };
            if cols.len() != 3 {
                return Err(err("expected `word word relation`".into()));
            }
            let rel = Relation::parse(cols[2]).ok_or_else(|| err(format!("unknown relation `{}`", cols[2])))?;
            g.add_edge(cols[0], cols[1], rel).map_err(|e| err(e.to_string()))?;
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        self.edges
            .iter()
            .map(|(a, b, r)| format!("{a} {b} {}\n", r.as_str()))
            .collect()
    }
}

/// Word vectors of a fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    order: Vec<String>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, word: &str, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::domain(format!(
                "embedding for `{word}` has dimension {} (expected {})",
                v.len(),
                self.dim
            )));
        }
        if v.iter().all(|&x| x == 0.0) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain(format!("embedding for `{word}` is degenerate")));
        }
        if self.vectors.insert(word.to_string(), v).is_none() {
            self.order.push(word.to_string());
        }
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// One word per line followed by `dim` whitespace-separated decimals.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            let mut cols = line.split_whitespace();
            let Some(word) = cols.next() else { continue };
            let err = |detail: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                detail,
            };
            let v = cols
                .map(|c| c.parse::<f64>().map_err(|e| err(e.to_string())))
                .collect::<Result<Vec<f64>>>()?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(v.len()));
            t.insert(word, v).map_err(|e| err(e.to_string()))?;
        }
        table.ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: 0,
            detail: "embedding file is empty".into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.order {
            out.push_str(w);
            for x in &self.vectors[w] {
                out.push(' ');
                out.push_str(&format!("{x:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// The attribute words, followed (lexicographically) by every word directly
/// linked to an attribute in `graph` that occurs in at least `min_q`
/// training questions.
pub fn select_candidates(
    graph: &LexiconGraph,
    att_vocab: &[String],
    question_corpus: &[Vec<String>],
    min_q: usize,
) -> Vec<String> {
    let att: BTreeSet<&str> = att_vocab.iter().map(String::as_str).collect();
    let linked: BTreeSet<&str> = att
        .iter()
        .flat_map(|a| graph.neighbors(a))
        .filter(|w| !att.contains(w))
        .collect();
    // number of training questions mentioning each linked word
    let mut q_count: BTreeMap<&str, usize> = BTreeMap::new();
    for q in question_corpus {
        let uniq: BTreeSet<&str> = q.iter().map(String::as_str).collect();
        for w in uniq {
            if linked.contains(w) {
                *q_count.entry(w).or_default() += 1;
            }
        }
    }
    let mut out: Vec<String> = att_vocab.to_vec();
    out.extend(
        linked
            .into_iter()
            .filter(|w| q_count.get(w).copied().unwrap_or(0) >= min_q)
            .map(str::to_string),
    );
    out
}

/// Reads a word list file (one word per line).
pub fn load_word_list(path: &Path) -> Result<Vec<String>> {
    read_lines(path)
}

/// M x N similarity between attribute words (rows) and expanded words
/// (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from explicit values, row-major.
    pub fn from_values(rows: Vec<String>, cols: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows.len() * cols.len() {
            return Err(Error::domain(format!(
                "similarity data has {} entries for a {}x{} matrix",
                data.len(),
                rows.len(),
                cols.len()
            )));
        }
        Ok(SimilarityMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols.len() + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity between embeddings, clamped at zero when `clamp` is set;
/// identical words score exactly 1.
pub fn build_similarity(
    att_vocab: &[String],
    kb_vocab: &[String],
    embeddings: &EmbeddingTable,
    clamp: bool,
) -> Result<SimilarityMatrix> {
    let lookup = |w: &String| {
        embeddings
            .get(w)
            .ok_or_else(|| Error::domain(format!("no embedding for `{w}`")))
    };
    let row_vecs = att_vocab.iter().map(lookup).collect::<Result<Vec<_>>>()?;
    let col_vecs = kb_vocab.iter().map(lookup).collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(att_vocab.len() * kb_vocab.len());
    for (i, r) in row_vecs.iter().enumerate() {
        for (j, c) in col_vecs.iter().enumerate() {
            let s = if att_vocab[i] == kb_vocab[j] {
                1.0
            } else {
                let s = cosine(r, c);
                if clamp {
                    s.max(0.0)
                } else {
                    s
                }
            };
            data.push(s);
        }
    }
    SimilarityMatrix::from_values(att_vocab.to_vec(), kb_vocab.to_vec(), data)
}

/// `v_kb[j] = max_i att[i] * S[i][j]`.
pub fn expand_vector(att: &[f64], s: &SimilarityMatrix) -> Result<Vec<f64>> {
    let (m, n) = s.shape();
    if att.len() != m {
        return Err(Error::domain(format!(
            "attribute vector has length {} but the similarity matrix has {m} rows",
            att.len()
        )));
    }
    if m == 0 {
        return Ok(vec![0.0; n]);
    }
    let mut out = vec![f64::NEG_INFINITY; n];
    for (i, &a) in att.iter().enumerate() {
        let row = &s.data[i * n..(i + 1) * n];
        for (o, &sij) in out.iter_mut().zip(row) {
            let v = a * sij;
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}
