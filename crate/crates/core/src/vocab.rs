//! Attribute vocabulary mining and the language-model word dictionary.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Surface form -> canonical word (plural and tense merging).
pub type MergeMap = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeVocab {
    words: Vec<String>,
    merge_map: MergeMap,
    index: HashMap<String, usize>,
}

impl AttributeVocab {
    pub fn new(words: Vec<String>, merge_map: MergeMap) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::domain(format!("duplicate attribute `{w}`")));
            }
        }
        // keep only merges whose target survived the cut
        let merge_map = merge_map.into_iter().filter(|(_, to)| index.contains_key(to)).collect();
        Ok(AttributeVocab {
            words,
            merge_map,
            index,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn merge_map(&self) -> &MergeMap {
        &self.merge_map
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn canonical<'a>(&'a self, word: &'a str) -> &'a str {
        self.merge_map.get(word).map(String::as_str).unwrap_or(word)
    }

    /// Attribute index of a surface word, after merging.
    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(self.canonical(word)).copied()
    }

    pub fn save(&self, words_path: &Path, merge_path: &Path) -> Result<()> {
        write_lines(words_path, &self.words)?;
        let rows: Vec<String> = self
            .merge_map
            .iter()
            .map(|(from, to)| format!("{from}\t{to}"))
            .collect();
        write_lines(merge_path, &rows)
    }

    pub fn load(words_path: &Path, merge_path: &Path) -> Result<Self> {
        let words = read_lines(words_path)?;
        AttributeVocab::new(words, read_merge_map(merge_path)?)
    }
}

pub fn read_merge_map(path: &Path) -> Result<MergeMap> {
    let mut m = MergeMap::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                detail: "expected two columns".into(),
            });
        }
        m.insert(cols[0].to_string(), cols[1].to_string());
    }
    Ok(m)
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Picks the `c` most frequent canonical words of the corpus. Ties are broken
/// lexicographically.
pub fn mine_attributes(corpus: &[Vec<String>], c: usize, merge_map: &MergeMap) -> Result<AttributeVocab> {
    if corpus.is_empty() {
        return Err(Error::domain("cannot mine attributes from an empty corpus"));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for sentence in corpus {
        for w in sentence {
            let canon = merge_map.get(w).map(String::as_str).unwrap_or(w);
            *freq.entry(canon).or_default() += 1;
        }
    }
    if c == 0 || c > freq.len() {
        return Err(Error::domain(format!(
            "requested {c} attributes but the corpus has {} distinct canonical words",
            freq.len()
        )));
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let words = ranked.iter().take(c).map(|(w, _)| w.to_string()).collect();
    AttributeVocab::new(words, merge_map.clone())
}

/// Binary indicator of which attributes appear in any of a scene's captions.
pub fn ground_truth_attributes(captions: &[Vec<String>], vocab: &AttributeVocab) -> Vec<f64> {
    let mut y = vec![0.0; vocab.len()];
    for w in captions.iter().flatten() {
        if let Some(j) = vocab.index_of(w) {
            y[j] = 1.0;
        }
    }
    y
}

pub const START: usize = 0;
pub const END: usize = 1;
pub const UNK: usize = 2;
const RESERVED: [&str; 3] = ["<start>", "<end>", "<unk>"];

/// Token <-> id dictionary with reserved START, END and UNK ids.
#[derive(Debug, Clone, PartialEq)]
pub struct WordDict {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordDict {
    pub fn from_tokens(words: Vec<String>) -> Result<Self> {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(words);
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::domain(format!("duplicate dictionary token `{t}`")));
            }
        }
        Ok(WordDict { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn words(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    pub fn encode<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<usize> {
        sentence.iter().map(|w| self.id(w.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }

    /// Decodes, dropping START, END and UNK.
    pub fn render(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i >= RESERVED.len())
            .filter_map(|&i| self.token(i).map(str::to_string))
            .collect()
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    /// Hex SHA-256 over the ordered token list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_lines(path, &self.tokens)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = read_lines(path)?;
        if lines.len() < RESERVED.len() || lines[..RESERVED.len()] != RESERVED {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                detail: "dictionary must start with the reserved tokens".into(),
            });
        }
        WordDict::from_tokens(lines[RESERVED.len()..].to_vec())
    }
}

/// Dictionary of every token seen at least `min_count` times, ordered by
/// descending frequency then lexicographically.
pub fn build_word_dict(corpus: &[Vec<String>], min_count: usize) -> Result<WordDict> {
    if min_count == 0 {
        return Err(Error::domain("min_count must be at least 1"));
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::domain("cannot build a dictionary from an empty corpus"));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for w in corpus.iter().flatten() {
        *freq.entry(w.as_str()).or_default() += 1;
    }
    let mut kept: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(w, n)| n >= min_count && !RESERVED.contains(&w))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    WordDict::from_tokens(kept.into_iter().map(|(w, _)| w.to_string()).collect())
}

pub fn tokenize(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}
