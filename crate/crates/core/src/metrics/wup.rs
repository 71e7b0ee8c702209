use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Rooted word tree; the root has depth 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyTree {
    root: String,
    parent: HashMap<String, String>,
    depth: HashMap<String, usize>,
}

impl TaxonomyTree {
    /// Builds a tree from child -> parent links.
    pub fn new(root: &str, links: &[(String, String)]) -> Result<Self> {
        let mut parent = HashMap::new();
        for (c, p) in links {
            if c == root {
                return Err(Error::domain(format!("root `{root}` cannot have a parent")));
            }
            if parent.insert(c.clone(), p.clone()).is_some() {
                return Err(Error::domain(format!("`{c}` has two parents")));
            }
        }
        let mut depth: HashMap<String, usize> = HashMap::new();
        depth.insert(root.to_string(), 1);
        for start in parent.keys() {
            let mut chain = vec![start.as_str()];
            let mut cur = start.as_str();
            let base = loop {
                if let Some(&d) = depth.get(cur) {
                    break d;
                }
                let Some(p) = parent.get(cur) else {
                    return Err(Error::domain(format!("`{cur}` is not connected to root `{root}`")));
                };
                if chain.contains(&p.as_str()) {
                    return Err(Error::domain(format!("cycle through `{p}`")));
                }
                chain.push(p);
                cur = p;
            };
            // chain ends with the node whose depth is known
            let known = chain.len() - 1;
            for (k, node) in chain[..known].iter().enumerate() {
                depth.insert(node.to_string(), base + known - k);
            }
        }
        Ok(TaxonomyTree {
            root: root.to_string(),
            parent,
            depth,
        })
    }

    /// `root <word>` on the first line, then one `child parent` pair per line.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut root = None;
        let mut links = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() || cols[0].starts_with('#') {
                continue;
            }
            let err = |detail: &str| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                detail: detail.to_string(),
            };
            if cols.len() != 2 {
                return Err(err("expected two columns"));
            }
            if cols[0] == "root" && root.is_none() && links.is_empty() {
                root = Some(cols[1].to_string());
            } else if root.is_none() {
                return Err(err("taxonomy must start with a `root <word>` line"));
            } else {
                links.push((cols[0].to_string(), cols[1].to_string()));
            }
        }
        let root = root.ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: 0,
            detail: "missing root line".into(),
        })?;
        TaxonomyTree::new(&root, &links)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut links: Vec<_> = self.parent.iter().collect();
        links.sort_by_key(|(c, p)| (self.depth[*c], (*p).clone(), (*c).clone()));
        let mut out = format!("root {}\n", self.root);
        for (c, p) in links {
            out.push_str(&format!("{c} {p}\n"));
        }
        out
    }

    pub fn contains(&self, word: &str) -> bool {
        self.depth.contains_key(word)
    }

    pub fn depth(&self, word: &str) -> Option<usize> {
        self.depth.get(word).copied()
    }

    fn require(&self, word: &str) -> Result<usize> {
        self.depth(word)
            .ok_or_else(|| Error::domain(format!("`{word}` is not in the taxonomy")))
    }

    pub fn lca<'a>(&'a self, a: &'a str, b: &'a str) -> Result<&'a str> {
        let (mut x, mut y) = (a, b);
        let (mut dx, mut dy) = (self.require(x)?, self.require(y)?);
        while dx > dy {
            x = &self.parent[x];
            dx -= 1;
        }
        while dy > dx {
            y = &self.parent[y];
            dy -= 1;
        }
        while x != y {
            x = &self.parent[x];
            y = &self.parent[y];
        }
        Ok(x)
    }
}

/// Wu-Palmer similarity `2 depth(lca) / (depth(a) + depth(b))`.
pub fn wup_similarity(tree: &TaxonomyTree, a: &str, b: &str) -> Result<f64> {
    let da = tree.require(a)?;
    let db = tree.require(b)?;
    let l = tree.require(tree.lca(a, b)?)?;
    Ok(2.0 * l as f64 / (da + db) as f64)
}

/// Mean per-example WUP score, down-weighted by 0.1 below `threshold`.
pub fn wups<S: AsRef<str>>(predictions: &[S], gold: &[S], tree: &TaxonomyTree, threshold: f64) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::domain("WUPS over an empty set"));
    }
    if predictions.len() != gold.len() {
        return Err(Error::domain("prediction and gold counts differ"));
    }
    let mut total = 0.0;
    for (p, g) in predictions.iter().zip(gold) {
        let w = wup_similarity(tree, p.as_ref(), g.as_ref())?;
        total += if w >= threshold { w } else { 0.1 * w };
    }
    Ok(total / predictions.len() as f64)
}
