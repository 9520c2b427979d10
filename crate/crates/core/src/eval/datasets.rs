use std::fs;
use std::path::Path;

use crate::error::{DweError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityRecord {
    pub word_a: String,
    pub word_b: String,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimilarityDataset {
    pub records: Vec<SimilarityRecord>,
}

impl SimilarityDataset {
    /// `word_a<TAB>word_b<TAB>score` per line; blank and `#` lines skipped.
    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "similarity dataset";
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [a, b, s] = fields[..] else {
                return Err(DweError::parse(WHAT, i + 1, "expected word_a<TAB>word_b<TAB>score"));
            };
            let score: f64 = s
                .trim()
                .parse()
                .map_err(|_| DweError::parse(WHAT, i + 1, format!("bad score {s:?}")))?;
            if !score.is_finite() || a.is_empty() || b.is_empty() {
                return Err(DweError::parse(WHAT, i + 1, "empty word or non-finite score"));
            }
            records.push(SimilarityRecord {
                word_a: a.to_owned(),
                word_b: b.to_owned(),
                score,
            });
        }
        Ok(SimilarityDataset { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| DweError::io(path, e))?)
    }
}

/// `a : b = h : t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalogyQuad {
    pub a: String,
    pub b: String,
    pub h: String,
    pub t: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnalogyDataset {
    pub groups: Vec<(String, Vec<AnalogyQuad>)>,
}

impl AnalogyDataset {
    /// `: group_name` headers followed by `a b h t` lines. Quadruples before
    /// the first header go to a group named `default`.
    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "analogy dataset";
        let mut groups: Vec<(String, Vec<AnalogyQuad>)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                let name = name.trim();
                if name.is_empty() {
                    return Err(DweError::parse(WHAT, i + 1, "empty group name"));
                }
                if groups.iter().any(|(g, _)| g == name) {
                    return Err(DweError::parse(WHAT, i + 1, format!("duplicate group {name:?}")));
                }
                groups.push((name.to_owned(), Vec::new()));
                continue;
            }
            let w: Vec<&str> = line.split_whitespace().collect();
            let [a, b, h, t] = w[..] else {
                return Err(DweError::parse(WHAT, i + 1, "expected four words `a b h t`"));
            };
            if groups.is_empty() {
                groups.push(("default".to_owned(), Vec::new()));
            }
            groups.last_mut().unwrap().1.push(AnalogyQuad {
                a: a.to_owned(),
                b: b.to_owned(),
                h: h.to_owned(),
                t: t.to_owned(),
            });
        }
        Ok(AnalogyDataset { groups })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| DweError::io(path, e))?)
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|(_, q)| q.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
