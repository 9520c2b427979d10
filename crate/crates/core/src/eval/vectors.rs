use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{DweError, Result};
use crate::model::{average_features, compose_vector, ChannelMode};
use crate::morphology::cjk_chars;
use crate::trainer::Checkpoint;

/// Which vector a trained model exposes for in-vocabulary words.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VectorKind {
    /// Word id vector plus averaged character features.
    #[default]
    Composed,
    WordId,
}

impl VectorKind {
    pub fn name(self) -> &'static str {
        match self {
            VectorKind::Composed => "composed",
            VectorKind::WordId => "word_id",
        }
    }
}

impl fmt::Display for VectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VectorKind {
    type Err = DweError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "composed" => Ok(VectorKind::Composed),
            "word_id" | "word-id" => Ok(VectorKind::WordId),
            _ => Err(DweError::UnknownName {
                kind: "vector kind",
                name: s.to_owned(),
                available: "composed, word_id".into(),
            }),
        }
    }
}

/// Read-only word vectors.
pub trait Embeddings {
    fn dim(&self) -> usize;
    fn vocab_len(&self) -> usize;
    fn word(&self, id: u32) -> &str;
    fn id(&self, token: &str) -> Option<u32>;
    fn vocab_vector(&self, id: u32) -> &[f64];
    /// Vector for any token; may be derived for tokens outside the vocabulary.
    fn vector(&self, token: &str) -> Result<Vec<f64>>;
}

/// A checkpoint with every vocabulary vector and character feature precomputed.
pub struct FrozenModel<'a> {
    ckpt: &'a Checkpoint,
    kind: VectorKind,
    char_features: Vec<Vec<f32>>,
    vectors: Vec<Vec<f64>>,
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

impl<'a> FrozenModel<'a> {
    pub fn new(ckpt: &'a Checkpoint, kind: VectorKind) -> Self {
        let model = &ckpt.model;
        let lex = &ckpt.lexicon;
        let char_features: Vec<Vec<f32>> = if model.mode.uses_chars() {
            (0..lex.num_chars() as u32)
                .map(|s| model.char_feature(lex, s))
                .collect()
        } else {
            Vec::new()
        };
        let vectors = (0..ckpt.vocab.len() as u32)
            .map(|id| {
                let row = model.tables.word_id_row(id);
                match kind {
                    VectorKind::WordId => widen(row),
                    VectorKind::Composed => {
                        let slots: &[u32] = if model.mode.uses_chars() {
                            lex.word_chars(id)
                        } else {
                            &[]
                        };
                        widen(&compose_vector(
                            row,
                            slots.iter().map(|&s| char_features[s as usize].as_slice()),
                        ))
                    }
                }
            })
            .collect();
        FrozenModel {
            ckpt,
            kind,
            char_features,
            vectors,
        }
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        self.ckpt
    }

    /// Feature of a known character, if the active channels give it one.
    pub fn char_feature(&self, c: char) -> Option<Vec<f64>> {
        let lex = &self.ckpt.lexicon;
        let slot = lex.slot(c)?;
        let usable = match self.ckpt.model.mode {
            ChannelMode::Dual | ChannelMode::StrokeOnly => lex.has_strokes(slot),
            ChannelMode::GlyphOnly => lex.has_glyph(slot),
            ChannelMode::WordOnly => false,
        };
        usable.then(|| widen(&self.char_features[slot as usize]))
    }

    /// Average feature of the usable characters of an unseen token.
    fn oov_vector(&self, token: &str) -> Result<Vec<f64>> {
        let unrepresentable = || DweError::Unrepresentable(token.to_owned());
        if self.kind == VectorKind::WordId {
            return Err(DweError::OutOfVocabulary(token.to_owned()));
        }
        let lex = &self.ckpt.lexicon;
        let slots: Vec<u32> = cjk_chars(token)
            .filter_map(|c| self.char_feature(c).and(lex.slot(c)))
            .collect();
        if slots.is_empty() {
            return Err(unrepresentable());
        }
        let avg = average_features(
            self.dim(),
            slots.iter().map(|&s| self.char_features[s as usize].as_slice()),
        );
        Ok(widen(&avg))
    }
}

impl Embeddings for FrozenModel<'_> {
    fn dim(&self) -> usize {
        self.ckpt.model.dim()
    }

    fn vocab_len(&self) -> usize {
        self.vectors.len()
    }

    fn word(&self, id: u32) -> &str {
        self.ckpt.vocab.word(id)
    }

    fn id(&self, token: &str) -> Option<u32> {
        self.ckpt.vocab.id(token)
    }

    fn vocab_vector(&self, id: u32) -> &[f64] {
        &self.vectors[id as usize]
    }

    fn vector(&self, token: &str) -> Result<Vec<f64>> {
        if token.is_empty() {
            return Err(DweError::Unrepresentable(String::new()));
        }
        match self.id(token) {
            Some(id) => Ok(self.vectors[id as usize].clone()),
            None => self.oov_vector(token),
        }
    }
}

/// Vectors in the word2vec text format: a `count dim` header, then one
/// `token v1 … vd` line per word.
#[derive(Clone, Debug, PartialEq)]
pub struct TextVectors {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
    vectors: Vec<Vec<f64>>,
}

impl TextVectors {
    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "vector file";
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| DweError::parse(WHAT, 1, "empty file"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| DweError::parse(WHAT, 1, "header must be `count dim`"))?;
        let [count, dim] = nums[..] else {
            return Err(DweError::parse(WHAT, 1, "header must be `count dim`"));
        };
        let mut words = Vec::with_capacity(count);
        let mut index = HashMap::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("line is not blank");
            let v: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| DweError::parse(WHAT, i + 1, "bad number"))?;
            if v.len() != dim {
                return Err(DweError::parse(
                    WHAT,
                    i + 1,
                    format!("expected {dim} values, got {}", v.len()),
                ));
            }
            if index.insert(word.to_owned(), words.len() as u32).is_some() {
                return Err(DweError::parse(WHAT, i + 1, format!("duplicate token {word:?}")));
            }
            words.push(word.to_owned());
            vectors.push(v);
        }
        if words.len() != count {
            return Err(DweError::parse(
                WHAT,
                1,
                format!("header says {count} rows, found {}", words.len()),
            ));
        }
        Ok(TextVectors {
            dim,
            words,
            index,
            vectors,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| DweError::io(path, e))?)
    }

    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        let mut text = format!("{} {dim}\n", rows.len());
        for (w, v) in &rows {
            text.push_str(w);
            for x in v {
                text.push_str(&format!(" {x:e}"));
            }
            text.push('\n');
        }
        Self::parse(&text)
    }
}

impl Embeddings for TextVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vocab_len(&self) -> usize {
        self.words.len()
    }

    fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn vocab_vector(&self, id: u32) -> &[f64] {
        &self.vectors[id as usize]
    }

    fn vector(&self, token: &str) -> Result<Vec<f64>> {
        self.id(token)
            .map(|id| self.vectors[id as usize].clone())
            .ok_or_else(|| DweError::OutOfVocabulary(token.to_owned()))
    }
}
