//! Corpus ingestion, vocabulary construction, context pairs and negative sampling.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DweError, Result};

/// Word ↔ id mapping with corpus frequencies.
///
/// Ids are dense, assigned by descending frequency with ties broken by the
/// position of the first occurrence in the token stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
}

impl Vocab {
    /// Builds a vocabulary from already filtered `(word, count)` entries,
    /// preserving their order as the id order.
    pub fn from_entries(entries: Vec<(String, u64)>, total_tokens: u64) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (i, (word, count)) in entries.into_iter().enumerate() {
            if index.insert(word.clone(), i as u32).is_some() {
                return Err(DweError::Config(format!("duplicate vocabulary entry {word:?}")));
            }
            words.push(word);
            counts.push(count);
        }
        let sum: u64 = counts.iter().sum();
        if total_tokens < sum {
            return Err(DweError::Config(format!(
                "total_tokens {total_tokens} is smaller than the sum of counts {sum}"
            )));
        }
        Ok(Vocab {
            words,
            counts,
            index,
            total_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of tokens in the stream the vocabulary was built from,
    /// including the ones dropped by `min_count`.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
}

pub fn build_vocab<I, S>(tokens: I, min_count: u64) -> Result<Vocab>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if min_count == 0 {
        return Err(DweError::Config("min_count must be at least 1".into()));
    }
    // word -> (count, first position)
    let mut seen: HashMap<String, (u64, u64)> = HashMap::new();
    let mut total = 0u64;
    for token in tokens {
        let token = token.as_ref();
        let pos = total;
        total += 1;
        match seen.get_mut(token) {
            Some(entry) => entry.0 += 1,
            None => {
                seen.insert(token.to_owned(), (1, pos));
            }
        }
    }

    let mut entries: Vec<(String, u64, u64)> = seen
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_count)
        .map(|(w, (count, first))| (w, count, first))
        .collect();
    if entries.is_empty() {
        return Err(DweError::EmptyVocab { min_count });
    }
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    Vocab::from_entries(entries.into_iter().map(|(w, c, _)| (w, c)).collect(), total)
}

/// A pre-segmented corpus: one sentence per line, tokens separated by spaces.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub sentences: Vec<Vec<String>>,
}

impl Corpus {
    pub fn parse(text: &str) -> Self {
        let sentences = text
            .lines()
            .map(|line| {
                line.split(' ')
                    .filter(|t| !t.is_empty())
                    .map(str::to_owned)
                    .collect::<Vec<_>>()
            })
            .filter(|s| !s.is_empty())
            .collect();
        Corpus { sentences }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DweError::io(path, e))?;
        Ok(Corpus::parse(&text))
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    /// Maps every sentence to vocabulary ids, dropping unknown tokens.
    pub fn to_ids(&self, vocab: &Vocab) -> Vec<Vec<u32>> {
        self.sentences
            .iter()
            .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect::<Vec<_>>())
            .filter(|s: &Vec<u32>| !s.is_empty())
            .collect()
    }
}

/// All `(center, context)` pairs of a sentence, centers left to right and
/// contexts left to right within each center's window.
pub fn context_pairs(sentence: &[u32], window: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    extend_context_pairs(sentence, window, &mut pairs);
    pairs
}

pub fn extend_context_pairs(sentence: &[u32], window: usize, out: &mut Vec<(u32, u32)>) {
    let len = sentence.len();
    for (i, &center) in sentence.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(len.saturating_sub(1));
        for (j, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
            if j != i {
                out.push((center, context));
            }
        }
    }
}

/// Frequent-word subsampling keep probability, `sqrt(t / f)` clipped to 1.
pub fn keep_probability(count: u64, total_tokens: u64, threshold: f64) -> f64 {
    let freq = count as f64 / total_tokens as f64;
    ((threshold / freq).sqrt()).min(1.0)
}

/// Draws negative words from `count^α`, normalized.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
    alpha: f64,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    pub fn new(counts: &[u64], alpha: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(DweError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if counts.is_empty() {
            return Err(DweError::VocabTooSmall(0));
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(alpha)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        // guard the last bucket against rounding below 1
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(NegativeSampler {
            cumulative,
            alpha,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, id: u32) -> f64 {
        let i = id as usize;
        if i == 0 {
            self.cumulative[0]
        } else {
            self.cumulative[i] - self.cumulative[i - 1]
        }
    }

    pub fn sample(&mut self) -> u32 {
        let u: f64 = self.rng.gen();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1) as u32
    }

    /// Draws `count` ids i.i.d., redrawing any draw equal to `exclude`.
    pub fn draw_negatives(&mut self, count: usize, exclude: u32) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(count);
        self.draw_into(count, exclude, &mut out)?;
        Ok(out)
    }

    pub fn draw_into(&mut self, count: usize, exclude: u32, out: &mut Vec<u32>) -> Result<()> {
        if self.cumulative.len() < 2 {
            return Err(DweError::VocabTooSmall(self.cumulative.len()));
        }
        if self.probability(exclude) >= 1.0 {
            return Err(DweError::Config(format!(
                "word {exclude} carries all the sampling mass and cannot be excluded"
            )));
        }
        for _ in 0..count {
            loop {
                let id = self.sample();
                if id != exclude {
                    out.push(id);
                    break;
                }
            }
        }
        Ok(())
    }
}
