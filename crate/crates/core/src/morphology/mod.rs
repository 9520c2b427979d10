//! Character morphology: stroke sequences, boundary-marked stroke n-grams,
//! the n-gram dictionary, and glyph bitmaps.

mod glyph;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{DweError, Result};

pub use glyph::{
    load_glyph_pack, read_glyph_pack, save_glyph_pack, write_glyph_pack, GlyphBitmap, GLYPH_BYTES, GLYPH_PIXELS,
    GLYPH_SIDE,
};

/// Number of stroke categories; codes run from 1 to this value inclusive.
pub const STROKE_KINDS: u8 = 32;

/// Lowest and highest codepoint treated as a Chinese character.
pub const CJK_FIRST: u32 = 0x4E00;
pub const CJK_LAST: u32 = 0x9FA5;

pub fn is_cjk(c: char) -> bool {
    (CJK_FIRST..=CJK_LAST).contains(&(c as u32))
}

pub fn cjk_chars(token: &str) -> impl Iterator<Item = char> + '_ {
    token.chars().filter(|&c| is_cjk(c))
}

/// A character's stroke codes in writing order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StrokeSequence(Vec<u8>);

impl StrokeSequence {
    pub fn new(codes: Vec<u8>) -> Result<Self> {
        if codes.is_empty() {
            return Err(DweError::Config("stroke sequence must not be empty".into()));
        }
        if let Some(bad) = codes.iter().find(|&&c| c == 0 || c > STROKE_KINDS) {
            return Err(DweError::Config(format!(
                "stroke code {bad} outside 1..={STROKE_KINDS}"
            )));
        }
        Ok(StrokeSequence(codes))
    }

    pub fn codes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Bos,
    Stroke(u8),
    Eos,
}

impl Symbol {
    /// Single-byte encoding used in checkpoints: BOS = 0, strokes 1..=32, EOS = 255.
    pub fn to_byte(self) -> u8 {
        match self {
            Symbol::Bos => 0,
            Symbol::Stroke(c) => c,
            Symbol::Eos => 255,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Symbol::Bos),
            255 => Some(Symbol::Eos),
            1..=STROKE_KINDS => Some(Symbol::Stroke(b)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrokeNgram(Vec<Symbol>);

impl StrokeNgram {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        let n = symbols.len();
        if n == 0 {
            return Err(DweError::Config("empty stroke n-gram".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            let ok = match s {
                Symbol::Bos => i == 0,
                Symbol::Eos => i == n - 1,
                Symbol::Stroke(c) => (1..=STROKE_KINDS).contains(c),
            };
            if !ok {
                return Err(DweError::Config(format!("malformed stroke n-gram {symbols:?}")));
            }
        }
        Ok(StrokeNgram(symbols))
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for StrokeNgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            match s {
                Symbol::Bos => f.write_str("<")?,
                Symbol::Eos => f.write_str(">")?,
                Symbol::Stroke(c) => {
                    if i > 0 && matches!(self.0[i - 1], Symbol::Stroke(_)) {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
            }
        }
        Ok(())
    }
}

/// Every contiguous window of length `n_min..=n_max` over `<, codes.., >`,
/// ordered by length and then position. Duplicates are kept.
pub fn extract_ngrams(seq: &StrokeSequence, n_min: usize, n_max: usize) -> Vec<StrokeNgram> {
    assert!(1 <= n_min && n_min <= n_max, "invalid n-gram range {n_min}..={n_max}");
    let mut marked = Vec::with_capacity(seq.len() + 2);
    marked.push(Symbol::Bos);
    marked.extend(seq.codes().iter().map(|&c| Symbol::Stroke(c)));
    marked.push(Symbol::Eos);

    let mut out = Vec::new();
    for n in n_min..=n_max.min(marked.len()) {
        for window in marked.windows(n) {
            out.push(StrokeNgram(window.to_vec()));
        }
    }
    out
}

pub type StrokeTable = HashMap<char, StrokeSequence>;

/// Parses `CHAR<TAB>c1,c2,...` lines; `#` lines and blank lines are skipped.
pub fn parse_stroke_table(text: &str) -> Result<StrokeTable> {
    const WHAT: &str = "stroke table";
    let mut table = StrokeTable::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (ch, codes) = line
            .split_once('\t')
            .ok_or_else(|| DweError::parse(WHAT, line_no, "expected CHAR<TAB>codes"))?;
        let mut chars = ch.chars();
        let c = match (chars.next(), chars.next()) {
            (Some(c), None) => c,
            _ => {
                return Err(DweError::parse(
                    WHAT,
                    line_no,
                    format!("expected a single character, got {ch:?}"),
                ))
            }
        };
        let codes = codes
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u8>()
                    .map_err(|_| DweError::parse(WHAT, line_no, format!("bad stroke code {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = StrokeSequence::new(codes).map_err(|e| DweError::parse(WHAT, line_no, e.to_string()))?;
        if table.insert(c, seq).is_some() {
            return Err(DweError::parse(WHAT, line_no, format!("duplicate character {c}")));
        }
    }
    Ok(table)
}

pub fn load_stroke_table(path: impl AsRef<Path>) -> Result<StrokeTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DweError::io(path, e))?;
    parse_stroke_table(&text)
}

/// The stroke n-gram dictionary: global n-gram ids plus the per-character sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrokeNgramDict {
    n_min: usize,
    n_max: usize,
    ngrams: Vec<StrokeNgram>,
    ngram_ids: HashMap<StrokeNgram, u32>,
    per_char: BTreeMap<char, Vec<u32>>,
    skipped: Vec<char>,
}

impl StrokeNgramDict {
    pub fn empty(n_min: usize, n_max: usize) -> Self {
        StrokeNgramDict {
            n_min,
            n_max,
            ngrams: Vec::new(),
            ngram_ids: HashMap::new(),
            per_char: BTreeMap::new(),
            skipped: Vec::new(),
        }
    }

    /// Reassembles a dictionary from stored parts, validating the id invariants.
    pub fn from_parts(
        n_min: usize,
        n_max: usize,
        ngrams: Vec<StrokeNgram>,
        per_char: BTreeMap<char, Vec<u32>>,
        skipped: Vec<char>,
    ) -> Result<Self> {
        let mut ngram_ids = HashMap::with_capacity(ngrams.len());
        for (i, g) in ngrams.iter().enumerate() {
            if ngram_ids.insert(g.clone(), i as u32).is_some() {
                return Err(DweError::Config(format!("duplicate n-gram {g}")));
            }
        }
        for (c, ids) in &per_char {
            if ids.iter().any(|&id| id as usize >= ngrams.len()) {
                return Err(DweError::Config(format!("character {c} references unknown n-gram")));
            }
        }
        Ok(StrokeNgramDict {
            n_min,
            n_max,
            ngrams,
            ngram_ids,
            per_char,
            skipped,
        })
    }

    pub fn n_range(&self) -> (usize, usize) {
        (self.n_min, self.n_max)
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn ngram(&self, id: u32) -> &StrokeNgram {
        &self.ngrams[id as usize]
    }

    pub fn ngrams(&self) -> &[StrokeNgram] {
        &self.ngrams
    }

    pub fn id(&self, ngram: &StrokeNgram) -> Option<u32> {
        self.ngram_ids.get(ngram).copied()
    }

    /// `G(c)`; `None` when the character has no stroke data.
    pub fn char_ngrams(&self, c: char) -> Option<&[u32]> {
        self.per_char.get(&c).map(Vec::as_slice)
    }

    pub fn per_char(&self) -> &BTreeMap<char, Vec<u32>> {
        &self.per_char
    }

    /// Characters that were observed but had no stroke data.
    pub fn skipped(&self) -> &[char] {
        &self.skipped
    }
}

/// Builds `G` over the observed characters. Characters are visited in sorted
/// order and n-gram ids are handed out on first sight.
pub fn build_ngram_dict(table: &StrokeTable, observed: &BTreeSet<char>, n_min: usize, n_max: usize) -> StrokeNgramDict {
    let mut dict = StrokeNgramDict::empty(n_min, n_max);
    for &c in observed {
        let Some(seq) = table.get(&c) else {
            dict.skipped.push(c);
            continue;
        };
        let mut ids = Vec::new();
        for ngram in extract_ngrams(seq, n_min, n_max) {
            let next = dict.ngrams.len() as u32;
            let id = *dict.ngram_ids.entry(ngram.clone()).or_insert_with(|| {
                dict.ngrams.push(ngram);
                next
            });
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        dict.per_char.insert(c, ids);
    }
    dict
}
