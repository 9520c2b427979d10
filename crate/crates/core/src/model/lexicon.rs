use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::Vocab;
use crate::morphology::{cjk_chars, GlyphBitmap, StrokeNgramDict};

/// Per-character morphology resolved against the training vocabulary.
///
/// Every CJK character occurring in a vocabulary word gets a slot. A slot
/// without stroke data has an empty `G(c)`; a slot without a glyph uses a
/// blank bitmap.
#[derive(Clone, Debug)]
pub struct Lexicon {
    dict: StrokeNgramDict,
    glyph_map: BTreeMap<char, GlyphBitmap>,
    chars: Vec<char>,
    slot_of: HashMap<char, u32>,
    glyphs: Vec<GlyphBitmap>,
    has_glyph: Vec<bool>,
    word_chars: Vec<Vec<u32>>,
}

pub fn observed_chars(vocab: &Vocab) -> BTreeSet<char> {
    vocab.words().iter().flat_map(|w| cjk_chars(w)).collect()
}

impl Lexicon {
    /// `glyphs` may contain characters outside the vocabulary; only observed
    /// ones are kept.
    pub fn new(vocab: &Vocab, dict: StrokeNgramDict, glyphs: &BTreeMap<char, GlyphBitmap>) -> Self {
        let observed = observed_chars(vocab);
        let chars: Vec<char> = observed.iter().copied().collect();
        let slot_of: HashMap<char, u32> = chars.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
        let glyph_map: BTreeMap<char, GlyphBitmap> = glyphs
            .iter()
            .filter(|(c, _)| observed.contains(c))
            .map(|(&c, g)| (c, g.clone()))
            .collect();
        let has_glyph: Vec<bool> = chars.iter().map(|c| glyph_map.contains_key(c)).collect();
        let glyph_vec = chars
            .iter()
            .map(|c| glyph_map.get(c).cloned().unwrap_or_default())
            .collect();
        let word_chars = vocab
            .words()
            .iter()
            .map(|w| cjk_chars(w).map(|c| slot_of[&c]).collect())
            .collect();
        Lexicon {
            dict,
            glyph_map,
            chars,
            slot_of,
            glyphs: glyph_vec,
            has_glyph,
            word_chars,
        }
    }

    pub fn dict(&self) -> &StrokeNgramDict {
        &self.dict
    }

    /// Glyphs of the observed characters that had one.
    pub fn glyph_map(&self) -> &BTreeMap<char, GlyphBitmap> {
        &self.glyph_map
    }

    pub fn num_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn slot(&self, c: char) -> Option<u32> {
        self.slot_of.get(&c).copied()
    }

    pub fn char_at(&self, slot: u32) -> char {
        self.chars[slot as usize]
    }

    pub fn ngrams(&self, slot: u32) -> &[u32] {
        self.dict.char_ngrams(self.chars[slot as usize]).unwrap_or(&[])
    }

    pub fn has_strokes(&self, slot: u32) -> bool {
        self.dict.char_ngrams(self.chars[slot as usize]).is_some()
    }

    pub fn glyph(&self, slot: u32) -> &GlyphBitmap {
        &self.glyphs[slot as usize]
    }

    pub fn has_glyph(&self, slot: u32) -> bool {
        self.has_glyph[slot as usize]
    }

    /// Character slots of vocabulary word `id`, CJK characters only, in order.
    pub fn word_chars(&self, id: u32) -> &[u32] {
        &self.word_chars[id as usize]
    }

    pub fn missing_strokes(&self) -> Vec<char> {
        self.dict.skipped().to_vec()
    }

    pub fn missing_glyphs(&self) -> Vec<char> {
        self.chars
            .iter()
            .zip(&self.has_glyph)
            .filter(|(_, &h)| !h)
            .map(|(&c, _)| c)
            .collect()
    }
}
