//! Small synthetic morphology corpora for experiments and tests.
//!
//! Characters are grouped into topics. Characters of a topic share a stroke
//! prefix and an ink block in the glyph, words are built from characters of a
//! single topic, and every sentence draws its words from one topic, so words
//! that share characters also share contexts. Two extra "twin" characters
//! have identical stroke sequences but unrelated glyphs and live in different
//! topics.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{DweError, Result};
use crate::morphology::{save_glyph_pack, GlyphBitmap, StrokeSequence, StrokeTable, GLYPH_SIDE};

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub chars_per_topic: usize,
    pub two_char_words_per_topic: usize,
    pub sentences: usize,
    pub sentence_len: (usize, usize),
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            topics: 4,
            chars_per_topic: 4,
            two_char_words_per_topic: 5,
            sentences: 200,
            sentence_len: (6, 10),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub strokes: StrokeTable,
    pub glyphs: BTreeMap<char, GlyphBitmap>,
    /// Words of each topic.
    pub topic_words: Vec<Vec<String>>,
    /// Characters with identical strokes and different glyphs, used in topics 0 and 1.
    pub twins: (char, char),
}

fn nth_char(i: usize) -> char {
    char::from_u32(0x4E00 + 0x100 + i as u32).expect("inside the CJK block")
}

fn random_strokes(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.gen_range(1..=32)).collect()
}

/// Ink block of a topic: one of four quadrant-like bands.
fn topic_block(topic: usize, r: usize, c: usize) -> bool {
    let half = GLYPH_SIDE / 2;
    match topic % 4 {
        0 => c < half / 2 + 2,
        1 => r < half / 2 + 2,
        2 => c >= GLYPH_SIDE - half / 2 - 2,
        _ => r >= GLYPH_SIDE - half / 2 - 2,
    }
}

impl SyntheticData {
    pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Self {
        assert!(cfg.topics >= 2, "need at least two topics for the twin characters");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut strokes = StrokeTable::new();
        let mut glyphs = BTreeMap::new();
        let mut next = 0usize;
        let mut topic_chars: Vec<Vec<char>> = Vec::new();

        for t in 0..cfg.topics {
            let prefix = random_strokes(&mut rng, 3);
            let mut chars = Vec::new();
            for _ in 0..cfg.chars_per_topic {
                let c = nth_char(next);
                next += 1;
                let mut seq = prefix.clone();
                let extra = rng.gen_range(2..=4);
                seq.extend(random_strokes(&mut rng, extra));
                strokes.insert(c, StrokeSequence::new(seq).expect("codes in range"));
                let density = rng.gen_range(0.15..0.4);
                let glyph = GlyphBitmap::from_fn(|r, col| topic_block(t, r, col) || rng.gen_bool(density));
                glyphs.insert(c, glyph);
                chars.push(c);
            }
            topic_chars.push(chars);
        }

        let twin_a = nth_char(next);
        let twin_b = nth_char(next + 1);
        let twin_seq = StrokeSequence::new(random_strokes(&mut rng, 5)).expect("codes in range");
        strokes.insert(twin_a, twin_seq.clone());
        strokes.insert(twin_b, twin_seq);
        for (t, c) in [(0, twin_a), (1, twin_b)] {
            glyphs.insert(
                c,
                GlyphBitmap::from_fn(|r, col| topic_block(t, r, col) || rng.gen_bool(0.25)),
            );
        }
        topic_chars[0].push(twin_a);
        topic_chars[1].push(twin_b);

        let mut topic_words = Vec::new();
        for chars in &topic_chars {
            let mut words: Vec<String> = chars.iter().map(|c| c.to_string()).collect();
            let mut made = 0;
            let mut attempts = 0;
            while made < cfg.two_char_words_per_topic && attempts < 1000 {
                attempts += 1;
                let a = *chars.choose(&mut rng).unwrap();
                let b = *chars.choose(&mut rng).unwrap();
                let w: String = [a, b].iter().collect();
                if a != b && !words.contains(&w) {
                    words.push(w);
                    made += 1;
                }
            }
            topic_words.push(words);
        }

        let mut sentences = Vec::with_capacity(cfg.sentences);
        for _ in 0..cfg.sentences {
            let words = &topic_words[rng.gen_range(0..cfg.topics)];
            let len = rng.gen_range(cfg.sentence_len.0..=cfg.sentence_len.1);
            sentences.push((0..len).map(|_| words.choose(&mut rng).unwrap().clone()).collect());
        }

        SyntheticData {
            corpus: Corpus { sentences },
            strokes,
            glyphs,
            topic_words,
            twins: (twin_a, twin_b),
        }
    }

    pub fn stroke_table_text(&self) -> String {
        let mut entries: Vec<_> = self.strokes.iter().collect();
        entries.sort_by_key(|(c, _)| **c);
        let mut s = String::from("# synthetic stroke table\n");
        for (c, seq) in entries {
            let codes: Vec<String> = seq.codes().iter().map(u8::to_string).collect();
            s.push_str(&format!("{c}\t{}\n", codes.join(",")));
        }
        s
    }

    pub fn corpus_text(&self) -> String {
        let mut s = String::new();
        for sentence in &self.corpus.sentences {
            s.push_str(&sentence.join(" "));
            s.push('\n');
        }
        s
    }

    /// Writes `corpus.txt`, `strokes.tsv` and `glyphs.bin` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| DweError::Io { path: p, source: e })
        };
        write("corpus.txt", self.corpus_text())?;
        write("strokes.tsv", self.stroke_table_text())?;
        save_glyph_pack(dir.join("glyphs.bin"), &self.glyphs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::morphology::parse_stroke_table;

    #[test]
    fn generated_data_has_expected_shape() {
        let d = SyntheticData::generate(&SyntheticConfig::default(), 1);
        assert_eq!(d.corpus.sentences.len(), 200);
        let vocab = build_vocab(d.corpus.tokens(), 1).unwrap();
        assert!((30..=50).contains(&vocab.len()), "vocab {}", vocab.len());
        let (a, b) = d.twins;
        assert_eq!(d.strokes[&a], d.strokes[&b]);
        assert_ne!(d.glyphs[&a], d.glyphs[&b]);
        assert_eq!(parse_stroke_table(&d.stroke_table_text()).unwrap(), d.strokes);
    }

    #[test]
    fn generation_is_seeded() {
        let a = SyntheticData::generate(&SyntheticConfig::default(), 5);
        let b = SyntheticData::generate(&SyntheticConfig::default(), 5);
        assert_eq!(a.corpus_text(), b.corpus_text());
        assert_eq!(a.glyphs, b.glyphs);
    }
}
