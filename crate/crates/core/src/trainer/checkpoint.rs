//! Binary checkpoint format and word2vec-style text export.
//!
//! Layout: magic `DWE1`, version as little-endian u16, then sections in a
//! fixed order. Each section is a four-byte tag, a little-endian u64 payload
//! length, and the payload:
//!
//! | tag    | payload |
//! |--------|---------|
//! | `CONF` | config as UTF-8 `key=value` lines |
//! | `VOCB` | word count, then per word (len-prefixed UTF-8, u64 count), then u64 total tokens |
//! | `DICT` | n range, n-grams as (u8 len, symbol bytes), per-character id lists, skipped characters |
//! | `GLYF` | glyph records as in the glyph pack (u32 codepoint + 98 bytes) |
//! | `TABL` | V, \|G\|, d, then word-id, context and n-gram tables as f32 |
//! | `CNNP` | d, then the ten CNN tensors in declaration order as f32 |
//! | `ADAG` | Adagrad accumulators mirroring `TABL` then `CNNP` order |
//! | `CNTR` | u64 epoch, u64 step |
//!
//! All integers are little-endian; counts are u32 unless stated.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::corpus::Vocab;
use crate::error::{DweError, Result};
use crate::eval::{Embeddings, FrozenModel, VectorKind};
use crate::glyph_cnn::{tensor_lens, CnnParams};
use crate::model::{AdagradState, DweModel, EmbeddingTables, Lexicon};
use crate::morphology::{GlyphBitmap, StrokeNgram, StrokeNgramDict, Symbol, GLYPH_BYTES};

use super::{Checkpoint, TrainingConfig};

const MAGIC: &[u8; 4] = b"DWE1";
pub const CHECKPOINT_VERSION: u16 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn floats(&mut self, xs: &[f32]) {
        self.buf.reserve(xs.len() * 4);
        for x in xs {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn section(&mut self, tag: &[u8; 4], body: impl FnOnce(&mut Writer)) {
        let mut inner = Writer { buf: Vec::new() };
        body(&mut inner);
        self.bytes(tag);
        self.u64(inner.buf.len() as u64);
        self.bytes(&inner.buf);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    ctx: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(DweError::Checkpoint(format!("truncated while reading {}", self.ctx)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn ch(&mut self) -> Result<char> {
        let cp = self.u32()?;
        char::from_u32(cp).ok_or_else(|| DweError::Checkpoint(format!("invalid codepoint {cp:#x} in {}", self.ctx)))
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| DweError::Checkpoint("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn section(&mut self, tag: &[u8; 4], ctx: &'static str) -> Result<Reader<'a>> {
        self.ctx = ctx;
        let got = self.take(4)?;
        if got != tag {
            return Err(DweError::Checkpoint(format!(
                "expected section {:?}, found {:?}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(got)
            )));
        }
        let n = self.u64()? as usize;
        let data = self.take(n)?;
        Ok(Reader { data, pos: 0, ctx })
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(DweError::Checkpoint(format!(
                "{} has {} trailing bytes",
                self.ctx,
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.bytes(MAGIC);
    w.bytes(&CHECKPOINT_VERSION.to_le_bytes());

    w.section(b"CONF", |w| w.bytes(ckpt.config.to_kv().as_bytes()));
    w.section(b"VOCB", |w| {
        let v = &ckpt.vocab;
        w.u32(v.len() as u32);
        for (word, &count) in v.words().iter().zip(v.counts()) {
            w.u32(word.len() as u32);
            w.bytes(word.as_bytes());
            w.u64(count);
        }
        w.u64(v.total_tokens());
    });
    w.section(b"DICT", |w| {
        let d = ckpt.lexicon.dict();
        let (lo, hi) = d.n_range();
        w.u32(lo as u32);
        w.u32(hi as u32);
        w.u32(d.len() as u32);
        for g in d.ngrams() {
            w.u8(g.len() as u8);
            for s in g.symbols() {
                w.u8(s.to_byte());
            }
        }
        w.u32(d.per_char().len() as u32);
        for (&c, ids) in d.per_char() {
            w.u32(c as u32);
            w.u32(ids.len() as u32);
            ids.iter().for_each(|&id| w.u32(id));
        }
        w.u32(d.skipped().len() as u32);
        d.skipped().iter().for_each(|&c| w.u32(c as u32));
    });
    w.section(b"GLYF", |w| {
        let g = ckpt.lexicon.glyph_map();
        w.u32(g.len() as u32);
        for (&c, bm) in g {
            w.u32(c as u32);
            w.bytes(&bm.to_bytes());
        }
    });
    let t = &ckpt.model.tables;
    w.section(b"TABL", |w| {
        w.u32(t.vocab_len() as u32);
        w.u32(t.ngram_len() as u32);
        w.u32(t.dim as u32);
        w.floats(&t.word_id);
        w.floats(&t.context);
        w.floats(&t.ngram);
    });
    w.section(b"CNNP", |w| {
        w.u32(ckpt.model.cnn.out_dim() as u32);
        ckpt.model.cnn.tensors().iter().for_each(|x| w.floats(x));
    });
    w.section(b"ADAG", |w| {
        let o = &ckpt.optimizer;
        w.floats(&o.word_id);
        w.floats(&o.context);
        w.floats(&o.ngram);
        o.cnn.tensors().iter().for_each(|x| w.floats(x));
    });
    w.section(b"CNTR", |w| {
        w.u64(ckpt.epoch);
        w.u64(ckpt.step);
    });
    w.buf
}

pub fn checkpoint_from_bytes(data: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader {
        data,
        pos: 0,
        ctx: "header",
    };
    if r.take(4)
        .map_err(|_| DweError::Checkpoint("file too short for a header".into()))?
        != MAGIC
    {
        return Err(DweError::Checkpoint("bad magic; not a DWE checkpoint".into()));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(DweError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }

    let mut s = r.section(b"CONF", "config")?;
    let text =
        std::str::from_utf8(s.take(s.data.len())?).map_err(|_| DweError::Checkpoint("config is not UTF-8".into()))?;
    let config = TrainingConfig::from_kv(text)?;

    let mut s = r.section(b"VOCB", "vocabulary")?;
    let n = s.len()?;
    let mut entries = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = s.len()?;
        let word = std::str::from_utf8(s.take(len)?)
            .map_err(|_| DweError::Checkpoint("vocabulary word is not UTF-8".into()))?
            .to_owned();
        entries.push((word, s.u64()?));
    }
    let total = s.u64()?;
    s.finish()?;
    let vocab = Vocab::from_entries(entries, total).map_err(|e| DweError::Checkpoint(e.to_string()))?;

    let mut s = r.section(b"DICT", "n-gram dictionary")?;
    let (n_min, n_max) = (s.len()?, s.len()?);
    let count = s.len()?;
    let mut ngrams = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = s.u8()? as usize;
        let symbols = s
            .take(len)?
            .iter()
            .map(|&b| Symbol::from_byte(b).ok_or_else(|| DweError::Checkpoint(format!("bad stroke symbol {b}"))))
            .collect::<Result<Vec<_>>>()?;
        ngrams.push(StrokeNgram::new(symbols).map_err(|e| DweError::Checkpoint(e.to_string()))?);
    }
    let mut per_char = BTreeMap::new();
    for _ in 0..s.len()? {
        let c = s.ch()?;
        let k = s.len()?;
        let ids = (0..k).map(|_| s.u32()).collect::<Result<Vec<_>>>()?;
        per_char.insert(c, ids);
    }
    let skipped = (0..s.len()?).map(|_| s.ch()).collect::<Result<Vec<_>>>()?;
    s.finish()?;
    let dict = StrokeNgramDict::from_parts(n_min, n_max, ngrams, per_char, skipped)
        .map_err(|e| DweError::Checkpoint(e.to_string()))?;

    let mut s = r.section(b"GLYF", "glyphs")?;
    let mut glyphs = BTreeMap::new();
    for _ in 0..s.len()? {
        let c = s.ch()?;
        let bytes: &[u8; GLYPH_BYTES] = s.take(GLYPH_BYTES)?.try_into().unwrap();
        glyphs.insert(c, GlyphBitmap::from_bytes(bytes));
    }
    s.finish()?;
    let lexicon = Lexicon::new(&vocab, dict, &glyphs);

    let mut s = r.section(b"TABL", "embedding tables")?;
    let (v, g, d) = (s.len()?, s.len()?, s.len()?);
    if v != vocab.len() || g != lexicon.dict().len() || d != config.dim {
        return Err(DweError::Checkpoint(format!(
            "table shape {v}×{g}×{d} disagrees with vocabulary {}, dictionary {} and dim {}",
            vocab.len(),
            lexicon.dict().len(),
            config.dim
        )));
    }
    let tables = EmbeddingTables {
        dim: d,
        word_id: s.floats(v * d)?,
        context: s.floats(v * d)?,
        ngram: s.floats(g * d)?,
    };
    s.finish()?;

    let mut s = r.section(b"CNNP", "CNN parameters")?;
    let out_dim = s.len()?;
    let lens = tensor_lens(out_dim);
    let tensors = lens.iter().map(|&n| s.floats(n)).collect::<Result<Vec<_>>>()?;
    s.finish()?;
    let cnn = CnnParams::from_tensors(out_dim, tensors)?;
    let model = DweModel::new(tables, cnn, config.channels).map_err(|e| DweError::Checkpoint(e.to_string()))?;

    let mut s = r.section(b"ADAG", "optimizer state")?;
    let word_id = s.floats(v * d)?;
    let context = s.floats(v * d)?;
    let ngram = s.floats(g * d)?;
    let tensors = lens.iter().map(|&n| s.floats(n)).collect::<Result<Vec<_>>>()?;
    s.finish()?;
    let optimizer = AdagradState {
        word_id,
        context,
        ngram,
        cnn: CnnParams::from_tensors(out_dim, tensors)?,
    };

    let mut s = r.section(b"CNTR", "counters")?;
    let (epoch, step) = (s.u64()?, s.u64()?);
    s.finish()?;
    r.ctx = "checkpoint";
    r.finish()?;

    Ok(Checkpoint {
        config,
        vocab,
        lexicon,
        model,
        optimizer,
        epoch,
        step,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_to_bytes(ckpt)).map_err(|e| DweError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| DweError::io(path, e))?;
    checkpoint_from_bytes(&data)
}

/// Writes `V d` followed by one `token v1 … vd` line per vocabulary word.
pub fn write_vectors<W: Write>(mut out: W, ckpt: &Checkpoint, which: VectorKind) -> std::io::Result<()> {
    let frozen = FrozenModel::new(ckpt, which);
    writeln!(out, "{} {}", ckpt.vocab.len(), ckpt.config.dim)?;
    for (id, word) in ckpt.vocab.words().iter().enumerate() {
        out.write_all(word.as_bytes())?;
        for x in frozen.vocab_vector(id as u32) {
            write!(out, " {x:.6}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn export_vectors(ckpt: &Checkpoint, path: impl AsRef<Path>, which: VectorKind) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_vectors(&mut buf, ckpt, which).map_err(|e| DweError::io(path, e))?;
    fs::write(path, buf).map_err(|e| DweError::io(path, e))
}
