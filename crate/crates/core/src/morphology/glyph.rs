use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DweError, Result};

pub const GLYPH_SIDE: usize = 28;
pub const GLYPH_PIXELS: usize = GLYPH_SIDE * GLYPH_SIDE;
/// 784 bits packed continuously, most significant bit first.
pub const GLYPH_BYTES: usize = GLYPH_PIXELS / 8;

const PACK_MAGIC: &[u8; 4] = b"DWEG";
const PACK_VERSION: u8 = 0x01;

/// A 28×28 one-bit glyph, row-major; 1 = ink.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GlyphBitmap {
    pixels: Box<[u8; GLYPH_PIXELS]>,
}

impl Default for GlyphBitmap {
    fn default() -> Self {
        Self::blank()
    }
}

impl GlyphBitmap {
    pub fn blank() -> Self {
        GlyphBitmap {
            pixels: Box::new([0; GLYPH_PIXELS]),
        }
    }

    pub fn from_pixels(pixels: &[u8]) -> Result<Self> {
        if pixels.len() != GLYPH_PIXELS {
            return Err(DweError::Shape(format!(
                "glyph needs {GLYPH_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(DweError::Shape("glyph pixels must be 0 or 1".into()));
        }
        let mut out = Self::blank();
        out.pixels.copy_from_slice(pixels);
        Ok(out)
    }

    pub fn from_fn(mut ink: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = Self::blank();
        for r in 0..GLYPH_SIDE {
            for c in 0..GLYPH_SIDE {
                out.pixels[r * GLYPH_SIDE + c] = ink(r, c) as u8;
            }
        }
        out
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * GLYPH_SIDE + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, ink: bool) {
        self.pixels[row * GLYPH_SIDE + col] = ink as u8;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels[..]
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    pub fn is_blank(&self) -> bool {
        self.ink_count() == 0
    }

    pub fn to_bytes(&self) -> [u8; GLYPH_BYTES] {
        let mut out = [0u8; GLYPH_BYTES];
        for (i, &p) in self.pixels.iter().enumerate() {
            if p != 0 {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; GLYPH_BYTES]) -> Self {
        let mut out = Self::blank();
        for i in 0..GLYPH_PIXELS {
            out.pixels[i] = (bytes[i / 8] >> (7 - i % 8)) & 1;
        }
        out
    }

    /// Two-character-wide ASCII rendering, one text line per pixel row.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(GLYPH_SIDE * (2 * GLYPH_SIDE + 1));
        for r in 0..GLYPH_SIDE {
            for c in 0..GLYPH_SIDE {
                s.push_str(if self.get(r, c) { "##" } else { ".." });
            }
            s.push('\n');
        }
        s
    }
}

impl fmt::Debug for GlyphBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GlyphBitmap({} ink pixels)", self.ink_count())
    }
}

pub fn write_glyph_pack<W: Write>(mut w: W, glyphs: &BTreeMap<char, GlyphBitmap>) -> std::io::Result<()> {
    w.write_all(PACK_MAGIC)?;
    w.write_all(&[PACK_VERSION])?;
    w.write_all(&(glyphs.len() as u32).to_le_bytes())?;
    for (&c, g) in glyphs {
        w.write_all(&(c as u32).to_le_bytes())?;
        w.write_all(&g.to_bytes())?;
    }
    Ok(())
}

pub fn read_glyph_pack<R: Read>(mut r: R) -> Result<BTreeMap<char, GlyphBitmap>> {
    let err = |m: String| DweError::GlyphPack(m);
    let mut header = [0u8; 9];
    r.read_exact(&mut header).map_err(|_| err("truncated header".into()))?;
    if &header[..4] != PACK_MAGIC {
        return Err(err(format!("bad magic {:?}", &header[..4])));
    }
    if header[4] != PACK_VERSION {
        return Err(err(format!("unsupported version {}", header[4])));
    }
    let count = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let mut glyphs = BTreeMap::new();
    let mut record = [0u8; 4 + GLYPH_BYTES];
    for i in 0..count {
        r.read_exact(&mut record).map_err(|_| {
            err(format!(
                "truncated: header declares {count} records, record {i} is incomplete"
            ))
        })?;
        let cp = u32::from_le_bytes(record[..4].try_into().unwrap());
        let c = char::from_u32(cp).ok_or_else(|| err(format!("invalid codepoint {cp:#x}")))?;
        let bytes: &[u8; GLYPH_BYTES] = record[4..].try_into().unwrap();
        if glyphs.insert(c, GlyphBitmap::from_bytes(bytes)).is_some() {
            return Err(err(format!("duplicate codepoint U+{cp:04X}")));
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| err(e.to_string()))? != 0 {
        return Err(err(format!("trailing bytes after {count} records")));
    }
    Ok(glyphs)
}

pub fn load_glyph_pack(path: impl AsRef<Path>) -> Result<BTreeMap<char, GlyphBitmap>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DweError::io(path, e))?;
    read_glyph_pack(&bytes[..])
}

pub fn save_glyph_pack(path: impl AsRef<Path>, glyphs: &BTreeMap<char, GlyphBitmap>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(9 + glyphs.len() * (4 + GLYPH_BYTES));
    write_glyph_pack(&mut buf, glyphs).map_err(|e| DweError::io(path, e))?;
    fs::write(path, buf).map_err(|e| DweError::io(path, e))
}
