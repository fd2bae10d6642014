//! Binary PGM (P5) reading and writing, 8-bit and 16-bit big-endian.
//!
//! Pixel values are the raw gray levels; no rescaling happens here. Writing
//! rounds to the nearest level and clamps to `[0, maxval]`. The writer emits
//! the canonical header `P5\n<w> <h>\n<maxval>\n`, so files in that form
//! round-trip byte for byte.

use std::fs;
use std::path::Path;

use crate::error::{invalid, RestoreError, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub image: Image,
    pub maxval: u16,
}

fn parse_err(offset: usize, message: impl Into<String>) -> RestoreError {
    RestoreError::Parse {
        offset,
        message: message.into(),
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}")));
        }
        if self.pos - start > 10 {
            return Err(parse_err(start, format!("{what} too large")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u64>()
            .map_err(|_| parse_err(start, format!("bad {what}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pgm> {
    if bytes.len() < 2 {
        return Err(parse_err(0, "file too short for magic number"));
    }
    if &bytes[..2] != b"P5" {
        return Err(parse_err(
            0,
            format!(
                "unsupported magic number {:?}",
                String::from_utf8_lossy(&bytes[..2])
            ),
        ));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(parse_err(cur.pos, "expected whitespace after magic number"));
    }
    let width_at = cur.pos;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(width_at, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(
            maxval_at,
            format!("maxval {maxval} out of range"),
        ));
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(parse_err(
            cur.pos,
            "expected single whitespace after maxval",
        ));
    }
    let data_start = cur.pos + 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bpp))
        .ok_or_else(|| parse_err(width_at, "image dimensions overflow"))?;
    let available = bytes.len() - data_start;
    if available < need {
        return Err(parse_err(
            bytes.len(),
            format!("truncated payload: expected {need} bytes, found {available}"),
        ));
    }
    let payload = &bytes[data_start..data_start + need];
    let pixels: Vec<f64> = if bpp == 1 {
        payload.iter().map(|&b| b as f64).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    };
    for (i, &v) in pixels.iter().enumerate() {
        if v > maxval as f64 {
            return Err(parse_err(
                data_start + i * bpp,
                format!("sample {v} exceeds maxval {maxval}"),
            ));
        }
    }
    Ok(Pgm {
        image: Image::new(width, height, pixels)?,
        maxval: maxval as u16,
    })
}

pub fn encode(image: &Image, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(invalid("maxval must be positive"));
    }
    let header = format!("P5\n{} {}\n{}\n", image.width(), image.height(), maxval);
    let bpp = if maxval < 256 { 1 } else { 2 };
    let mut out = Vec::with_capacity(header.len() + image.len() * bpp);
    out.extend_from_slice(header.as_bytes());
    let top = maxval as f64;
    for &v in image.pixels() {
        let q = v.round().clamp(0.0, top) as u16;
        if bpp == 1 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read(path: impl AsRef<Path>) -> Result<Pgm> {
    decode(&fs::read(path)?)
}

pub fn write(path: impl AsRef<Path>, image: &Image, maxval: u16) -> Result<()> {
    fs::write(path, encode(image, maxval)?)?;
    Ok(())
}
