//! Single-channel PGM (P2 ASCII / P5 binary) with maxval up to 255.

use super::ScalarField;
use crate::error::{invalid, Error, Result};

pub const PGM_MAXVAL: u32 = 255;

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if start >= self.data.len() {
                format_err(start, format!("unexpected end of data reading {what}"))
            } else {
                format_err(start, format!("expected decimal {what}"))
            });
        }
        let text = std::str::from_utf8(&self.data[start..self.pos])
            .map_err(|_| format_err(start, "bad digits"))?;
        text.parse::<u32>()
            .map_err(|_| format_err(start, format!("{what} out of range")))
    }
}

/// Parses a P2 or P5 image; samples are scaled to `[0, 1]` by `maxval`.
pub fn read_pgm(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < 2 {
        return Err(format_err(0, "missing magic number"));
    }
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(format_err(0, "magic number must be P2 or P5")),
    };
    let mut cur = Cursor {
        data: bytes,
        pos: 2,
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err(maxval_at, "image dimensions must be positive"));
    }
    if maxval == 0 || maxval > PGM_MAXVAL {
        return Err(format_err(
            maxval_at,
            format!("maxval {maxval} not in 1..=255"),
        ));
    }
    let n = width * height;
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(n);

    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(format_err(cur.pos, "expected whitespace after maxval"));
        }
        let start = cur.pos + 1;
        if bytes.len() < start + n {
            return Err(format_err(
                bytes.len(),
                format!("truncated raster: need {n} bytes after offset {start}"),
            ));
        }
        for (k, &b) in bytes[start..start + n].iter().enumerate() {
            if b as u32 > maxval {
                return Err(format_err(
                    start + k,
                    format!("sample {b} exceeds maxval {maxval}"),
                ));
            }
            values.push(b as f64 / scale);
        }
    } else {
        for _ in 0..n {
            cur.skip_ws_and_comments();
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(format_err(
                    at,
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            values.push(v as f64 / scale);
        }
    }
    ScalarField::new(width, height, values)
}

/// Maps a value in `[0, 1]` to `0..=255`, rounding half up.
pub fn quantize(v: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("pixel value {v} outside [0, 1]")));
    }
    Ok((v * PGM_MAXVAL as f64 + 0.5).floor() as u8)
}

/// Encodes a field with values in `[0, 1]` as binary P5, maxval 255.
pub fn write_pgm(u: &ScalarField) -> Result<Vec<u8>> {
    let header = format!("P5\n{} {}\n{}\n", u.width(), u.height(), PGM_MAXVAL);
    let mut out = Vec::with_capacity(header.len() + u.len());
    out.extend_from_slice(header.as_bytes());
    for &v in u.values() {
        out.push(quantize(v)?);
    }
    Ok(out)
}
