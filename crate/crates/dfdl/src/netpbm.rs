//! Minimal binary netpbm support: 8-bit PGM (P5) and PPM (P6).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A decoded 8-bit netpbm image. RGB pixels are interleaved r,g,b.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnmImage {
    Gray {
        width: usize,
        height: usize,
        maxval: u8,
        pixels: Vec<u8>,
    },
    Rgb {
        width: usize,
        height: usize,
        maxval: u8,
        pixels: Vec<u8>,
    },
}

impl PnmImage {
    pub fn width(&self) -> usize {
        match self {
            PnmImage::Gray { width, .. } | PnmImage::Rgb { width, .. } => *width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            PnmImage::Gray { height, .. } | PnmImage::Rgb { height, .. } => *height,
        }
    }
}

/// Reads a binary PGM or PPM file.
pub fn read_pnm(path: &Path) -> Result<PnmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pnm(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses P5/P6 bytes. Header tokens may be separated by any whitespace
/// and `#` comments; exactly one whitespace byte separates the maxval
/// from the raster. Bytes after the raster are ignored.
pub fn parse_pnm(bytes: &[u8]) -> Result<PnmImage> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    let channels = match magic {
        b"P5" => 1usize,
        b"P6" => 3usize,
        other => {
            return Err(Error::Format(format!(
                "unsupported netpbm magic {:?}, expected P5 or P6",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = cursor.int("width")?;
    let height = cursor.int("height")?;
    let maxval = cursor.int("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "unsupported bit depth: maxval {maxval}, only 8-bit images are handled"
        )));
    }
    // Exactly one whitespace byte before the raster.
    match cursor.bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::Format("missing whitespace before raster".into())),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let raster = &cursor.bytes[cursor.pos..];
    if raster.len() < needed {
        return Err(Error::Format(format!(
            "truncated raster: need {needed} bytes, have {}",
            raster.len()
        )));
    }
    let pixels = raster[..needed].to_vec();
    let maxval = maxval as u8;
    Ok(if channels == 1 {
        PnmImage::Gray {
            width,
            height,
            maxval,
            pixels,
        }
    } else {
        PnmImage::Rgb {
            width,
            height,
            maxval,
            pixels,
        }
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_separators(&mut self) {
        loop {
            while self
                .bytes
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_whitespace())
            {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn token(&mut self) -> Result<&[u8]> {
        self.skip_separators();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn int(&mut self, what: &str) -> Result<usize> {
        let token = self.token()?;
        std::str::from_utf8(token)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::Format(format!(
                    "invalid {what} {:?}",
                    String::from_utf8_lossy(token)
                ))
            })
    }
}

/// Writes an 8-bit binary PGM with maxval 255.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::InvalidInput(format!(
            "{} pixels for a {width}x{height} PGM",
            pixels.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit binary PPM with maxval 255; pixels interleaved r,g,b.
pub fn write_ppm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != 3 * width * height {
        return Err(Error::InvalidInput(format!(
            "{} bytes for a {width}x{height} PPM",
            pixels.len()
        )));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
