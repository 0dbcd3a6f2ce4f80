//! Ground-truth masks as binary PGM (P5) or CSV grids of 0/1, plus the 8-bit
//! PGM writer shared with image renderings.

use std::fs;
use std::path::Path;

use crate::cube::GroundTruthMask;
use crate::error::{Error, Result};

/// Reads a mask; the format follows the extension (`.pgm` or `.csv`).
pub fn read_mask(path: &Path) -> Result<GroundTruthMask> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => read_mask_pgm(path),
        Some("csv") => read_mask_csv(path),
        _ => Err(Error::UnsupportedFormat(format!(
            "mask {} must be .pgm or .csv",
            path.display()
        ))),
    }
}

pub fn write_mask(mask: &GroundTruthMask, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => write_mask_pgm(mask, path),
        Some("csv") => write_mask_csv(mask, path),
        _ => Err(Error::UnsupportedFormat(format!(
            "mask {} must be .pgm or .csv",
            path.display()
        ))),
    }
}

/// Any nonzero pixel is a target.
pub fn read_mask_pgm(path: &Path) -> Result<GroundTruthMask> {
    let (width, height, pixels) = read_pgm(path)?;
    GroundTruthMask::new(height, width, pixels.iter().map(|&v| v != 0).collect())
}

pub fn write_mask_pgm(mask: &GroundTruthMask, path: &Path) -> Result<()> {
    let pixels: Vec<u8> = mask.flags().iter().map(|&f| if f { 255 } else { 0 }).collect();
    write_pgm(path, mask.width(), mask.height(), &pixels)
}

pub fn read_mask_csv(path: &Path) -> Result<GroundTruthMask> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut flags = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<bool> = line
            .split(',')
            .map(|c| match c.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(path, format!("line {}: expected 0/1, got '{other}'", i + 1))),
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(path, format!("line {}: ragged row", i + 1)));
            }
            _ => {}
        }
        flags.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| Error::parse(path, "empty mask"))?;
    GroundTruthMask::new(height, width, flags)
}

pub fn write_mask_csv(mask: &GroundTruthMask, path: &Path) -> Result<()> {
    let mut text = String::with_capacity(mask.height() * mask.width() * 2);
    for row in 0..mask.height() {
        let cells: Vec<&str> = (0..mask.width())
            .map(|c| if mask.get(row, c) { "1" } else { "0" })
            .collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit binary PGM.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Dimension(format!(
            "PGM {width}x{height} needs {} pixels, got {}",
            width * height,
            pixels.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads an 8-bit binary PGM, returning `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    // Header: magic, width, height, maxval separated by whitespace, '#' comments.
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("truncated PGM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::UnsupportedFormat(format!("PGM magic '{}'", tokens[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| malformed("non-numeric PGM header field"));
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != width * height {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected: (width * height) as u64,
            found: raster.len() as u64,
        });
    }
    Ok((width, height, raster.to_vec()))
}
