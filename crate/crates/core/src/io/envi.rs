//! ENVI-style header + raw payload cubes.
//!
//! Writing always produces `data type = 4` (little-endian `f32`) with `bsq`
//! interleave. Reading additionally accepts `bil`/`bip` interleave, data types
//! 2, 4, 5 and 12, and big-endian payloads.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cube::HsiCube;
use crate::error::{Error, Result};

/// Header and payload paths for a cube stored at `path`.
///
/// `scene`, `scene.hdr` and `scene.img` all name the pair `scene.hdr` / `scene.img`.
pub fn cube_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = match path.extension().and_then(|e| e.to_str()) {
        Some("hdr") | Some("img") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    (append_ext(&base, "hdr"), append_ext(&base, "img"))
}

fn append_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Interleave {
    Bsq,
    Bil,
    Bip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataType {
    I16,
    F32,
    F64,
    U16,
}

impl DataType {
    fn from_code(code: u32) -> Option<Self> {
        match code {
            2 => Some(DataType::I16),
            4 => Some(DataType::F32),
            5 => Some(DataType::F64),
            12 => Some(DataType::U16),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            DataType::I16 | DataType::U16 => 2,
            DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }

    fn decode(self, bytes: &[u8], big_endian: bool) -> f64 {
        macro_rules! read {
            ($t:ty, $n:expr) => {{
                let mut buf = [0u8; $n];
                buf.copy_from_slice(bytes);
                if big_endian {
                    <$t>::from_be_bytes(buf) as f64
                } else {
                    <$t>::from_le_bytes(buf) as f64
                }
            }};
        }
        match self {
            DataType::I16 => read!(i16, 2),
            DataType::U16 => read!(u16, 2),
            DataType::F32 => read!(f32, 4),
            DataType::F64 => read!(f64, 8),
        }
    }
}

/// Parsed `key = value` pairs of an ENVI header, keys lower-cased.
#[derive(Debug, Clone, Default)]
pub struct EnviHeader {
    fields: BTreeMap<String, String>,
}

impl EnviHeader {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some(first) if first.trim() == "ENVI" => {}
            _ => return Err(malformed("first line must be 'ENVI'".into())),
        }
        let mut fields = BTreeMap::new();
        let mut pending: Option<(String, String)> = None;
        for line in lines {
            if let Some((key, mut value)) = pending.take() {
                value.push('\n');
                value.push_str(line);
                if line.contains('}') {
                    fields.insert(key, value);
                } else {
                    pending = Some((key, value));
                }
                continue;
            }
            let line = line.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| malformed(format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if value.starts_with('{') && !value.contains('}') {
                pending = Some((key, value));
            } else {
                fields.insert(key, value);
            }
        }
        if let Some((key, _)) = pending {
            return Err(malformed(format!("unterminated brace in '{key}'")));
        }
        Ok(Self { fields })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    fn usize_field(&self, key: &str, path: &Path) -> Result<usize> {
        let raw = self.get(key).ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("missing '{key}'"),
        })?;
        raw.parse().map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("'{key}' is not a non-negative integer: '{raw}'"),
        })
    }

    fn optional_usize(&self, key: &str, path: &Path, default: usize) -> Result<usize> {
        if self.get(key).is_some() {
            self.usize_field(key, path)
        } else {
            Ok(default)
        }
    }
}

/// Reads a cube from an ENVI header/payload pair.
pub fn read_cube(path: &Path) -> Result<HsiCube> {
    read_cube_with_header(path).map(|(cube, _)| cube)
}

/// Like [`read_cube`], also returning the parsed header for extra keys.
pub fn read_cube_with_header(path: &Path) -> Result<(HsiCube, EnviHeader)> {
    let (hdr_path, img_path) = cube_paths(path);
    let text = fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let header = EnviHeader::parse(&text, &hdr_path)?;

    let width = header.usize_field("samples", &hdr_path)?;
    let height = header.usize_field("lines", &hdr_path)?;
    let bands = header.usize_field("bands", &hdr_path)?;
    let code = header.usize_field("data type", &hdr_path)?;
    let dtype = DataType::from_code(code as u32)
        .ok_or_else(|| Error::UnsupportedFormat(format!("ENVI data type {code}")))?;
    let interleave = match header
        .get("interleave")
        .map(|s| s.to_ascii_lowercase())
        .as_deref()
    {
        Some("bsq") => Interleave::Bsq,
        Some("bil") => Interleave::Bil,
        Some("bip") => Interleave::Bip,
        Some(other) => {
            return Err(Error::UnsupportedFormat(format!("interleave '{other}'")));
        }
        None => {
            return Err(Error::MalformedHeader {
                path: hdr_path,
                reason: "missing 'interleave'".into(),
            })
        }
    };
    let big_endian = match header.optional_usize("byte order", &hdr_path, 0)? {
        0 => false,
        1 => true,
        other => return Err(Error::UnsupportedFormat(format!("byte order {other}"))),
    };
    let offset = header.optional_usize("header offset", &hdr_path, 0)?;
    if width == 0 || height == 0 || bands == 0 {
        return Err(Error::MalformedHeader {
            path: hdr_path,
            reason: "zero dimension".into(),
        });
    }

    let payload = fs::read(&img_path).map_err(|e| Error::io(&img_path, e))?;
    let n = height * width * bands;
    let expected = (offset + n * dtype.size()) as u64;
    if payload.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: img_path,
            expected,
            found: payload.len() as u64,
        });
    }
    let body = &payload[offset..];
    let sz = dtype.size();
    let mut data = vec![0.0; n];
    for (k, chunk) in body.chunks_exact(sz).enumerate() {
        let (row, col, band) = match interleave {
            Interleave::Bsq => (k / width % height, k % width, k / (width * height)),
            Interleave::Bil => (k / (width * bands), k % width, k / width % bands),
            Interleave::Bip => (k / (width * bands), k / bands % width, k % bands),
        };
        data[(row * width + col) * bands + band] = dtype.decode(chunk, big_endian);
    }
    let cube = HsiCube::new(height, width, bands, data)?;
    Ok((cube, header))
}

/// Writes `cube` as a little-endian `f32` BSQ payload plus ENVI header.
pub fn write_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    write_cube_with_fields(cube, path, &[])
}

/// Writes a cube, appending extra `key = value` lines to the header.
pub fn write_cube_with_fields(cube: &HsiCube, path: &Path, extra: &[(&str, String)]) -> Result<()> {
    let (hdr_path, img_path) = cube_paths(path);
    let (h, w, p) = (cube.height(), cube.width(), cube.bands());
    let mut header = format!(
        "ENVI\ndescription = {{hsitd cube}}\nsamples = {w}\nlines = {h}\nbands = {p}\n\
         header offset = 0\nfile type = ENVI Standard\ndata type = 4\ninterleave = bsq\nbyte order = 0\n"
    );
    for (k, v) in extra {
        header.push_str(&format!("{k} = {v}\n"));
    }
    let mut payload = Vec::with_capacity(h * w * p * 4);
    for band in 0..p {
        for row in 0..h {
            for col in 0..w {
                payload.extend_from_slice(&(cube.get(row, col, band) as f32).to_le_bytes());
            }
        }
    }
    if let Some(dir) = hdr_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&hdr_path, header).map_err(|e| Error::io(&hdr_path, e))?;
    fs::write(&img_path, payload).map_err(|e| Error::io(&img_path, e))?;
    Ok(())
}
