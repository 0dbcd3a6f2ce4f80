//! Detection map exports: `row,col,score` CSV, single-band ENVI grid, 8-bit PGM.

use std::fs;
use std::path::Path;

use crate::cube::HsiCube;
use crate::detect::DetectionMap;
use crate::error::{Error, Result};

use super::envi::{read_cube_with_header, write_cube_with_fields};
use super::mask::write_pgm;

/// Writes one `row,col,score` line per scored pixel, image coordinates.
pub fn write_map_csv(map: &DetectionMap, path: &Path) -> Result<()> {
    let mut text = String::from("row,col,score\n");
    for (r, c, s) in map.iter_image() {
        text.push_str(&format!("{r},{c},{s}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a map CSV. The region tested is the bounding box of the listed pixels,
/// which must cover it completely. The detector name is the file stem.
pub fn read_map_csv(path: &Path) -> Result<DetectionMap> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        })?;
    let mut cells = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let bad = || Error::parse(path, format!("row {}: expected row,col,score", i + 2));
        if rec.len() != 3 {
            return Err(bad());
        }
        let r: usize = rec[0].parse().map_err(|_| bad())?;
        let c: usize = rec[1].parse().map_err(|_| bad())?;
        let s: f64 = rec[2].parse().map_err(|_| bad())?;
        cells.push((r, c, s));
    }
    if cells.is_empty() {
        return Err(Error::parse(path, "map has no scored pixels"));
    }
    let r0 = cells.iter().map(|c| c.0).min().unwrap_or(0);
    let c0 = cells.iter().map(|c| c.1).min().unwrap_or(0);
    let h = cells.iter().map(|c| c.0).max().unwrap_or(0) - r0 + 1;
    let w = cells.iter().map(|c| c.1).max().unwrap_or(0) - c0 + 1;
    let mut scores = vec![f64::NAN; h * w];
    for &(r, c, s) in &cells {
        scores[(r - r0) * w + (c - c0)] = s;
    }
    if cells.len() != h * w || scores.iter().any(|v| v.is_nan()) {
        return Err(Error::parse(path, "scored pixels do not form a full rectangle"));
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
    DetectionMap::new(name, h, w, (r0, c0), scores)
}

/// Writes the map as a single-band ENVI cube with the region offset in the header.
pub fn write_map_grid(map: &DetectionMap, path: &Path) -> Result<()> {
    let cube = HsiCube::new(map.height, map.width, 1, map.scores.clone())?;
    write_cube_with_fields(
        &cube,
        path,
        &[
            ("detector", map.detector.clone()),
            ("region row offset", map.row_offset.to_string()),
            ("region col offset", map.col_offset.to_string()),
        ],
    )
}

pub fn read_map_grid(path: &Path) -> Result<DetectionMap> {
    let (cube, header) = read_cube_with_header(path)?;
    if cube.bands() != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "detection grid must have one band, found {}",
            cube.bands()
        )));
    }
    let offset = |key: &str| header.get(key).map_or(Ok(0), |v| {
        v.parse::<usize>().map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("'{key}' is not an integer"),
        })
    });
    let name = header.get("detector").unwrap_or("map").to_string();
    let (ro, co) = (offset("region row offset")?, offset("region col offset")?);
    DetectionMap::new(name, cube.height(), cube.width(), (ro, co), cube.data().to_vec())
}

/// Linear 8-bit rendering of the map over its finite value range, values at
/// or below `floor` drawn black.
pub fn write_map_pgm(map: &DetectionMap, floor: f64, path: &Path) -> Result<()> {
    let shown: Vec<f64> = map.scores.iter().copied().filter(|v| v.is_finite() && *v > floor).collect();
    let lo = shown.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = shown.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pixels: Vec<u8> = map
        .scores
        .iter()
        .map(|&v| {
            if !(v.is_finite() && v > floor) {
                0
            } else if hi > lo {
                (1.0 + 254.0 * (v - lo) / (hi - lo)).round() as u8
            } else {
                255
            }
        })
        .collect();
    write_pgm(path, map.width, map.height, &pixels)
}
