//! Spectral library CSV.
//!
//! ```text
//! wavelength,jarosite_1,jarosite_2
//! 0.4046,0.112,0.098
//! 0.4142,0.118,0.101
//! ```
//!
//! The first column is informational; every further column is one atom.

use std::path::Path;

use nalgebra::DMatrix;

use crate::cube::{BandMask, SpectralDictionary};
use crate::error::{Error, Result};

/// Library contents as stored, before normalisation.
#[derive(Debug, Clone)]
pub struct RawLibrary {
    pub wavelengths: Vec<f64>,
    pub labels: Vec<String>,
    /// `bands × atoms`.
    pub values: DMatrix<f64>,
}

pub fn read_library_raw(path: &Path) -> Result<RawLibrary> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 {
        return Err(Error::Empty(format!(
            "{}: spectral library has no atom columns",
            path.display()
        )));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut wavelengths = Vec::new();
    let mut columns: Vec<f64> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let mut cells = record.iter().map(|cell| {
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(path, format!("row {}: non-numeric cell '{cell}'", line + 2))
                })
        });
        // record length equals header length; csv rejects ragged rows
        wavelengths.push(cells.next().transpose()?.unwrap_or(f64::NAN));
        for cell in cells {
            columns.push(cell?);
        }
    }
    if wavelengths.is_empty() {
        return Err(Error::Empty(format!("{}: spectral library has no bands", path.display())));
    }
    let values = DMatrix::from_row_slice(wavelengths.len(), labels.len(), &columns);
    Ok(RawLibrary {
        wavelengths,
        labels,
        values,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths { .. } => Error::parse(path, format!("ragged rows: {e}")),
        _ => Error::parse(path, e.to_string()),
    }
}

/// Loads a library as a dictionary, min-max normalised with the file's global
/// range, then restricted to `band_mask` when given.
pub fn read_spectral_library(path: &Path, band_mask: Option<&BandMask>) -> Result<SpectralDictionary> {
    let raw = read_library_raw(path)?;
    let (lo, hi) = raw
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return Err(Error::DegenerateRange(lo));
    }
    let atoms = raw.values.map(|v| (v - lo) / (hi - lo));
    let dict = SpectralDictionary::new(atoms, raw.labels)?;
    match band_mask {
        Some(mask) => dict.apply_band_mask(mask),
        None => Ok(dict),
    }
}

/// Writes a dictionary in library CSV form. `wavelengths` defaults to 1-based band numbers.
pub fn write_spectral_library(
    dict: &SpectralDictionary,
    wavelengths: Option<&[f64]>,
    path: &Path,
) -> Result<()> {
    if let Some(w) = wavelengths {
        if w.len() != dict.bands() {
            return Err(Error::Dimension(format!(
                "{} wavelengths for {} bands",
                w.len(),
                dict.bands()
            )));
        }
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["wavelength".to_string()];
    header.extend(dict.labels().iter().cloned());
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for band in 0..dict.bands() {
        let wl = wavelengths.map_or((band + 1) as f64, |w| w[band]);
        let mut row = vec![wl.to_string()];
        row.extend(dict.atoms().row(band).iter().map(|v| v.to_string()));
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
