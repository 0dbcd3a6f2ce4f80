//! Cube and matrix data model.
//!
//! An [`HsiCube`] keeps its samples band-interleaved-by-pixel in row-major
//! spatial order, so `pixel(row, col)` is a contiguous slice. Solver code works
//! on a [`SceneMatrix`], the `e × p` flattening of the cube where pixel rows are
//! scanned **column-major** over the spatial grid: the pixel at `(row, col)` of
//! an `h × w` image lands on matrix row `col * h + row`.

use nalgebra::{DMatrix, DVectorView};

use crate::error::{Error, Result};

/// Matrix row holding pixel `(row, col)` of an image with `height` rows.
#[inline]
pub fn scan_index(row: usize, col: usize, height: usize) -> usize {
    col * height + row
}

/// Inverse of [`scan_index`].
#[inline]
pub fn scan_position(index: usize, height: usize) -> (usize, usize) {
    (index % height, index / height)
}

/// Value range convention for [`HsiCube::normalize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// One min/max over every sample of the cube.
    #[default]
    Global,
    /// Independent min/max for each band.
    PerBand,
}

/// An `h × w × p` reflectance cube.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl HsiCube {
    /// Builds a cube from band-interleaved-by-pixel, row-major samples.
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Dimension(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height * width * bands;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "cube {height}x{width}x{bands} needs {expected} samples, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite sample {} at offset {i}",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, bands: usize) -> Result<Self> {
        Self::new(height, width, bands, vec![0.0; height * width * bands])
    }

    /// Builds a cube by evaluating `f(row, col, band)` for every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * bands);
        for row in 0..height {
            for col in 0..width {
                for band in 0..bands {
                    data.push(f(row, col, band));
                }
            }
        }
        Self::new(height, width, bands, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    /// Raw samples, band-interleaved-by-pixel in row-major order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[(row * self.width + col) * self.bands + band]
    }

    /// Spectrum of pixel `(row, col)`.
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.bands;
        &self.data[start..start + self.bands]
    }

    /// Smallest and largest sample.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Rearranges the cube into an `e × p` matrix using the column-major pixel scan.
    pub fn flatten(&self) -> SceneMatrix {
        let h = self.height;
        let matrix = DMatrix::from_fn(self.pixel_count(), self.bands, |r, j| {
            let (row, col) = scan_position(r, h);
            self.get(row, col, j)
        });
        SceneMatrix {
            matrix,
            height: self.height,
            width: self.width,
        }
    }

    /// Affine map of the global value range onto `[0, 1]`.
    pub fn normalize_unit_interval(&self) -> Result<HsiCube> {
        let (lo, hi) = self.min_max();
        if hi <= lo {
            return Err(Error::DegenerateRange(lo));
        }
        let span = hi - lo;
        let data = self.data.iter().map(|&v| (v - lo) / span).collect();
        Ok(Self { data, ..*self })
    }

    /// Per-band variant of [`normalize_unit_interval`](Self::normalize_unit_interval).
    pub fn normalize_per_band(&self) -> Result<HsiCube> {
        let p = self.bands;
        let mut lo = vec![f64::INFINITY; p];
        let mut hi = vec![f64::NEG_INFINITY; p];
        for px in self.data.chunks_exact(p) {
            for (j, &v) in px.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        if let Some(j) = (0..p).find(|&j| hi[j] <= lo[j]) {
            return Err(Error::DegenerateRange(lo[j]));
        }
        let mut data = self.data.clone();
        for px in data.chunks_exact_mut(p) {
            for (j, v) in px.iter_mut().enumerate() {
                *v = (*v - lo[j]) / (hi[j] - lo[j]);
            }
        }
        Ok(Self { data, ..*self })
    }

    pub fn normalize(&self, scope: Normalization) -> Result<HsiCube> {
        match scope {
            Normalization::Global => self.normalize_unit_interval(),
            Normalization::PerBand => self.normalize_per_band(),
        }
    }

    /// Keeps only the bands listed in `mask`, in order.
    pub fn apply_band_mask(&self, mask: &BandMask) -> Result<HsiCube> {
        if mask.original_bands() != self.bands {
            return Err(Error::Dimension(format!(
                "band mask is for {} bands, cube has {}",
                mask.original_bands(),
                self.bands
            )));
        }
        let kept = mask.kept();
        let mut data = Vec::with_capacity(self.pixel_count() * kept.len());
        for px in self.data.chunks_exact(self.bands) {
            data.extend(kept.iter().map(|&j| px[j]));
        }
        HsiCube::new(self.height, self.width, kept.len(), data)
    }
}

/// `e × p` matrix view of a cube, rows in column-major pixel scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMatrix {
    matrix: DMatrix<f64>,
    height: usize,
    width: usize,
}

impl SceneMatrix {
    pub fn new(matrix: DMatrix<f64>, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || matrix.ncols() == 0 {
            return Err(Error::Dimension("scene matrix must be non-empty".into()));
        }
        if height * width != matrix.nrows() {
            return Err(Error::Dimension(format!(
                "origin shape {height}x{width} does not match {} matrix rows",
                matrix.nrows()
            )));
        }
        Ok(Self {
            matrix,
            height,
            width,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.matrix.ncols()
    }

    /// Reshapes back to a cube; inverse of [`HsiCube::flatten`].
    pub fn unflatten(&self) -> Result<HsiCube> {
        let h = self.height;
        HsiCube::from_fn(self.height, self.width, self.bands(), |row, col, j| {
            self.matrix[(scan_index(row, col, h), j)]
        })
    }
}

/// A `p × N` matrix of spectra, one atom per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDictionary {
    atoms: DMatrix<f64>,
    labels: Vec<String>,
}

impl SpectralDictionary {
    /// Builds a library dictionary. Rejects non-finite values and all-zero atoms.
    pub fn new(atoms: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::Empty("dictionary needs at least one band and one atom".into()));
        }
        if let Some(j) = atoms.column_iter().position(|c| c.iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidValue(format!("atom {j} is all zeros")));
        }
        Self::from_parts(atoms, labels)
    }

    /// Like [`new`](Self::new) but admits all-zero atoms, as happens for
    /// spectra sampled out of a background image.
    pub fn from_samples(atoms: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        Self::from_parts(atoms, labels)
    }

    fn from_parts(atoms: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != atoms.ncols() {
            return Err(Error::Dimension(format!(
                "{} labels for {} atoms",
                labels.len(),
                atoms.ncols()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite dictionary entry".into()));
        }
        Ok(Self { atoms, labels })
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn bands(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, j: usize) -> DVectorView<'_, f64> {
        self.atoms.column(j)
    }

    /// Column concatenation `[self other]`.
    pub fn concat(&self, other: &SpectralDictionary) -> Result<SpectralDictionary> {
        if self.bands() != other.bands() {
            return Err(Error::Dimension(format!(
                "cannot concatenate dictionaries with {} and {} bands",
                self.bands(),
                other.bands()
            )));
        }
        let atoms = DMatrix::from_fn(self.bands(), self.atom_count() + other.atom_count(), |i, j| {
            if j < self.atom_count() {
                self.atoms[(i, j)]
            } else {
                other.atoms[(i, j - self.atom_count())]
            }
        });
        let labels = self.labels.iter().chain(&other.labels).cloned().collect();
        Ok(SpectralDictionary { atoms, labels })
    }

    pub fn apply_band_mask(&self, mask: &BandMask) -> Result<SpectralDictionary> {
        if mask.original_bands() != self.bands() {
            return Err(Error::Dimension(format!(
                "band mask is for {} bands, dictionary has {}",
                mask.original_bands(),
                self.bands()
            )));
        }
        let atoms = self.atoms.select_rows(mask.kept());
        Self::from_parts(atoms, self.labels.clone())
    }
}

/// Per-pixel target flags, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    height: usize,
    width: usize,
    flags: Vec<bool>,
}

impl GroundTruthMask {
    pub fn new(height: usize, width: usize, flags: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension("mask dimensions must be positive".into()));
        }
        if flags.len() != height * width {
            return Err(Error::Dimension(format!(
                "mask {height}x{width} needs {} flags, got {}",
                height * width,
                flags.len()
            )));
        }
        Ok(Self {
            height,
            width,
            flags,
        })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![false; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.flags[row * self.width + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: bool) {
        self.flags[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Bands dropped from 224-band AVIRIS reflectance scenes, 1-based inclusive:
/// the water-absorption ranges plus the noisy last four bands, leaving 186.
pub const AVIRIS_WATER_BANDS: [(usize, usize); 4] = [(1, 4), (104, 113), (148, 167), (221, 224)];

/// Ordered subset of bands to keep, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandMask {
    kept: Vec<usize>,
    original: usize,
}

impl BandMask {
    pub fn new(kept: Vec<usize>, original: usize) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::Empty("band mask keeps no bands".into()));
        }
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidValue(
                "kept band indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = kept.last() {
            if last >= original {
                return Err(Error::Dimension(format!(
                    "band index {last} out of range for {original} bands"
                )));
            }
        }
        Ok(Self { kept, original })
    }

    pub fn identity(bands: usize) -> Result<Self> {
        Self::new((0..bands).collect(), bands)
    }

    /// Mask that drops the given 1-based inclusive ranges.
    pub fn from_removed_ranges(original: usize, removed: &[(usize, usize)]) -> Result<Self> {
        for &(lo, hi) in removed {
            if lo == 0 || lo > hi || hi > original {
                return Err(Error::Dimension(format!(
                    "removed range {lo}-{hi} invalid for {original} bands (1-based)"
                )));
            }
        }
        let kept = (0..original)
            .filter(|&j| !removed.iter().any(|&(lo, hi)| (lo - 1..hi).contains(&j)))
            .collect();
        Self::new(kept, original)
    }

    /// Parses `"1-4,104-113,148-167"` style 1-based ranges (a bare `n` means `n-n`).
    pub fn parse_ranges(spec: &str) -> Result<Vec<(usize, usize)>> {
        spec.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|part| {
                let bad = || Error::InvalidValue(format!("bad band range '{part}'"));
                let (lo, hi) = match part.split_once('-') {
                    Some((a, b)) => (a.trim(), b.trim()),
                    None => (part, part),
                };
                let lo = lo.parse::<usize>().map_err(|_| bad())?;
                let hi = hi.parse::<usize>().map_err(|_| bad())?;
                Ok((lo, hi))
            })
            .collect()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn original_bands(&self) -> usize {
        self.original
    }

    pub fn kept_count(&self) -> usize {
        self.kept.len()
    }
}
