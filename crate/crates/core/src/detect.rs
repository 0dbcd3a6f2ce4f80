//! Window-based background dictionaries and the two detection strategies.
//!
//! Strategy one scores each pixel with the binary-hypothesis residual
//! difference, building its background dictionary from a concentric window
//! over some source cube (typically the decomposed background). Strategy two
//! reads the sparse target component directly.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cube::{scan_index, HsiCube, SpectralDictionary};
use crate::error::{Error, Result};
use crate::prox::omp;

/// Default OMP sparsity for both hypotheses.
pub const DEFAULT_SPARSITY: usize = 8;

/// Default threshold applied to exported strategy-two masks.
pub const DEFAULT_VIS_THRESHOLD: f64 = 1e-6;

/// Value given to exactly-zero rows in the dB rendering.
pub const DB_FLOOR: f64 = -200.0;

/// Concentric window: an `outer × outer` region minus the central `inner × inner` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
pub struct WindowSpec {
    pub outer: usize,
    pub inner: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { outer: 5, inner: 1 }
    }
}

impl WindowSpec {
    pub fn new(outer: usize, inner: usize) -> Result<Self> {
        let w = Self { outer, inner };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer % 2 == 0 || self.inner % 2 == 0 {
            return Err(Error::InvalidValue(format!(
                "window sizes must be odd (outer {}, inner {})",
                self.outer, self.inner
            )));
        }
        if self.inner >= self.outer {
            return Err(Error::InvalidValue(format!(
                "inner window {} must be smaller than outer window {}",
                self.inner, self.outer
            )));
        }
        Ok(())
    }

    /// Pixels between the centre and the outer window edge.
    pub fn margin(&self) -> usize {
        (self.outer - 1) / 2
    }

    pub fn atom_count(&self) -> usize {
        self.outer * self.outer - self.inner * self.inner
    }

    /// `(dr, dc)` offsets of the dictionary pixels, row-major.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.margin() as isize;
        let ri = ((self.inner - 1) / 2) as isize;
        let mut out = Vec::with_capacity(self.atom_count());
        for dr in -r..=r {
            for dc in -r..=r {
                if dr.abs() > ri || dc.abs() > ri {
                    out.push((dr, dc));
                }
            }
        }
        out
    }
}

/// Per-pixel detector output over the region tested.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    pub detector: String,
    pub height: usize,
    pub width: usize,
    /// Position of the region's top-left pixel inside the full image.
    pub row_offset: usize,
    pub col_offset: usize,
    /// Row-major over the region tested.
    pub scores: Vec<f64>,
}

impl DetectionMap {
    pub fn new(
        detector: impl Into<String>,
        height: usize,
        width: usize,
        offset: (usize, usize),
        scores: Vec<f64>,
    ) -> Result<Self> {
        if scores.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}x{width} map needs {} scores, got {}",
                height * width,
                scores.len()
            )));
        }
        Ok(Self {
            detector: detector.into(),
            height,
            width,
            row_offset: offset.0,
            col_offset: offset.1,
            scores,
        })
    }

    /// Score at region coordinates.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    /// Score at full-image coordinates, `None` outside the region tested.
    pub fn at_image(&self, row: usize, col: usize) -> Option<f64> {
        let r = row.checked_sub(self.row_offset).filter(|&r| r < self.height)?;
        let c = col.checked_sub(self.col_offset).filter(|&c| c < self.width)?;
        Some(self.get(r, c))
    }

    /// `(image_row, image_col, score)` for every scored pixel, row-major.
    pub fn iter_image(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.scores.iter().enumerate().map(|(k, &s)| {
            (self.row_offset + k / self.width, self.col_offset + k % self.width, s)
        })
    }

    /// Pixels with score above `eta`, in image coordinates.
    pub fn support(&self, eta: f64) -> Vec<(usize, usize)> {
        self.iter_image()
            .filter(|&(_, _, s)| s > eta)
            .map(|(r, c, _)| (r, c))
            .collect()
    }
}

/// Spectra of the window pixels around `(row, col)` as a background dictionary.
pub fn build_background_dictionary(
    source: &HsiCube,
    (row, col): (usize, usize),
    win: WindowSpec,
) -> Result<SpectralDictionary> {
    win.validate()?;
    let m = win.margin();
    if row < m || col < m || row + m >= source.height() || col + m >= source.width() {
        return Err(Error::EdgePixel { row, col, margin: m });
    }
    let offsets = win.offsets();
    let p = source.bands();
    let mut atoms = DMatrix::zeros(p, offsets.len());
    for (j, &(dr, dc)) in offsets.iter().enumerate() {
        let r = (row as isize + dr) as usize;
        let c = (col as isize + dc) as usize;
        atoms.column_mut(j).copy_from_slice(source.pixel(r, c));
    }
    let labels = offsets.iter().map(|(dr, dc)| format!("bg{dr:+}{dc:+}")).collect();
    SpectralDictionary::from_samples(atoms, labels)
}

/// `‖x − A_b θ‖ − ‖x − [A_b A_t] γ‖` with both codes found by OMP.
pub fn srbbh_score(
    x: &[f64],
    background: &SpectralDictionary,
    targets: &SpectralDictionary,
    k0: usize,
) -> Result<f64> {
    let joint = background.concat(targets)?;
    srbbh_with_joint(x, background.atoms(), joint.atoms(), k0)
}

fn srbbh_with_joint(x: &[f64], a_b: &DMatrix<f64>, joint: &DMatrix<f64>, k0: usize) -> Result<f64> {
    let h0 = omp(x, a_b, k0)?;
    let h1 = omp(x, joint, k0)?;
    Ok(h0.residual_norm - h1.residual_norm)
}

/// Strategy one over the region tested of `image`, with background
/// dictionaries drawn from `dict_source`.
pub fn run_srbbh(
    image: &HsiCube,
    dict_source: &HsiCube,
    targets: &SpectralDictionary,
    win: WindowSpec,
    k0: usize,
) -> Result<DetectionMap> {
    win.validate()?;
    let dims = (image.height(), image.width(), image.bands());
    if dims != (dict_source.height(), dict_source.width(), dict_source.bands()) {
        return Err(Error::Dimension(format!(
            "image is {:?}, dictionary source is {:?}",
            dims,
            (dict_source.height(), dict_source.width(), dict_source.bands())
        )));
    }
    if targets.bands() != image.bands() {
        return Err(Error::Dimension(format!(
            "target library has {} bands, image has {}",
            targets.bands(),
            image.bands()
        )));
    }
    let m = win.margin();
    if image.height() < win.outer || image.width() < win.outer {
        return Err(Error::Dimension(format!(
            "{}x{} image is smaller than a {}x{} window",
            image.height(),
            image.width(),
            win.outer,
            win.outer
        )));
    }
    let rh = image.height() - 2 * m;
    let rw = image.width() - 2 * m;
    let scores = (0..rh * rw)
        .into_par_iter()
        .map(|k| {
            let (row, col) = (k / rw + m, k % rw + m);
            let bg = build_background_dictionary(dict_source, (row, col), win)?;
            let joint = bg.concat(targets)?;
            srbbh_with_joint(image.pixel(row, col), bg.atoms(), joint.atoms(), k0)
        })
        .collect::<Result<Vec<f64>>>()?;
    DetectionMap::new("srbbh", rh, rw, (m, m), scores)
}

fn check_sparse_shape(s: &DMatrix<f64>, height: usize, width: usize) -> Result<()> {
    if s.nrows() != height * width {
        return Err(Error::Dimension(format!(
            "sparse matrix has {} rows, a {height}x{width} image needs {}",
            s.nrows(),
            height * width
        )));
    }
    Ok(())
}

/// Strategy two: row ℓ₂ norms of the `e × p` sparse target matrix, full image.
pub fn strategy_two_map(s: &DMatrix<f64>, height: usize, width: usize) -> Result<DetectionMap> {
    check_sparse_shape(s, height, width)?;
    let mut scores = vec![0.0; height * width];
    for row in 0..height {
        for col in 0..width {
            scores[row * width + col] = s.row(scan_index(row, col, height)).norm();
        }
    }
    DetectionMap::new("sparse-target", height, width, (0, 0), scores)
}

/// Mean power per pixel in dB, `10·log10(mean_j S(r, j)²)`; zero rows get [`DB_FLOOR`].
pub fn mean_power_db(s: &DMatrix<f64>, height: usize, width: usize) -> Result<DetectionMap> {
    check_sparse_shape(s, height, width)?;
    let p = s.ncols().max(1) as f64;
    let mut scores = vec![DB_FLOOR; height * width];
    for row in 0..height {
        for col in 0..width {
            let power = s.row(scan_index(row, col, height)).norm_squared() / p;
            if power > 0.0 {
                scores[row * width + col] = (10.0 * power.log10()).max(DB_FLOOR);
            }
        }
    }
    DetectionMap::new("sparse-target-db", height, width, (0, 0), scores)
}
