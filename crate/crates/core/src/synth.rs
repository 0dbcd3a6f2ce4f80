//! Synthetic scenes: target implantation under the linear mixing model
//! `x = α·t + (1 − α)·b`, block layouts and seeded low-rank backgrounds.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::{GroundTruthMask, HsiCube, SceneMatrix, SpectralDictionary};
use crate::error::{Error, Result};

/// Fill fractions swept by the implant experiments.
pub const ALPHA_GRID: [f64; 8] = [0.01, 0.02, 0.05, 0.1, 0.3, 0.5, 0.8, 1.0];

/// Axis-aligned block of pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
pub struct Block {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Block {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self { top, left, height, width }
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.top..self.top + self.height).flat_map(move |r| (self.left..self.left + self.width).map(move |c| (r, c)))
    }

    fn fits(&self, h: usize, w: usize) -> bool {
        self.height > 0 && self.width > 0 && self.top + self.height <= h && self.left + self.width <= w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplantSpec {
    pub target: Vec<f64>,
    pub blocks: Vec<Block>,
    pub alpha: f64,
}

impl ImplantSpec {
    pub fn validate(&self, h: usize, w: usize, p: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidValue(format!(
                "fill fraction must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.target.len() != p {
            return Err(Error::Dimension(format!(
                "target spectrum has {} bands, scene has {p}",
                self.target.len()
            )));
        }
        if let Some(b) = self.blocks.iter().find(|b| !b.fits(h, w)) {
            return Err(Error::InvalidValue(format!("block {b:?} is outside the {h}x{w} image")));
        }
        Ok(())
    }
}

/// Replaces the fraction `alpha` of every block pixel with the target spectrum.
pub fn implant_targets(bg: &HsiCube, spec: &ImplantSpec) -> Result<(HsiCube, GroundTruthMask)> {
    let (h, w, p) = (bg.height(), bg.width(), bg.bands());
    spec.validate(h, w, p)?;
    let mut mask = GroundTruthMask::empty(h, w)?;
    for b in &spec.blocks {
        for (r, c) in b.pixels() {
            mask.set(r, c, true);
        }
    }
    let a = spec.alpha;
    let cube = HsiCube::from_fn(h, w, p, |r, c, k| {
        let b = bg.get(r, c, k);
        if mask.get(r, c) {
            a * spec.target[k] + (1.0 - a) * b
        } else {
            b
        }
    })?;
    Ok((cube, mask))
}

/// `count` blocks of `block_h × block_w` stacked vertically with `gap` rows
/// between them, centred in an `h × w` image.
pub fn convoy_layout(
    h: usize,
    w: usize,
    count: usize,
    (block_h, block_w): (usize, usize),
    gap: usize,
) -> Result<Vec<Block>> {
    let total = count * block_h + count.saturating_sub(1) * gap;
    if count == 0 || total > h || block_w > w {
        return Err(Error::InvalidValue(format!(
            "{count} blocks of {block_h}x{block_w} with gap {gap} do not fit a {h}x{w} image"
        )));
    }
    let top = (h - total) / 2;
    let left = (w - block_w) / 2;
    Ok((0..count)
        .map(|i| Block::new(top + i * (block_h + gap), left, block_h, block_w))
        .collect())
}

/// Seven 6×3 blocks with a 2-pixel gap.
pub fn default_convoy(h: usize, w: usize) -> Result<Vec<Block>> {
    convoy_layout(h, w, 7, (6, 3), 2)
}

/// Entrywise mean of the selected atoms.
pub fn mean_spectrum(dict: &SpectralDictionary, indices: &[usize]) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::Empty("mean spectrum needs at least one atom".into()));
    }
    if let Some(&j) = indices.iter().find(|&&j| j >= dict.atom_count()) {
        return Err(Error::InvalidValue(format!(
            "atom index {j} out of range for {} atoms",
            dict.atom_count()
        )));
    }
    let mut sum = vec![0.0; dict.bands()];
    for &j in indices {
        for (s, v) in sum.iter_mut().zip(dict.atom(j).iter()) {
            *s += v;
        }
    }
    let n = indices.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub rank: usize,
    pub sigma: f64,
    pub implant: Option<ImplantSpec>,
    pub seed: u64,
}

impl SyntheticSceneSpec {
    /// Rank 3, σ = 0.01, no implant.
    pub fn new(height: usize, width: usize, bands: usize, seed: u64) -> Self {
        Self {
            height,
            width,
            bands,
            rank: 3,
            sigma: 0.01,
            implant: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.height * self.width;
        if e == 0 || self.bands == 0 {
            return Err(Error::Empty("synthetic scene needs nonzero dimensions".into()));
        }
        if self.rank == 0 || self.rank > e.min(self.bands) {
            return Err(Error::InvalidValue(format!(
                "background rank {} must lie in 1..={}",
                self.rank,
                e.min(self.bands)
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidValue(format!("noise sigma {} must be >= 0", self.sigma)));
        }
        if let Some(spec) = &self.implant {
            spec.validate(self.height, self.width, self.bands)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    /// Background plus noise plus implanted targets.
    pub d: HsiCube,
    /// Background plus noise.
    pub d_b: HsiCube,
    pub truth: GroundTruthMask,
    /// Noise-free low-rank background.
    pub l_true: HsiCube,
}

/// Draws `L_true = U·V` (uniform factors, scaled by the global maximum into `[0, 1]`), adds
/// Gaussian noise and implants targets. Identical specs give identical scenes.
pub fn generate_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let (h, w, p, r) = (spec.height, spec.width, spec.bands, spec.rank);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = DMatrix::from_fn(h * w, r, |_, _| rng.random::<f64>());
    let v = DMatrix::from_fn(r, p, |_, _| rng.random::<f64>());
    let product = u * v;
    // factors are nonnegative, so dividing by the maximum lands in [0, 1]
    // without the constant offset a min shift would add to the rank
    let hi = product.max();
    let l = product / hi;
    let l_true = SceneMatrix::new(l.clone(), h, w)?.unflatten()?;

    let d_b = if spec.sigma > 0.0 {
        let normal = Normal::new(0.0, spec.sigma).map_err(|e| Error::InvalidValue(e.to_string()))?;
        let noisy = l.map(|x| x + normal.sample(&mut rng));
        SceneMatrix::new(noisy, h, w)?.unflatten()?
    } else {
        l_true.clone()
    };

    let (d, truth) = match &spec.implant {
        Some(imp) => implant_targets(&d_b, imp)?,
        None => (d_b.clone(), GroundTruthMask::empty(h, w)?),
    };
    Ok(SyntheticScene { d, d_b, truth, l_true })
}

/// `atoms` spectra spread by ±`spread` (relative) around one random prototype
/// with values in `[0.2, 1]`, standing in for a measured sample library.
pub fn synthetic_library(bands: usize, atoms: usize, spread: f64, seed: u64) -> Result<SpectralDictionary> {
    if bands == 0 || atoms == 0 {
        return Err(Error::Empty("synthetic library needs bands and atoms".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..bands).map(|_| rng.random_range(0.2..1.0)).collect();
    let m = DMatrix::from_fn(bands, atoms, |i, _| {
        base[i] * (1.0 + spread * rng.random_range(-1.0..=1.0))
    });
    let labels = (1..=atoms).map(|j| format!("target_{j}")).collect();
    SpectralDictionary::new(m, labels)
}
