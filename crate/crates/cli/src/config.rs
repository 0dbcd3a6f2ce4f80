//! Pipeline configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! out_dir = "out"
//! profile = "synthetic-s1"
//!
//! [input]
//! cube = "scene.hdr"
//! library = "targets.csv"
//! truth = "truth.pgm"
//! remove_bands = "1-4,104-113,148-167,221-224"
//! normalization = "global"
//!
//! [solver]
//! epsilon = 1e-5
//!
//! [detector]
//! strategy = "both"
//! source = "lowrank"
//! outer = 5
//! inner = 1
//! k0 = 8
//!
//! [synth]
//! alphas = [0.1, 0.5]
//!
//! [synth.scene]
//! height = 64
//! width = 64
//! bands = 30
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use hsitd::decompose::{Profile, SolverConfig};
use hsitd::detect::{WindowSpec, DEFAULT_SPARSITY, DEFAULT_VIS_THRESHOLD};
use hsitd::eval::PfaDenominator;
use hsitd::synth::{Block, ALPHA_GRID};
use hsitd::{BandMask, Normalization};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Named (τ, λ) preset; overridden by `tau`/`lambda` written in `[solver]`.
    pub profile: Option<String>,
    pub input: InputConfig,
    pub solver: SolverConfig,
    pub detector: DetectorConfig,
    pub synth: Option<SynthConfig>,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    Global,
    PerBand,
    None,
}

impl Scaling {
    pub fn normalization(&self) -> Option<Normalization> {
        match self {
            Scaling::Global => Some(Normalization::Global),
            Scaling::PerBand => Some(Normalization::PerBand),
            Scaling::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub cube: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Background-only cube, used as the ideal dictionary source.
    pub background: Option<PathBuf>,
    /// 1-based inclusive ranges removed from cube and library, e.g. `"1-4,104-113"`.
    pub remove_bands: Option<String>,
    pub normalization: Scaling,
    /// Library atoms averaged into the implanted target; all atoms when absent.
    pub target_atoms: Option<Vec<usize>>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            cube: None,
            library: None,
            truth: None,
            background: None,
            remove_bands: None,
            normalization: Scaling::Global,
            target_atoms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    One,
    Two,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictSource {
    /// Decomposed background `L`.
    Lowrank,
    /// The input cube itself.
    Original,
    /// The background-only cube given as `input.background`.
    Background,
}

impl DictSource {
    pub fn name(self) -> &'static str {
        match self {
            DictSource::Lowrank => "lowrank",
            DictSource::Original => "original",
            DictSource::Background => "background",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub strategy: Strategy,
    pub source: DictSource,
    pub outer: usize,
    pub inner: usize,
    pub k0: usize,
    /// Absolute threshold for the exported strategy-two mask.
    pub vis_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let w = WindowSpec::default();
        Self {
            strategy: Strategy::Both,
            source: DictSource::Lowrank,
            outer: w.outer,
            inner: w.inner,
            k0: DEFAULT_SPARSITY,
            vis_threshold: DEFAULT_VIS_THRESHOLD,
        }
    }
}

impl DetectorConfig {
    pub fn window(&self) -> WindowSpec {
        WindowSpec {
            outer: self.outer,
            inner: self.inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub alphas: Vec<f64>,
    /// Explicit blocks; the centred seven-block convoy when absent.
    pub blocks: Option<Vec<Block>>,
    /// Generate a low-rank background instead of reading `input.cube`.
    pub scene: Option<SceneConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            alphas: ALPHA_GRID.to_vec(),
            blocks: None,
            scene: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub rank: usize,
    pub sigma: f64,
    /// Atoms of the generated target library when `input.library` is absent.
    pub library_atoms: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            bands: 30,
            rank: 3,
            sigma: 0.01,
            library_atoms: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub denominator: PfaDenominator,
    pub svg: bool,
    /// Fill fraction recorded in the summary for a single evaluation.
    pub alpha: Option<f64>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// Reads, resolves and validates a configuration file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base, overrides)
    }

    pub fn from_toml(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let raw: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        let solver_keys = raw.get("solver").and_then(|v| v.as_table());
        let explicit = |k: &str| solver_keys.is_some_and(|t| t.contains_key(k));

        if overrides.profile.is_some() {
            cfg.profile.clone_from(&overrides.profile);
        }
        if let Some(name) = &cfg.profile {
            let profile = Profile::from_name(name).ok_or_else(|| {
                let names: Vec<&str> = Profile::ALL.iter().map(|p| p.name()).collect();
                CliError::Usage(format!("unknown profile '{name}' (expected one of {})", names.join(", ")))
            })?;
            let (tau, lambda) = profile.weights();
            // a flag beats the file; otherwise explicit weights beat the preset
            let forced = overrides.profile.is_some();
            if forced || !explicit("tau") {
                cfg.solver.tau = tau;
            }
            if forced || !explicit("lambda") {
                cfg.solver.lambda = lambda;
            }
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        resolve(&mut cfg.input.cube);
        resolve(&mut cfg.input.library);
        resolve(&mut cfg.input.truth);
        resolve(&mut cfg.input.background);
        resolve(&mut cfg.out_dir);
        if let Some(out) = &overrides.out_dir {
            cfg.out_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks that hold for every command.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.solver;
        if !(s.tau > 0.0) || !(s.lambda > 0.0) {
            return Err(CliError::Usage(format!(
                "tau and lambda must be > 0 (got tau = {}, lambda = {})",
                s.tau, s.lambda
            )));
        }
        s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.detector.window().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.detector.k0 == 0 {
            return Err(CliError::Usage("detector.k0 must be >= 1".into()));
        }
        if let Some(spec) = &self.input.remove_bands {
            let ranges =
                BandMask::parse_ranges(spec).map_err(|e| CliError::Usage(format!("input.remove_bands: {e}")))?;
            if let Some((lo, hi)) = ranges.iter().find(|(lo, hi)| *lo == 0 || lo > hi) {
                return Err(CliError::Usage(format!(
                    "input.remove_bands: range {lo}-{hi} must be 1-based and ascending"
                )));
            }
        }
        for (name, path) in [
            ("input.cube", &self.input.cube),
            ("input.library", &self.input.library),
            ("input.truth", &self.input.truth),
            ("input.background", &self.input.background),
        ] {
            if let Some(p) = path {
                if !input_exists(p) {
                    return Err(CliError::Usage(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if let Some(synth) = &self.synth {
            if synth.alphas.is_empty() {
                return Err(CliError::Usage("synth.alphas is empty".into()));
            }
            if let Some(a) = synth.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
                return Err(CliError::Usage(format!(
                    "fill fraction {a} is outside (0, 1]; use the emitted Db cube for pure background"
                )));
            }
        }
        Ok(())
    }
}

/// A cube is named by its base, `.hdr` or `.img`; other inputs by the path itself.
fn input_exists(p: &Path) -> bool {
    p.exists() || hsitd::io::cube_paths(p).0.exists()
}
