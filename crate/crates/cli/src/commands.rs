//! Pipeline stages and the file layout they share.
//!
//! ```text
//! out/
//!   resolved_config.toml
//!   L.hdr/.img  S.hdr/.img  C.hdr/.img  residual.hdr/.img  trace.csv    decompose
//!   map_srbbh_<source>.{csv,hdr,img,pgm}  map_sparse.{csv,hdr,img}       detect
//!   sparse_db.pgm  sparse_mask.pgm
//!   roc_<map>.csv  summary.csv  roc.svg                                evaluate
//!   alpha_<a>/{D,Db,L_true}.{hdr,img}  alpha_<a>/truth.pgm             implant
//! ```
//!
//! `pipeline` with a `[synth]` table runs every later stage inside each
//! `alpha_<a>/` directory and collects one summary row per map and fill
//! fraction in `out/summary.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use hsitd::decompose::{write_trace_csv, Decomposition, SolverConfig};
use hsitd::detect::{mean_power_db, run_srbbh, strategy_two_map, DB_FLOOR};
use hsitd::eval::{roc, roc_svg, write_roc_csv, write_summary_csv, RocCurve, SummaryRow};
use hsitd::io::{
    cube_paths, read_cube, read_map_csv, read_mask, read_spectral_library, write_cube, write_map_csv,
    write_map_grid, write_map_pgm, write_mask_pgm, write_spectral_library,
};
use hsitd::synth::{
    default_convoy, generate_synthetic_scene, implant_targets, mean_spectrum, synthetic_library, ImplantSpec,
    SyntheticSceneSpec,
};
use hsitd::{decompose, BandMask, DetectionMap, GroundTruthMask, HsiCube, SpectralDictionary};
use log::{info, warn};
use nalgebra::DMatrix;

use crate::config::{DetectorConfig, DictSource, PipelineConfig, Strategy};
use crate::error::CliError;

/// Relative spread of the generated stand-in library.
const LIBRARY_SPREAD: f64 = 0.05;
/// Seed offset keeping the generated library independent of the scene draw.
const LIBRARY_SEED_OFFSET: u64 = 1000;

pub fn write_resolved_config(cfg: &PipelineConfig, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let text = toml::to_string(cfg).map_err(|e| CliError::Io(format!("cannot serialise config: {e}")))?;
    fs::write(dir.join("resolved_config.toml"), text)?;
    Ok(())
}

fn band_mask(cfg: &PipelineConfig, bands: usize) -> Result<Option<BandMask>, CliError> {
    match &cfg.input.remove_bands {
        Some(spec) => Ok(Some(BandMask::from_removed_ranges(bands, &BandMask::parse_ranges(spec)?)?)),
        None => Ok(None),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str, command: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("`{command}` needs {key} in the config")))
}

/// Reads a cube, drops the configured bands and rescales it.
fn prepare_cube(cfg: &PipelineConfig, path: &Path) -> Result<HsiCube, CliError> {
    let mut cube = read_cube(path)?;
    if let Some(mask) = band_mask(cfg, cube.bands())? {
        cube = cube.apply_band_mask(&mask)?;
    }
    if let Some(scope) = cfg.input.normalization.normalization() {
        cube = cube.normalize(scope)?;
    }
    Ok(cube)
}

fn load_library(cfg: &PipelineConfig, command: &str) -> Result<SpectralDictionary, CliError> {
    let path = required(&cfg.input.library, "input.library", command)?;
    let raw_bands = hsitd::io::read_library_raw(path)?.values.nrows();
    let mask = band_mask(cfg, raw_bands)?;
    Ok(read_spectral_library(path, mask.as_ref())?)
}

/// Reads an artifact cube, naming the command that produces it when absent.
fn read_artifact(dir: &Path, name: &str, producer: &'static str) -> Result<HsiCube, CliError> {
    let base = dir.join(name);
    let (hdr, _) = cube_paths(&base);
    if !hdr.exists() {
        return Err(CliError::MissingArtifact { path: hdr, producer });
    }
    Ok(read_cube(&base)?)
}

fn check_shape(what: &str, a: &HsiCube, b: &HsiCube) -> Result<(), CliError> {
    if (a.height(), a.width(), a.bands()) != (b.height(), b.width(), b.bands()) {
        return Err(hsitd::Error::Dimension(format!(
            "{what} is {}x{}x{}, image is {}x{}x{}",
            a.height(),
            a.width(),
            a.bands(),
            b.height(),
            b.width(),
            b.bands()
        ))
        .into());
    }
    Ok(())
}

// ---- decompose ----

/// Runs the solver on `cube` and writes its artifacts into `dir`.
fn decompose_into(
    dir: &Path,
    cube: &HsiCube,
    library: &SpectralDictionary,
    solver: &SolverConfig,
) -> Result<Decomposition, CliError> {
    fs::create_dir_all(dir)?;
    info!(
        "decomposing {}x{}x{} with {} target atoms (tau = {}, lambda = {})",
        cube.height(),
        cube.width(),
        cube.bands(),
        library.atom_count(),
        solver.tau,
        solver.lambda
    );
    let dec = decompose(&cube.flatten(), library, solver)?;
    write_cube(&dec.background_cube()?, &dir.join("L"))?;
    write_cube(&dec.target_cube()?, &dir.join("S"))?;
    write_cube(&dec.coefficient_cube()?, &dir.join("C"))?;
    write_cube(&dec.noise_cube()?, &dir.join("residual"))?;
    write_trace_csv(&dec.trace, &dir.join("trace.csv"))?;
    let last = dec.trace.last();
    info!(
        "{} after {} outer iterations, rank(L) = {}, active pixels = {}",
        if dec.converged { "converged" } else { "stopped at cap" },
        dec.iterations(),
        last.map_or(0, |r| r.rank_l),
        last.map_or(0, |r| r.nnz_cols_c)
    );
    if dec.inner_cap_hit {
        warn!("some inner solves stopped at max_inner");
    }
    Ok(dec)
}

pub fn cmd_decompose(cfg: &PipelineConfig) -> Result<(), CliError> {
    let cube = prepare_cube(cfg, required(&cfg.input.cube, "input.cube", "decompose")?)?;
    let library = load_library(cfg, "decompose")?;
    let dec = decompose_into(&cfg.out_dir(), &cube, &library, &cfg.solver)?;
    if !dec.converged {
        return Err(CliError::NotConverged(dec.iterations()));
    }
    Ok(())
}

// ---- detect ----

fn write_map_files(dir: &Path, name: &str, map: &DetectionMap, pgm: bool) -> Result<(), CliError> {
    write_map_csv(map, &dir.join(format!("{name}.csv")))?;
    write_map_grid(map, &dir.join(name))?;
    if pgm {
        write_map_pgm(map, f64::NEG_INFINITY, &dir.join(format!("{name}.pgm")))?;
    }
    Ok(())
}

/// Runs the configured strategies and writes their maps into `dir`.
/// Returns `(name, map)` pairs for evaluation.
fn detect_into(
    dir: &Path,
    image: &HsiCube,
    targets: Option<&SpectralDictionary>,
    det: &DetectorConfig,
    sources: &[(DictSource, &HsiCube)],
    s: Option<&DMatrix<f64>>,
) -> Result<Vec<(String, DetectionMap)>, CliError> {
    fs::create_dir_all(dir)?;
    let mut maps = Vec::new();
    for &(source, dict_source) in sources {
        let targets = targets.ok_or_else(|| CliError::Usage("strategy one needs input.library".into()))?;
        check_shape(source.name(), dict_source, image)?;
        info!("strategy one, {} windows {}/{}", source.name(), det.outer, det.inner);
        let mut map = run_srbbh(image, dict_source, targets, det.window(), det.k0)?;
        let name = format!("map_srbbh_{}", source.name());
        map.detector.clone_from(&name);
        write_map_files(dir, &name, &map, true)?;
        maps.push((name, map));
    }
    if let Some(s) = s {
        let (h, w) = (image.height(), image.width());
        info!("strategy two");
        let mut map = strategy_two_map(s, h, w)?;
        map.detector = "map_sparse".into();
        write_map_files(dir, "map_sparse", &map, false)?;
        write_map_pgm(&mean_power_db(s, h, w)?, DB_FLOOR, &dir.join("sparse_db.pgm"))?;
        let flags = map.scores.iter().map(|&v| v > det.vis_threshold).collect();
        write_mask_pgm(&GroundTruthMask::new(h, w, flags)?, &dir.join("sparse_mask.pgm"))?;
        maps.push(("map_sparse".into(), map));
    }
    Ok(maps)
}

fn runs_one(det: &DetectorConfig) -> bool {
    matches!(det.strategy, Strategy::One | Strategy::Both)
}

fn runs_two(det: &DetectorConfig) -> bool {
    matches!(det.strategy, Strategy::Two | Strategy::Both)
}

pub fn cmd_detect(cfg: &PipelineConfig) -> Result<(), CliError> {
    let out = cfg.out_dir();
    let image = prepare_cube(cfg, required(&cfg.input.cube, "input.cube", "detect")?)?;
    let det = &cfg.detector;
    let mut held = None;
    if runs_one(det) {
        held = Some(match det.source {
            DictSource::Lowrank => read_artifact(&out, "L", "decompose")?,
            DictSource::Original => image.clone(),
            DictSource::Background => prepare_cube(cfg, required(&cfg.input.background, "input.background", "detect")?)?,
        });
    }
    let targets = if runs_one(det) { Some(load_library(cfg, "detect")?) } else { None };
    let s = if runs_two(det) {
        let s = read_artifact(&out, "S", "decompose")?;
        check_shape("S", &s, &image)?;
        Some(s.flatten().into_matrix())
    } else {
        None
    };
    let sources: Vec<(DictSource, &HsiCube)> = held.iter().map(|c| (det.source, c)).collect();
    detect_into(&out, &image, targets.as_ref(), det, &sources, s.as_ref())?;
    Ok(())
}

// ---- evaluate ----

fn evaluate_into(
    dir: &Path,
    maps: &[(String, DetectionMap)],
    truth: &GroundTruthMask,
    cfg: &PipelineConfig,
    alpha: Option<f64>,
) -> Result<Vec<SummaryRow>, CliError> {
    let mut rows = Vec::new();
    let mut curves: Vec<(String, RocCurve)> = Vec::new();
    for (name, map) in maps {
        let scenario = name.strip_prefix("map_").unwrap_or(name).to_string();
        let curve = roc(map, truth, cfg.eval.denominator)?;
        write_roc_csv(&curve, &dir.join(format!("roc_{scenario}.csv")))?;
        info!("{scenario}: AUC = {:.4}", curve.auc);
        rows.push(SummaryRow {
            scenario: scenario.clone(),
            alpha,
            auc: curve.auc,
        });
        curves.push((scenario, curve));
    }
    if cfg.eval.svg {
        let refs: Vec<(&str, &RocCurve)> = curves.iter().map(|(n, c)| (n.as_str(), c)).collect();
        fs::write(dir.join("roc.svg"), roc_svg(&refs))?;
    }
    Ok(rows)
}

fn load_truth(cfg: &PipelineConfig, command: &str) -> Result<GroundTruthMask, CliError> {
    Ok(read_mask(required(&cfg.input.truth, "input.truth", command)?)?)
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<(), CliError> {
    let out = cfg.out_dir();
    let truth = load_truth(cfg, "evaluate")?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&out)
        .map_err(|_| CliError::MissingArtifact {
            path: out.clone(),
            producer: "detect",
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("map_"))
        })
        .collect();
    if paths.is_empty() {
        return Err(CliError::MissingArtifact {
            path: out.join("map_*.csv"),
            producer: "detect",
        });
    }
    paths.sort();
    let mut maps = Vec::with_capacity(paths.len());
    for p in &paths {
        let map = read_map_csv(p)?;
        maps.push((map.detector.clone(), map));
    }
    let rows = evaluate_into(&out, &maps, &truth, cfg, cfg.eval.alpha)?;
    write_summary_csv(&rows, &out.join("summary.csv"))?;
    Ok(())
}

// ---- implant ----

/// One implanted scene on disk and in memory.
pub struct AlphaRun {
    pub alpha: f64,
    pub dir: PathBuf,
    pub d: HsiCube,
    pub d_b: HsiCube,
    pub truth: GroundTruthMask,
}

/// Builds the background, target and layout, then writes one scene per fill
/// fraction. Returns the runs and the target library used.
pub fn implant_all(cfg: &PipelineConfig) -> Result<(Vec<AlphaRun>, SpectralDictionary), CliError> {
    let synth = cfg
        .synth
        .as_ref()
        .ok_or_else(|| CliError::Usage("`implant` needs a [synth] table in the config".into()))?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;

    let (d_b, l_true, library) = match &synth.scene {
        Some(scene) => {
            let spec = SyntheticSceneSpec {
                rank: scene.rank,
                sigma: scene.sigma,
                ..SyntheticSceneSpec::new(scene.height, scene.width, scene.bands, cfg.seed)
            };
            let generated = generate_synthetic_scene(&spec)?;
            let library = match &cfg.input.library {
                Some(_) => load_library(cfg, "implant")?,
                None => {
                    let lib = synthetic_library(
                        scene.bands,
                        scene.library_atoms,
                        LIBRARY_SPREAD,
                        cfg.seed + LIBRARY_SEED_OFFSET,
                    )?;
                    write_spectral_library(&lib, None, &out.join("library.csv"))?;
                    lib
                }
            };
            (generated.d_b, Some(generated.l_true), library)
        }
        None => {
            let path = required(&cfg.input.cube, "input.cube (or [synth.scene])", "implant")?;
            (prepare_cube(cfg, path)?, None, load_library(cfg, "implant")?)
        }
    };

    let all: Vec<usize> = (0..library.atom_count()).collect();
    let target = mean_spectrum(&library, cfg.input.target_atoms.as_deref().unwrap_or(&all))?;
    let blocks = match &synth.blocks {
        Some(b) => b.clone(),
        None => default_convoy(d_b.height(), d_b.width())?,
    };

    let mut runs = Vec::with_capacity(synth.alphas.len());
    for &alpha in &synth.alphas {
        let spec = ImplantSpec {
            target: target.clone(),
            blocks: blocks.clone(),
            alpha,
        };
        let (d, truth) = implant_targets(&d_b, &spec)?;
        let dir = out.join(format!("alpha_{alpha}"));
        fs::create_dir_all(&dir)?;
        write_cube(&d, &dir.join("D"))?;
        write_cube(&d_b, &dir.join("Db"))?;
        write_mask_pgm(&truth, &dir.join("truth.pgm"))?;
        if let Some(l) = &l_true {
            write_cube(l, &dir.join("L_true"))?;
        }
        info!("implanted alpha = {alpha} into {}", dir.display());
        runs.push(AlphaRun {
            alpha,
            dir,
            d,
            d_b: d_b.clone(),
            truth,
        });
    }
    Ok((runs, library))
}

pub fn cmd_implant(cfg: &PipelineConfig) -> Result<(), CliError> {
    implant_all(cfg).map(|_| ())
}

// ---- pipeline ----

pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<(), CliError> {
    let out = cfg.out_dir();
    let det = &cfg.detector;
    let mut capped = None;
    let mut rows = Vec::new();

    if cfg.synth.is_some() {
        let (runs, library) = implant_all(cfg)?;
        for run in &runs {
            let dec = decompose_into(&run.dir, &run.d, &library, &cfg.solver)?;
            if !dec.converged {
                warn!("alpha = {}: solver stopped at the iteration cap", run.alpha);
                capped = Some(dec.iterations());
            }
            let l = dec.background_cube()?;
            // the three dictionary sources compared on implanted scenes
            let sources = [
                (DictSource::Background, &run.d_b),
                (DictSource::Original, &run.d),
                (DictSource::Lowrank, &l),
            ];
            let sources: &[(DictSource, &HsiCube)] = if runs_one(det) { &sources } else { &[] };
            let s = runs_two(det).then_some(&dec.s);
            let maps = detect_into(&run.dir, &run.d, Some(&library), det, sources, s)?;
            rows.extend(evaluate_into(&run.dir, &maps, &run.truth, cfg, Some(run.alpha))?);
        }
    } else {
        let image = prepare_cube(cfg, required(&cfg.input.cube, "input.cube", "pipeline")?)?;
        let library = load_library(cfg, "pipeline")?;
        let dec = decompose_into(&out, &image, &library, &cfg.solver)?;
        if !dec.converged {
            capped = Some(dec.iterations());
        }
        let l = dec.background_cube()?;
        let background = match (runs_one(det), det.source) {
            (true, DictSource::Background) => Some(prepare_cube(
                cfg,
                required(&cfg.input.background, "input.background", "pipeline")?,
            )?),
            _ => None,
        };
        let dict_source = match det.source {
            DictSource::Lowrank => &l,
            DictSource::Original => &image,
            DictSource::Background => background.as_ref().unwrap_or(&image),
        };
        let sources = [(det.source, dict_source)];
        let sources: &[(DictSource, &HsiCube)] = if runs_one(det) { &sources } else { &[] };
        let maps = detect_into(&out, &image, Some(&library), det, sources, runs_two(det).then_some(&dec.s))?;
        match &cfg.input.truth {
            Some(_) => rows = evaluate_into(&out, &maps, &load_truth(cfg, "pipeline")?, cfg, cfg.eval.alpha)?,
            None => info!("no input.truth, skipping evaluation"),
        }
    }
    if !rows.is_empty() {
        write_summary_csv(&rows, &out.join("summary.csv"))?;
    }
    match capped {
        Some(n) => Err(CliError::NotConverged(n)),
        None => Ok(()),
    }
}
