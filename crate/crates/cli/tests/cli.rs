use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hsitd::eval::read_summary_csv;
use hsitd::io::{read_cube, read_map_csv, read_map_grid, write_cube, write_mask_pgm, write_spectral_library};
use hsitd::synth::synthetic_library;
use hsitd::{GroundTruthMask, HsiCube};

fn hsitd(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsitd"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = fs::read(&p).unwrap();
                files.push((p, bytes));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn invalid_configs_exit_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "[solver]\ntau = 0.0\n",
        "[solver]\nlambda = -0.1\n",
        "[detector]\nouter = 4\n",
        "[detector]\nouter = 3\ninner = 3\n",
        "[synth]\nalphas = [0.0, 0.5]\n",
        "profile = \"nope\"\n",
    ] {
        let cfg = write_config(dir.path(), &format!("out_dir = \"out\"\n{body}"));
        let o = hsitd(&["implant"], &cfg);
        assert_eq!(code(&o), 1, "{body}: {}", stderr(&o));
        assert!(!dir.path().join("out").exists());
    }
    let o = hsitd(&["decompose"], &dir.path().join("absent.toml"));
    assert_eq!(code(&o), 1);
}

#[test]
fn zero_cube_decomposes_trivially() {
    let dir = tempfile::tempdir().unwrap();
    write_cube(&HsiCube::zeros(6, 5, 4).unwrap(), &dir.path().join("zero")).unwrap();
    write_spectral_library(&synthetic_library(4, 2, 0.05, 1).unwrap(), None, &dir.path().join("lib.csv")).unwrap();
    let cfg = write_config(
        dir.path(),
        "out_dir = \"out\"\n[input]\ncube = \"zero\"\nlibrary = \"lib.csv\"\nnormalization = \"none\"\n",
    );
    let o = hsitd(&["decompose"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    for name in ["L", "S", "C", "residual"] {
        assert!(read_cube(&out.join(name)).unwrap().data().iter().all(|&v| v == 0.0), "{name}");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    assert!(out.join("resolved_config.toml").exists());
}

const SCENE: &str = "[synth.scene]\nheight = 12\nwidth = 12\nbands = 6\nrank = 2\nsigma = 0.01\n\n\
                     [[synth.blocks]]\ntop = 4\nleft = 4\nheight = 2\nwidth = 3\n";

#[test]
fn implant_batches_alpha_grid_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("out_dir = \"out\"\nseed = 5\n[synth]\n{SCENE}"));
    let o = hsitd(&["implant"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let sets: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("alpha_"))
        .collect();
    assert_eq!(sets.len(), 8);
    for set in &sets {
        for f in ["D.hdr", "D.img", "Db.hdr", "Db.img", "L_true.img", "truth.pgm"] {
            assert!(set.path().join(f).exists(), "{f}");
        }
    }
    assert!(out.join("library.csv").exists());

    let first = snapshot(&out);
    let o = hsitd(&["implant"], &cfg);
    assert_eq!(code(&o), 0);
    assert_eq!(snapshot(&out), first);

    let o = hsitd(&["implant", "--seed", "6"], &cfg);
    assert_eq!(code(&o), 0);
    assert_ne!(snapshot(&out), first);
}

#[test]
fn strategy_one_map_covers_region_tested() {
    let dir = tempfile::tempdir().unwrap();
    let cube = HsiCube::from_fn(101, 101, 4, |r, c, k| ((r * 7 + c * 3 + k * 11) % 17) as f64 / 17.0 + 0.1).unwrap();
    write_cube(&cube, &dir.path().join("scene")).unwrap();
    write_spectral_library(&synthetic_library(4, 2, 0.05, 2).unwrap(), None, &dir.path().join("lib.csv")).unwrap();
    let cfg = write_config(
        dir.path(),
        "out_dir = \"out\"\n[input]\ncube = \"scene\"\nlibrary = \"lib.csv\"\n\
         [detector]\nstrategy = \"one\"\nsource = \"original\"\n",
    );
    let o = hsitd(&["detect", "--threads", "1"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let map = read_map_csv(&out.join("map_srbbh_original.csv")).unwrap();
    assert_eq!((map.height, map.width, map.row_offset, map.col_offset), (97, 97, 2, 2));
    assert_eq!(read_map_grid(&out.join("map_srbbh_original")).unwrap().scores, map.scores.iter().map(|&v| v as f32 as f64).collect::<Vec<_>>());
    assert!(out.join("map_srbbh_original.pgm").exists());
}

#[test]
fn missing_prerequisites_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    write_cube(&HsiCube::zeros(8, 8, 3).unwrap(), &dir.path().join("scene")).unwrap();
    write_spectral_library(&synthetic_library(3, 1, 0.05, 2).unwrap(), None, &dir.path().join("lib.csv")).unwrap();
    let cfg = write_config(
        dir.path(),
        "out_dir = \"out\"\n[input]\ncube = \"scene\"\nlibrary = \"lib.csv\"\nnormalization = \"none\"\n",
    );
    let o = hsitd(&["detect"], &cfg);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("hsitd decompose"), "{}", stderr(&o));

    fs::write(dir.path().join("truth.csv"), "0,1\n0,0\n").unwrap();
    let cfg = write_config(dir.path(), "out_dir = \"empty\"\n[input]\ntruth = \"truth.csv\"\n");
    let o = hsitd(&["evaluate"], &cfg);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("hsitd detect"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "out_dir = \"out\"\n");
    let o = hsitd(&["evaluate"], &cfg);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("input.truth"));
}

#[test]
fn evaluate_scores_maps_and_rejects_empty_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    let mut truth = vec![false; 16];
    truth[5] = true;
    truth[10] = true;
    write_mask_pgm(&GroundTruthMask::new(4, 4, truth.clone()).unwrap(), &dir.path().join("truth.pgm")).unwrap();
    let mut csv = String::from("row,col,score\n");
    for (k, &t) in truth.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", k / 4, k % 4, if t { 1.0 } else { 0.0 }));
    }
    fs::write(out.join("map_perfect.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "out_dir = \"out\"\n[input]\ntruth = \"truth.pgm\"\n[eval]\nsvg = true\nalpha = 0.5\n",
    );
    let o = hsitd(&["evaluate"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_summary_csv(&out.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].scenario.as_str(), rows[0].alpha, rows[0].auc), ("perfect", Some(0.5), 1.0));
    assert!(out.join("roc_perfect.csv").exists());
    assert!(fs::read_to_string(out.join("roc.svg")).unwrap().starts_with("<svg"));

    fs::write(out.join("map_blank.csv"), "row,col,score\n").unwrap();
    let o = hsitd(&["evaluate"], &cfg);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn pipeline_runs_every_stage_on_a_small_scene() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "out_dir = \"out\"\nseed = 3\n[solver]\ntau = 1.0\nlambda = 0.5\n\
             [eval]\nsvg = true\n[synth]\nalphas = [0.5, 1.0]\n{SCENE}"
        ),
    );
    let o = hsitd(&["pipeline"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let rows = read_summary_csv(&out.join("summary.csv")).unwrap();
    // three dictionary sources plus the sparse map, per fill fraction
    assert_eq!(rows.len(), 8);
    for alpha in [0.5, 1.0] {
        let names: Vec<&str> = rows.iter().filter(|r| r.alpha == Some(alpha)).map(|r| r.scenario.as_str()).collect();
        assert_eq!(names, ["srbbh_background", "srbbh_original", "srbbh_lowrank", "sparse"]);
        let run = out.join(format!("alpha_{alpha}"));
        for f in ["L.hdr", "S.img", "C.hdr", "trace.csv", "sparse_db.pgm", "sparse_mask.pgm", "roc.svg"] {
            assert!(run.join(f).exists(), "{f}");
        }
    }
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.auc)));
    let resolved = fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("tau = 1.0"));
}
