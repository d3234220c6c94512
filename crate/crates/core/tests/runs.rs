//! Run directories, file formats and the command-line binary.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use genco::io::{
    dump, parse_render, synth_levels, synth_terrain, Dataset, DatasetManifest, Regime, RunConfig, CHECKPOINT_FILE,
    CONFIG_FILE, METRICS_FILE, REPORT_FILE, SAMPLES_FILE,
};
use genco::io::{levels_to_string, GridFile};
use genco::solve::LevelSpec;

fn tiny(regime: Regime) -> RunConfig {
    let mut cfg = RunConfig::for_regime(regime);
    cfg.levels.count = 10;
    cfg.levels.held_out = 4;
    cfg.terrain.count = 10;
    cfg.terrain.height = 4;
    cfg.terrain.width = 4;
    cfg.gan.epochs = 2;
    cfg.gan.batch_size = 5;
    cfg.vqvae.epochs = 2;
    cfg.vqvae.batch_size = 5;
    cfg.eval.n_samples = 12;
    cfg.eval.k = 3;
    cfg.eval.epoch_samples = 4;
    cfg
}

const RUN_FILES: [&str; 5] = [CONFIG_FILE, METRICS_FILE, CHECKPOINT_FILE, SAMPLES_FILE, REPORT_FILE];

#[test]
fn repeated_runs_are_byte_identical() {
    for regime in [
        Regime::ConstrainedGan,
        Regime::PenalizedGan,
        Regime::Vqvae,
        Regime::BaselinePostprocess,
    ] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(regime);
        genco::io::run(&cfg, &dir.path().join("a")).unwrap();
        genco::io::run(&cfg, &dir.path().join("b")).unwrap();
        for f in RUN_FILES {
            let a = fs::read(dir.path().join("a").join(f)).unwrap();
            let b = fs::read(dir.path().join("b").join(f)).unwrap();
            assert!(a == b, "{regime:?}: {f} differs");
        }
        // A different seed changes the trained model.
        let mut other = cfg.clone();
        other.seed += 1;
        genco::io::run(&other, &dir.path().join("c")).unwrap();
        assert_ne!(
            fs::read(dir.path().join("a").join(CHECKPOINT_FILE)).unwrap(),
            fs::read(dir.path().join("c").join(CHECKPOINT_FILE)).unwrap()
        );
    }
}

#[test]
fn config_written_by_a_run_reloads_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Regime::Vqvae);
    genco::io::run(&cfg, dir.path()).unwrap();
    assert_eq!(RunConfig::load(&dir.path().join(CONFIG_FILE)).unwrap(), cfg);
}

#[test]
fn manifests_round_trip_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = LevelSpec::new(5, 5);
    let levels = synth_levels(&spec, 30, 5, &Default::default()).unwrap();
    let m = DatasetManifest::write(&dir.path().join("l"), &Dataset::Levels(levels.clone()), 5, 5, 5).unwrap();
    let (man, data) = DatasetManifest::load(&m, Some(&spec)).unwrap();
    assert_eq!((man.count, man.seed), (30, 5));
    assert_eq!(data, Dataset::Levels(levels));

    let maps = synth_terrain(6, 6, 20, 3, &Default::default()).unwrap();
    let m = DatasetManifest::write(&dir.path().join("t"), &Dataset::Terrain(maps.clone()), 6, 6, 3).unwrap();
    assert_eq!(DatasetManifest::load(&m, None).unwrap().1, Dataset::Terrain(maps));
}

#[test]
fn thousand_level_render_is_fast_and_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let spec = LevelSpec::new(5, 5);
    let levels = synth_levels(&spec, 1000, 11, &Default::default()).unwrap();
    let path = dir.path().join("s.jsonl");
    fs::write(&path, levels_to_string(5, 5, &levels).unwrap()).unwrap();
    let start = Instant::now();
    let text = dump(&path).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(parse_render(&text).unwrap(), levels);
    assert!(matches!(GridFile::read(&path).unwrap(), GridFile::Levels(_, l) if l.len() == 1000));
}

fn genco(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_genco"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn cli_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny(Regime::ConstrainedGan).save(&d.join("c.toml")).unwrap();

    let out = genco(&["synth-levels", "--config", "c.toml", "--out", "data"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = genco(&["train", "--config", "c.toml", "--seed", "4", "--out", "run"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Coverage"));

    let out = genco(&["generate", "run", "--n", "12", "--out", "again.jsonl"], d);
    assert!(out.status.success());
    assert_eq!(
        fs::read(d.join("again.jsonl")).unwrap(),
        fs::read(d.join("run").join(SAMPLES_FILE)).unwrap()
    );

    let out = genco(
        &[
            "evaluate",
            "again.jsonl",
            "data/manifest.json",
            "--k",
            "3",
            "--out",
            "m.json",
        ],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("m.json").exists());

    let out = genco(&["dump", "again.jsonl"], d);
    assert!(out.status.success());
    assert_eq!(parse_render(&String::from_utf8_lossy(&out.stdout)).unwrap().len(), 12);

    let out = genco(&["dump", "missing.jsonl"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));

    fs::write(d.join("bad.toml"), "[gan]\nepochz = 3\n").unwrap();
    let out = genco(&["train", "--config", "bad.toml", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochz"));

    let out = genco(&["train", "--regime", "nope", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(2));
}
