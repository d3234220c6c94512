//! Experiment orchestration: training runs, sample generation, evaluation,
//! renders and the γ sweep.
//!
//! A run directory holds `config.toml`, `metrics.jsonl` (one record per
//! epoch, epoch 0 being the untrained model), `checkpoint.json`,
//! `samples.jsonl` and `report.json`. Nothing time-dependent is written, so
//! repeating a run reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::config::{Regime, RunConfig};
use super::format::{
    levels_to_string, render_levels, sha256_hex, terrain_to_string, Dataset, DatasetManifest, GridFile, GridHeader,
    MANIFEST_FORMAT, RENDER_MAGIC,
};
use super::synth::{synth_levels, synth_terrain};
use crate::error::{Error, Result};
use crate::metrics::{uniqueness, MetricReport};
use crate::nn::{Checkpoint, OptimState};
use crate::rng::RngStream;
use crate::solve::{cost_map, shortest_path, Level, LevelSpec, Tile, DEFAULT_COST_TABLE, NUM_CLASSES};
use crate::train::{
    constrained_gan_epoch, generate_levels, generate_maps, path_objective, penalized_gan_epoch,
    postprocess_baseline_epoch, vqvae_epoch, Codebook, GanState, Generator, Head, StepStats, Vqvae, VqvaeState,
};

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const REPORT_FILE: &str = "report.json";

// Stream tags; model init, training, per-epoch and final sampling draw from
// independent forks of the run seed.
const INIT_TAG: u64 = 1;
const TRAIN_TAG: u64 = 2;
const SAMPLE_TAG: u64 = 3;
const EPOCH_TAG: u64 = 1 << 32;

/// Generated samples of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    Levels(Vec<Level>),
    Maps {
        height: usize,
        width: usize,
        maps: Vec<Vec<f64>>,
    },
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Levels(l) => l.len(),
            Samples::Maps { maps, .. } => maps.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_file_text(&self, spec_dims: (usize, usize)) -> Result<String> {
        match self {
            Samples::Levels(l) => levels_to_string(spec_dims.0, spec_dims.1, l),
            Samples::Maps { height, width, maps } => terrain_to_string(*height, *width, maps),
        }
    }

    pub fn write(&self, path: &Path, spec_dims: (usize, usize)) -> Result<()> {
        fs::write(path, self.to_file_text(spec_dims)?)?;
        Ok(())
    }
}

/// Tile indices of the most likely class per cell (first wins ties).
pub fn argmax_tiles(map: &[f64]) -> Vec<u8> {
    map.chunks(NUM_CLASSES)
        .map(|cell| {
            let mut best = 0;
            for k in 1..cell.len() {
                if cell[k] > cell[best] {
                    best = k;
                }
            }
            best as u8
        })
        .collect()
}

fn argmax_level(map: &[f64], height: usize, width: usize) -> Result<Level> {
    let tiles = argmax_tiles(map)
        .into_iter()
        .map(|k| Tile::from_index(k as usize).expect("class index in range"))
        .collect();
    Level::new(height, width, tiles)
}

/// Feasibility rate, unique fraction and mean shortest-path cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSummary {
    pub feasible_rate: f64,
    pub unique: f64,
    pub mean_cost: f64,
}

pub fn summarize(samples: &Samples, spec: Option<&LevelSpec>, table: &[f64; NUM_CLASSES]) -> Result<SampleSummary> {
    if samples.is_empty() {
        return Err(Error::Parameter("no samples".into()));
    }
    let n = samples.len() as f64;
    match samples {
        Samples::Levels(levels) => {
            let feasible = match spec {
                Some(s) => levels.iter().filter(|l| l.satisfies(s)).count() as f64 / n,
                None => 1.0,
            };
            let mut cost = 0.0;
            for l in levels {
                cost += path_objective(&l.to_one_hot::<f64>(), l.height(), l.width(), table)?.0;
            }
            Ok(SampleSummary {
                feasible_rate: feasible,
                unique: uniqueness(levels)?,
                mean_cost: cost / n,
            })
        }
        Samples::Maps { height, width, maps } => {
            let (mut cost, mut valid) = (0.0, 0usize);
            for m in maps {
                let grid = cost_map(m, *height, *width, table)?;
                let path = shortest_path(&grid)?;
                valid += usize::from(path.is_valid_for(&grid));
                cost += path.total_cost;
            }
            let keys: Vec<Vec<u8>> = maps.iter().map(|m| argmax_tiles(m)).collect();
            Ok(SampleSummary {
                feasible_rate: valid as f64 / n,
                unique: uniqueness(&keys)?,
                mean_cost: cost / n,
            })
        }
    }
}

/// One line of `metrics.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub individual_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub critic_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub held_out_recon: Option<f64>,
    /// Over the epoch's evaluation samples.
    pub feasible_rate: f64,
    pub unique: f64,
    pub sample_cost: f64,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub regime: Regime,
    pub seed: u64,
    pub epochs: usize,
    pub dataset_sha256: String,
    pub metrics: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub held_out_recon_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub held_out_recon_final: Option<f64>,
}

/// Training data resolved from a manifest or synthesised.
pub enum TrainData {
    Levels { train: Vec<Level>, held_out: Vec<Level> },
    Terrain(Vec<Vec<f64>>),
}

pub fn load_data(cfg: &RunConfig) -> Result<(TrainData, String)> {
    if cfg.regime.uses_terrain() {
        let t = &cfg.terrain;
        let maps = match &t.manifest {
            Some(path) => match DatasetManifest::load(path, None)? {
                (m, Dataset::Terrain(maps)) if m.height == t.height && m.width == t.width => maps,
                _ => {
                    return Err(Error::DataValidation(format!(
                        "{} is not a {}x{} terrain set",
                        path.display(),
                        t.height,
                        t.width
                    )))
                }
            },
            None => synth_terrain(t.height, t.width, t.count, t.seed, &t.style)?,
        };
        if maps.len() < t.count {
            return Err(Error::DataValidation(format!(
                "need {} maps, dataset has {}",
                t.count,
                maps.len()
            )));
        }
        let maps = maps[..t.count].to_vec();
        let sha = sha256_hex(terrain_to_string(t.height, t.width, &maps)?.as_bytes());
        Ok((TrainData::Terrain(maps), sha))
    } else {
        let l = &cfg.levels;
        let spec = l.spec();
        let held = if cfg.regime == Regime::Vqvae { l.held_out } else { 0 };
        let levels = match &l.manifest {
            Some(path) => match DatasetManifest::load(path, Some(&spec))? {
                (_, Dataset::Levels(levels)) => levels,
                _ => return Err(Error::DataValidation(format!("{} is not a level set", path.display()))),
            },
            None => synth_levels(&spec, l.count + held, l.seed, &l.style)?,
        };
        if levels.len() < l.count + held {
            return Err(Error::DataValidation(format!(
                "need {} levels, dataset has {}",
                l.count + held,
                levels.len()
            )));
        }
        let train = levels[..l.count].to_vec();
        let held_out = levels[l.count..l.count + held].to_vec();
        let sha = sha256_hex(levels_to_string(l.height, l.width, &train)?.as_bytes());
        Ok((TrainData::Levels { train, held_out }, sha))
    }
}

/// A model of any regime.
pub enum Model {
    Gan(GanState<f64>),
    Vqvae(VqvaeState<f64>),
}

fn head_for(regime: Regime) -> Head {
    if regime.uses_terrain() {
        Head::CellSoftmax
    } else {
        Head::Scores
    }
}

fn data_dim(cfg: &RunConfig) -> usize {
    if cfg.regime.uses_terrain() {
        cfg.terrain.height * cfg.terrain.width * NUM_CLASSES
    } else {
        cfg.levels.spec().dim()
    }
}

fn build_model(cfg: &RunConfig, data: &TrainData, rng: &mut RngStream) -> Result<Model> {
    match (cfg.regime, data) {
        (Regime::Vqvae, TrainData::Levels { train, .. }) => Ok(Model::Vqvae(VqvaeState::new(
            &cfg.vqvae,
            &cfg.levels.spec(),
            train,
            rng,
        )?)),
        (regime, _) => {
            let mut state = GanState::new(&cfg.gan, data_dim(cfg), head_for(regime), rng)?;
            if let Some(path) = &cfg.init_from {
                let ck = Checkpoint::<f64>::from_text(&fs::read_to_string(path)?)?;
                let g = ck.net("generator")?;
                let c = ck.net("critic")?;
                if g.input_dim() != state.generator.noise_dim()
                    || g.output_dim() != state.generator.out_dim()
                    || c.input_dim() != state.critic.input_dim()
                {
                    return Err(Error::Dimension(format!(
                        "checkpoint {} does not fit this run",
                        path.display()
                    )));
                }
                state.generator.net = g.clone();
                state.critic = c.clone();
                info!("initialised generator and critic from {}", path.display());
            }
            Ok(Model::Gan(state))
        }
    }
}

fn sample_model(cfg: &RunConfig, model: &Model, n: usize, rng: &mut RngStream) -> Result<Samples> {
    match model {
        Model::Vqvae(st) => Ok(Samples::Levels(st.model.sample(&cfg.levels.spec(), n, rng)?)),
        Model::Gan(st) if cfg.regime.uses_terrain() => Ok(Samples::Maps {
            height: cfg.terrain.height,
            width: cfg.terrain.width,
            maps: generate_maps(&st.generator, n, rng)?,
        }),
        Model::Gan(st) => Ok(Samples::Levels(generate_levels(
            &st.generator,
            &cfg.levels.spec(),
            n,
            rng,
        )?)),
    }
}

fn cost_table(cfg: &RunConfig) -> &[f64; NUM_CLASSES] {
    if cfg.regime == Regime::Vqvae {
        &cfg.vqvae.cost_table
    } else {
        &cfg.gan.cost_table
    }
}

fn epochs(cfg: &RunConfig) -> usize {
    if cfg.regime == Regime::Vqvae {
        cfg.vqvae.epochs
    } else {
        cfg.gan.epochs
    }
}

fn dims(cfg: &RunConfig) -> (usize, usize) {
    if cfg.regime.uses_terrain() {
        (cfg.terrain.height, cfg.terrain.width)
    } else {
        (cfg.levels.height, cfg.levels.width)
    }
}

fn checkpoint(cfg: &RunConfig, model: &Model, step: u64) -> Checkpoint<f64> {
    let ck = Checkpoint::new(cfg.seed, step);
    match model {
        Model::Gan(st) => ck
            .with_net("generator", &st.generator.net)
            .with_net("critic", &st.critic),
        Model::Vqvae(st) => ck
            .with_net("encoder", &st.model.encoder)
            .with_net("decoder", &st.model.decoder)
            .with_tensor("codebook", &st.model.codebook.embeddings),
    }
}

/// Rebuilds the sampling part of a model from a run's checkpoint.
fn restore(cfg: &RunConfig, ck: &Checkpoint<f64>) -> Result<Model> {
    if cfg.regime == Regime::Vqvae {
        let model = Vqvae {
            encoder: ck.net("encoder")?.clone(),
            decoder: ck.net("decoder")?.clone(),
            codebook: Codebook::from_rows(
                &ck.tensor("codebook")?
                    .data()
                    .chunks(cfg.vqvae.embed_dim)
                    .map(<[f64]>::to_vec)
                    .collect::<Vec<_>>(),
            )?,
            patch_radius: cfg.vqvae.patch_radius,
        };
        let lr = cfg.vqvae.lr;
        Ok(Model::Vqvae(VqvaeState {
            model,
            enc_opt: OptimState::with_method(cfg.vqvae.optimizer, lr),
            dec_opt: OptimState::with_method(cfg.vqvae.optimizer, lr),
            code_opt: OptimState::with_method(cfg.vqvae.optimizer, lr),
        }))
    } else {
        let mut st = GanState::new(
            &cfg.gan,
            data_dim(cfg),
            head_for(cfg.regime),
            &mut RngStream::new(cfg.seed),
        )?;
        st.generator = Generator {
            net: ck.net("generator")?.clone(),
            head: head_for(cfg.regime),
        };
        st.critic = ck.net("critic")?.clone();
        Ok(Model::Gan(st))
    }
}

fn to_jsonl<S: Serialize>(records: &[S]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn step_record(epoch: usize, s: &StepStats, summary: SampleSummary, critic: bool) -> EpochRecord {
    EpochRecord {
        epoch,
        group_loss: Some(s.group_loss),
        individual_loss: Some(s.individual_loss),
        critic_loss: critic.then_some(s.critic_loss),
        held_out_recon: None,
        feasible_rate: summary.feasible_rate,
        unique: summary.unique,
        sample_cost: summary.mean_cost,
    }
}

/// Trains one regime end to end and writes the run directory.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    cfg.save(&out.join(CONFIG_FILE))?;
    let started = Instant::now();
    let (data, dataset_sha256) = load_data(cfg)?;
    let root = RngStream::new(cfg.seed);
    let mut model = build_model(cfg, &data, &mut root.fork(INIT_TAG))?;
    let mut rng = root.fork(TRAIN_TAG);
    let spec = cfg.levels.spec();
    let level_spec = (!cfg.regime.uses_terrain()).then_some(&spec);
    let table = cost_table(cfg);
    let n_epochs = epochs(cfg);

    let held_recon = |m: &Model| -> Result<Option<f64>> {
        match (m, &data) {
            (Model::Vqvae(st), TrainData::Levels { held_out, .. }) => Ok(Some(st.model.recon_loss(held_out, &spec)?)),
            _ => Ok(None),
        }
    };
    let epoch_eval = |m: &Model, epoch: usize| -> Result<SampleSummary> {
        let s = sample_model(
            cfg,
            m,
            cfg.eval.epoch_samples.max(1),
            &mut root.fork(EPOCH_TAG + epoch as u64),
        )?;
        summarize(&s, level_spec, table)
    };

    let initial_recon = held_recon(&model)?;
    let s0 = epoch_eval(&model, 0)?;
    let mut records = vec![EpochRecord {
        epoch: 0,
        group_loss: None,
        individual_loss: None,
        critic_loss: None,
        held_out_recon: initial_recon,
        feasible_rate: s0.feasible_rate,
        unique: s0.unique,
        sample_cost: s0.mean_cost,
    }];
    let mut last_group = None;
    for epoch in 1..=n_epochs {
        let rec = match (&mut model, &data) {
            (Model::Gan(st), TrainData::Levels { train, .. }) => {
                let s = if cfg.regime == Regime::BaselinePostprocess {
                    postprocess_baseline_epoch(st, train, &spec, &cfg.gan, &mut rng)?
                } else {
                    constrained_gan_epoch(st, train, &spec, &cfg.gan, &mut rng)?
                };
                last_group = Some(s.group_loss);
                step_record(epoch, &s, epoch_eval(&model, epoch)?, true)
            }
            (Model::Gan(st), TrainData::Terrain(maps)) => {
                let t = &cfg.terrain;
                let s = penalized_gan_epoch(st, maps, t.height, t.width, &cfg.gan, &mut rng)?;
                last_group = Some(s.group_loss);
                step_record(epoch, &s, epoch_eval(&model, epoch)?, true)
            }
            (Model::Vqvae(st), TrainData::Levels { train, .. }) => {
                let s = vqvae_epoch(st, train, &spec, &cfg.vqvae, &mut rng)?;
                let summary = epoch_eval(&model, epoch)?;
                EpochRecord {
                    epoch,
                    group_loss: Some(s.recon + cfg.vqvae.beta1 * s.quant),
                    individual_loss: Some(s.objective),
                    critic_loss: None,
                    held_out_recon: held_recon(&model)?,
                    feasible_rate: summary.feasible_rate,
                    unique: summary.unique,
                    sample_cost: summary.mean_cost,
                }
            }
            (Model::Vqvae(_), TrainData::Terrain(_)) => {
                return Err(Error::Contract("vqvae runs train on levels".into()));
            }
        };
        debug!("epoch {epoch}: {rec:?}");
        records.push(rec);
    }
    fs::write(out.join(METRICS_FILE), to_jsonl(&records)?)?;
    fs::write(
        out.join(CHECKPOINT_FILE),
        checkpoint(cfg, &model, n_epochs as u64).to_text()?,
    )?;

    let samples = sample_model(cfg, &model, cfg.eval.n_samples, &mut root.fork(SAMPLE_TAG))?;
    samples.write(&out.join(SAMPLES_FILE), dims(cfg))?;
    let reals: Vec<Vec<f64>> = match &data {
        TrainData::Levels { train, .. } => train.iter().map(Level::to_one_hot).collect(),
        TrainData::Terrain(maps) => maps.clone(),
    };
    let mut metrics = report_for(&samples, &reals, level_spec, table, cfg.eval.k)?;
    let final_recon = held_recon(&model)?;
    metrics.mean_group_loss = if cfg.regime == Regime::Vqvae {
        final_recon
    } else {
        last_group
    };
    let report = RunReport {
        regime: cfg.regime,
        seed: cfg.seed,
        epochs: n_epochs,
        dataset_sha256,
        metrics,
        held_out_recon_initial: initial_recon,
        held_out_recon_final: final_recon,
    };
    fs::write(out.join(REPORT_FILE), serde_json::to_string_pretty(&report)? + "\n")?;
    info!(
        "{} run finished: {} epochs in {:.1?}, unique {:.3}",
        cfg.regime.name(),
        n_epochs,
        started.elapsed(),
        report.metrics.unique_fraction
    );
    Ok(report)
}

fn report_for(
    samples: &Samples,
    reals: &[Vec<f64>],
    spec: Option<&LevelSpec>,
    table: &[f64; NUM_CLASSES],
    k: usize,
) -> Result<MetricReport> {
    let summary = summarize(samples, spec, table)?;
    let mut report = match samples {
        Samples::Levels(levels) => {
            let fakes: Vec<Vec<f64>> = levels.iter().map(Level::to_one_hot).collect();
            MetricReport::compute(&fakes, reals, levels, k)?
        }
        Samples::Maps { maps, .. } => {
            let keys: Vec<Vec<u8>> = maps.iter().map(|m| argmax_tiles(m)).collect();
            MetricReport::compute(maps, reals, &keys, k)?
        }
    };
    report.feasible_fraction = Some(summary.feasible_rate);
    report.mean_individual_loss = summary.mean_cost;
    Ok(report)
}

/// Draws `n` fresh samples from a finished run. With the run's own seed
/// this reproduces its `samples.jsonl`.
pub fn generate(run_dir: &Path, n: usize, seed: u64) -> Result<Samples> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    let (cfg, model) = load_model(run_dir)?;
    sample_model(&cfg, &model, n, &mut RngStream::new(seed).fork(SAMPLE_TAG))
}

/// The configuration and trained model of a finished run.
pub fn load_model(run_dir: &Path) -> Result<(RunConfig, Model)> {
    let cfg = RunConfig::load(&run_dir.join(CONFIG_FILE))?;
    let ck = Checkpoint::<f64>::from_text(&fs::read_to_string(run_dir.join(CHECKPOINT_FILE))?)?;
    let model = restore(&cfg, &ck)?;
    Ok((cfg, model))
}

/// Dimensions of a run, for writing its samples.
pub fn run_dims(run_dir: &Path) -> Result<(usize, usize)> {
    Ok(dims(&RunConfig::load(&run_dir.join(CONFIG_FILE))?))
}

fn read_samples(path: &Path) -> Result<(GridHeader, Samples)> {
    Ok(match GridFile::read(path)? {
        GridFile::Levels(h, l) => (h, Samples::Levels(l)),
        GridFile::Terrain(h, maps) => {
            let (height, width) = (h.height, h.width);
            (h, Samples::Maps { height, width, maps })
        }
    })
}

/// Reference data from either a dataset manifest or a plain grid file.
fn read_reference(path: &Path) -> Result<(GridHeader, Samples)> {
    let text = fs::read_to_string(path)?;
    let is_manifest = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.get("format").and_then(|f| f.as_str()).map(|f| f == MANIFEST_FORMAT))
        .unwrap_or(false);
    if !is_manifest {
        return read_samples(path);
    }
    let (m, data) = DatasetManifest::load(path, None)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let (header, _) = read_samples(&dir.join(&m.file))?;
    Ok(match data {
        Dataset::Levels(l) => (header, Samples::Levels(l)),
        Dataset::Terrain(maps) => (
            header,
            Samples::Maps {
                height: m.height,
                width: m.width,
                maps,
            },
        ),
    })
}

/// Metrics of a samples file against a reference set.
pub fn evaluate(samples_path: &Path, reference_path: &Path, k: usize) -> Result<MetricReport> {
    let (sh, samples) = read_samples(samples_path)?;
    let (rh, reference) = read_reference(reference_path)?;
    if sh.format != rh.format || sh.height != rh.height || sh.width != rh.width || sh.legend != rh.legend {
        return Err(Error::Dimension(format!(
            "samples are {} {}x{}, reference is {} {}x{}",
            sh.format, sh.height, sh.width, rh.format, rh.height, rh.width
        )));
    }
    let reals: Vec<Vec<f64>> = match &reference {
        Samples::Levels(l) => l.iter().map(Level::to_one_hot).collect(),
        Samples::Maps { maps, .. } => maps.clone(),
    };
    let spec = LevelSpec::new(sh.height, sh.width);
    let level_spec = matches!(samples, Samples::Levels(_)).then_some(&spec);
    report_for(&samples, &reals, level_spec, &DEFAULT_COST_TABLE, k)
}

/// Character-art render of a samples file. Level files render losslessly;
/// terrain maps render their most likely tile per cell.
pub fn dump(samples_path: &Path) -> Result<String> {
    match read_samples(samples_path)?.1 {
        Samples::Levels(l) => Ok(render_levels(&l)),
        Samples::Maps { height, width, maps } => {
            let levels = maps
                .iter()
                .map(|m| argmax_level(m, height, width))
                .collect::<Result<Vec<_>>>()?;
            let text = render_levels(&levels);
            Ok(text.replacen(RENDER_MAGIC, &format!("{RENDER_MAGIC} argmax"), 1))
        }
    }
}

/// One row of a γ sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub mean_sp_cost: f64,
    pub density: f64,
    pub coverage: f64,
    pub unique: f64,
    pub run_dir: PathBuf,
}

/// Penalized runs over `cfg.sweep.gammas`, one directory each, plus a
/// `sweep.jsonl` summary.
pub fn sweep_gamma(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for (i, gamma) in cfg.sweep.gammas.iter().enumerate() {
        let mut c = cfg.clone();
        c.regime = Regime::PenalizedGan;
        c.gan.gamma = *gamma;
        let dir = out.join(format!("gamma-{i}"));
        let r = run(&c, &dir)?;
        info!("gamma {gamma}: sp cost {:.4}", r.metrics.mean_individual_loss);
        rows.push(SweepRow {
            gamma: *gamma,
            mean_sp_cost: r.metrics.mean_individual_loss,
            density: r.metrics.density,
            coverage: r.metrics.coverage,
            unique: r.metrics.unique_fraction,
            run_dir: PathBuf::from(format!("gamma-{i}")),
        });
    }
    fs::write(out.join("sweep.jsonl"), to_jsonl(&rows)?)?;
    Ok(rows)
}
