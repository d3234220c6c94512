//! Datasets, file formats, configuration and experiment orchestration.

mod config;
mod format;
mod run;
mod synth;

pub use config::{EvalConfig, LevelDataConfig, Regime, RunConfig, SweepConfig, TerrainDataConfig, DEFAULT_GAMMAS};
pub use format::{
    legend, levels_to_string, parse_levels, parse_render, parse_terrain, render_levels, sha256_hex, terrain_to_string,
    Dataset, DatasetKind, DatasetManifest, GridFile, GridHeader, FORMAT_VERSION, LEVELS_FORMAT, MANIFEST_FORMAT,
    MANIFEST_NAME, RENDER_MAGIC, TERRAIN_FORMAT,
};
pub use run::{
    argmax_tiles, dump, evaluate, generate, load_data, load_model, run, run_dims, summarize, sweep_gamma, EpochRecord,
    Model, RunReport, SampleSummary, Samples, SweepRow, TrainData, CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE,
    REPORT_FILE, SAMPLES_FILE,
};
pub use synth::{class_frequencies, synth_levels, synth_terrain, LevelStyle, TerrainStyle};
