use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;

use genco::io::{self, synth_levels, synth_terrain, Dataset, DatasetManifest, Regime, RunConfig, REPORT_FILE};

#[derive(Parser)]
#[command(
    name = "genco",
    version,
    about = "Train and evaluate solver-constrained generative models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic set of feasible levels plus its manifest.
    SynthLevels {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of levels; defaults to the config's training plus held-out count.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic set of terrain maps plus its manifest.
    SynthTerrain {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one regime into a run directory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        regime: Option<Regime>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw samples from a trained run.
    Generate {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Sampling seed; the run's own seed reproduces its samples file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a samples file against a reference dataset or grid file.
    Evaluate {
        samples: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = genco::metrics::DEFAULT_K)]
        k: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Penalized runs over the configured gamma ladder.
    SweepGamma {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a samples file as character art.
    Dump {
        samples: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn execute(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::SynthLevels { config, n, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let l = &cfg.levels;
            let n = n.unwrap_or(l.count + l.held_out);
            let seed = seed.unwrap_or(l.seed);
            let levels = synth_levels(&l.spec(), n, seed, &l.style)?;
            let m = DatasetManifest::write(&out, &Dataset::Levels(levels), l.height, l.width, seed)?;
            println!("{}", m.display());
        }
        Cmd::SynthTerrain { config, n, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let t = &cfg.terrain;
            let n = n.unwrap_or(t.count);
            let seed = seed.unwrap_or(t.seed);
            let maps = synth_terrain(t.height, t.width, n, seed, &t.style)?;
            let m = DatasetManifest::write(&out, &Dataset::Terrain(maps), t.height, t.width, seed)?;
            println!("{}", m.display());
        }
        Cmd::Train {
            config,
            regime,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(r) = regime {
                cfg.regime = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = io::run(&cfg, &out).with_context(|| format!("training into {}", out.display()))?;
            info!("wrote {}", out.join(REPORT_FILE).display());
            print!("{}", report.metrics.to_table());
        }
        Cmd::Generate { run_dir, n, seed, out } => {
            let seed = match seed {
                Some(s) => s,
                None => {
                    RunConfig::load(&run_dir.join(io::CONFIG_FILE))
                        .with_context(|| format!("loading run {}", run_dir.display()))?
                        .seed
                }
            };
            let samples =
                io::generate(&run_dir, n, seed).with_context(|| format!("loading run {}", run_dir.display()))?;
            samples.write(&out, io::run_dims(&run_dir)?)?;
        }
        Cmd::Evaluate {
            samples,
            reference,
            k,
            out,
        } => {
            let report = io::evaluate(&samples, &reference, k)
                .with_context(|| format!("evaluating {} against {}", samples.display(), reference.display()))?;
            if let Some(p) = out {
                fs::write(&p, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            print!("{}", report.to_table());
        }
        Cmd::SweepGamma { config, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let rows = io::sweep_gamma(&cfg, &out).with_context(|| format!("sweeping into {}", out.display()))?;
            println!(
                "{:>10} {:>12} {:>8} {:>8} {:>8}",
                "gamma", "sp_cost", "density", "coverage", "unique"
            );
            for r in rows {
                println!(
                    "{:>10} {:>12.4} {:>8.3} {:>8.3} {:>8.3}",
                    r.gamma, r.mean_sp_cost, r.density, r.coverage, r.unique
                );
            }
        }
        Cmd::Dump { samples, out } => {
            let text = io::dump(&samples).with_context(|| format!("reading {}", samples.display()))?;
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GENCO_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genco: error: {e:#}");
            if let Some(src) = e.downcast_ref::<genco::Error>() {
                if matches!(src, genco::Error::Parameter(_) | genco::Error::Parse(_)) {
                    return ExitCode::from(2);
                }
            }
            ExitCode::FAILURE
        }
    }
}
