//! `hoc` — Monte Carlo harness for OFDM reception under nonlinear PA
//! distortion.
//!
//! Subcommands: `sweep` (full BER grid to CSV), `point` (single grid
//! cell), `terms` (IMD term counts), `alpha` (Bussgang gains across the
//! IBO grid), `sparsity` (ranked full-combiner coefficients).
//!
//! Configuration comes from a JSON document (`--config`); every flag
//! overrides its config field. Worker count follows the rayon default
//! (available parallelism) and can be pinned with `RAYON_NUM_THREADS`.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hoc_core::sim::{self, ExperimentConfig, ReceiverKind, SweepContext};

#[derive(Parser)]
#[command(name = "hoc", version, about = "OFDM link simulation with nonlinear-PA-aware receivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON experiment config; defaults apply for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated receiver list override
    /// (zf,cnc,hoc-imd3,hoc-imd5,hoc-full3,lc-hoc).
    #[arg(long, value_delimiter = ',')]
    receivers: Option<Vec<String>>,
    /// Channel-instance count override.
    #[arg(long)]
    instances: Option<usize>,
    /// Frame-count override, applied to both training and test sets.
    #[arg(long)]
    frames: Option<usize>,
    /// Record measured wall time in the CSV (off keeps reruns
    /// byte-identical).
    #[arg(long)]
    timing: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                ExperimentConfig::from_json(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if let Some(receivers) = &self.receivers {
            cfg.receivers = receivers
                .iter()
                .map(|s| s.parse::<ReceiverKind>())
                .collect::<hoc_core::Result<_>>()?;
        }
        if let Some(n) = self.instances {
            cfg.n_channel_instances = n;
        }
        if let Some(n) = self.frames {
            cfg.n_train_frames = n;
            cfg.n_test_frames = n;
        }
        if self.timing {
            cfg.record_timing = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full (ibo, ebn0, instance) grid and write the CSV.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Run one grid cell and print its records.
    Point {
        #[command(flatten)]
        common: ConfigArgs,
        /// IBO value in dB; must be one of the configured grid values.
        #[arg(long, allow_negative_numbers = true)]
        ibo: Option<f64>,
        /// Eb/N0 value in dB; must be one of the configured grid values.
        #[arg(long, allow_negative_numbers = true)]
        ebn0: Option<f64>,
        /// Channel instance index.
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Print per-subcarrier IMD3/IMD5 term counts.
    Terms {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Print Bussgang gains across the configured IBO grid.
    Alpha {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Train the full 3rd-order combiner on noiseless PA output and
    /// print ranked coefficient magnitudes per subcarrier.
    Sparsity {
        #[command(flatten)]
        common: ConfigArgs,
        /// Index into the configured IBO grid.
        #[arg(long, default_value_t = 0)]
        ibo_index: usize,
        /// Training frames for the sparsity study.
        #[arg(long, default_value_t = 5000)]
        sparsity_frames: usize,
    },
}

fn grid_index(grid: &[f64], wanted: Option<f64>, what: &str) -> Result<usize> {
    match wanted {
        None => Ok(0),
        Some(v) => grid
            .iter()
            .position(|&g| g == v)
            .with_context(|| format!("{what} {v} is not in the configured grid {grid:?}")),
    }
}

fn write_output(cfg: &ExperimentConfig, csv: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            let mut f = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            f.write_all(csv.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep { common } => {
            let cfg = common.resolve()?;
            let ctx = SweepContext::prepare(cfg)?;
            let out = sim::run_sweep(&ctx);
            write_output(&ctx.cfg, &out.to_csv(&ctx.cfg))?;
            if !out.is_complete() {
                for e in &out.errors {
                    eprintln!("point failed: {e}");
                }
                eprintln!(
                    "{} of {} points failed; partial CSV written without summary rows",
                    out.errors.len(),
                    out.errors.len() + out.records.len() / ctx.cfg.receivers.len().max(1)
                );
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Point {
            common,
            ibo,
            ebn0,
            instance,
        } => {
            let cfg = common.resolve()?;
            let ibo_idx = grid_index(&cfg.ibo_db, ibo, "ibo")?;
            let ebn0_idx = grid_index(&cfg.ebn0_db, ebn0, "ebn0")?;
            if instance >= cfg.n_channel_instances {
                bail!(
                    "instance {instance} out of range ({} configured)",
                    cfg.n_channel_instances
                );
            }
            let ctx = SweepContext::prepare(cfg)?;
            let records = sim::run_point(&ctx, ibo_idx, ebn0_idx, instance)?;
            let out = sim::SweepOutput {
                records,
                summaries: Vec::new(),
                errors: Vec::new(),
            };
            write_output(&ctx.cfg, &out.to_csv(&ctx.cfg))?;
        }
        Command::Terms { common } => {
            let cfg = common.resolve()?;
            print!("{}", sim::report_terms(&cfg.ofdm)?);
        }
        Command::Alpha { common } => {
            let cfg = common.resolve()?;
            print!("{}", sim::report_alpha(&cfg)?);
        }
        Command::Sparsity {
            common,
            ibo_index,
            sparsity_frames,
        } => {
            let cfg = common.resolve()?;
            for report in sim::run_sparsity(&cfg, ibo_index, sparsity_frames)? {
                println!("{report}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
