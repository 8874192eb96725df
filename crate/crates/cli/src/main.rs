//! `leanloc` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data integrity
//! error, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leanloc::cli;
use leanloc::eval::{SuccessRule, Task};
use leanloc::scene::SynthCityConfig;

#[derive(Parser)]
#[command(name = "leanloc", version, about = "Lean-image geo-localization datasets and metrics")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render and validate the training and test sets described by a config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Print pose counts without rendering.
        #[arg(long)]
        dry_run: bool,
    },
    /// Write a label-shuffled copy of a manifest.
    Shuffle {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a prediction file against a manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// `matching` (training split) or `interpolation` (test split).
        #[arg(long)]
        task: Task,
        /// Write the report as JSON here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Per-cell success map as `<output>.png` and `<output>.csv`.
    Heatmap {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// nn1, nn3, d1-2d, d3-2d, d1-4d or d3-4d.
        #[arg(long, default_value = "d1-4d")]
        rule: SuccessRule,
        #[arg(long)]
        output: PathBuf,
        /// Pixels per cell.
        #[arg(long, default_value_t = 8)]
        scale: u32,
    },
    /// Check that a manifest parses and all of its images exist.
    Check {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Write a procedural city mesh.
    SynthCity {
        /// TOML file with synth parameters; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(command: Command) -> leanloc::Result<()> {
    match command {
        Command::Generate { config, threads, dry_run } => {
            let cfg = cli::ExperimentConfig::load(&config)?;
            if dry_run {
                let (train, test) = cli::plan_counts(&cfg)?;
                println!("train poses: {train}\ntest poses: {test}");
                return Ok(());
            }
            let s = cli::cmd_generate(&cfg, threads)?;
            println!("wrote {}", s.output.display());
            println!("train poses: {} (valid: {} train, {} validation)", s.train_poses, s.valid_train, s.validation);
            println!("test poses: {} (valid: {})", s.test_poses, s.valid_test);
            for (reason, n) in &s.invalid {
                println!("invalid {reason}: {n}");
            }
            println!("{:.1} s, {:.1} poses/s", s.seconds, s.throughput());
        }
        Command::Shuffle { manifest, seed, output } => {
            let out = cli::cmd_shuffle(&manifest, seed, output.as_deref())?;
            println!("{}", out.display());
        }
        Command::Evaluate {
            manifest,
            predictions,
            task,
            output,
        } => {
            let report = cli::cmd_evaluate(&manifest, &predictions, task, output.as_deref())?;
            if output.is_none() {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
        }
        Command::Heatmap {
            manifest,
            predictions,
            rule,
            output,
            scale,
        } => {
            let map = cli::cmd_heatmap(&manifest, &predictions, rule, &output, scale)?;
            println!("{} x {} cells", map.cols, map.rows);
        }
        Command::Check { manifest } => {
            let m = cli::cmd_check(&manifest)?;
            println!("ok: {} records", m.records.len());
        }
        Command::SynthCity { config, seed, output } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| leanloc::Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    toml::from_str::<SynthCityConfig>(&text).map_err(|e| leanloc::Error::Config(e.to_string()))?
                }
                None => SynthCityConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let scene = cli::cmd_synth_city(&cfg, &output)?;
            println!("{} buildings -> {}", scene.footprints().len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
