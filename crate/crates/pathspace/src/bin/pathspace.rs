//! Experiment runner CLI: per-lap backend comparison, update-time
//! scalability sweeps, and track generation.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use pathspace::config::ExperimentConfig;
use pathspace::experiments::{
    emit_lap_rows, emit_scalability, run_comparison, run_scalability, EmitFormat,
};
use pathspace::sim::{generate_track, TrackSpec};
use pathspace::snapshot::TrackSnapshot;

#[derive(Parser)]
#[command(name = "pathspace", version, about = "Spline SLAM experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for EmitFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => EmitFormat::Csv,
            Format::Json => EmitFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the per-lap comparison described by a config file.
    Run {
        /// Experiment config (JSON, schema_version 1).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for result files.
        #[arg(long, env = "PATHSPACE_OUT")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Override the config seed.
        #[arg(long, env = "PATHSPACE_SEED")]
        seed: Option<u64>,
    },
    /// Time update cycles over a grid of map sizes and reading counts.
    Scalability {
        #[arg(long)]
        config: PathBuf,
        /// Map sizes, comma separated (e.g. 50,100,200).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Readings per update, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        readings: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, env = "PATHSPACE_OUT")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Generate a track ground-truth file from a spec.
    GenTrack {
        /// Track spec JSON; the built-in circuit when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, format, seed } => {
            let cfg = load_config(&config, seed)?;
            std::fs::create_dir_all(&out)?;
            let results = run_comparison(&cfg)?;
            let ext = if format == Format::Csv { "csv" } else { "json" };
            let rows_path = out.join(format!("comparison.{ext}"));
            emit_lap_rows(&results.rows, format.into(), &rows_path)?;

            let meta = serde_json::json!({
                "schema_version": pathspace::snapshot::SCHEMA_VERSION,
                "seed": cfg.seed,
                "stream_checksum": results.stream_checksum,
                "backend_checksums": results.backend_checksums,
                "failures": results.failures,
            });
            std::fs::write(out.join("run_meta.json"), serde_json::to_string_pretty(&meta)?)?;
            if let Some(snap) = &results.pathspace_final {
                std::fs::write(
                    out.join("pathspace_final.json"),
                    serde_json::to_string_pretty(snap)?,
                )?;
            }
            if let Some(snap) = &results.ckf_final {
                std::fs::write(out.join("ckf_final.json"), serde_json::to_string_pretty(snap)?)?;
            }

            println!("lap  backend     rmse_m   size  missed%  ghosts  update_ms");
            for r in &results.rows {
                println!(
                    "{:>3}  {:<10} {:>7}  {:>5}  {:>6.2}  {:>6}  {:>9.3}",
                    r.lap,
                    r.backend,
                    r.rmse_m.map_or("-".into(), |v| format!("{v:.3}")),
                    r.size,
                    r.missed_pct,
                    r.ghosts,
                    r.update_ms
                );
            }
            for f in &results.failures {
                eprintln!("warning: {f}");
            }
            println!("results written to {}", rows_path.display());
        }
        Command::Scalability { config, sizes, readings, repeats, out, format } => {
            let cfg = load_config(&config, None)?;
            std::fs::create_dir_all(&out)?;
            let rows = run_scalability(&cfg, &sizes, &readings, repeats)?;
            let ext = if format == Format::Csv { "csv" } else { "json" };
            let path = out.join(format!("scalability.{ext}"));
            emit_scalability(&rows, format.into(), &path)?;
            println!("backend     size  readings  update_ms");
            for r in &rows {
                println!(
                    "{:<10} {:>5}  {:>8}  {:>9.3}",
                    r.backend, r.map_size, r.readings, r.update_ms
                );
            }
            println!("grid written to {}", path.display());
        }
        Command::GenTrack { spec, out } => {
            let spec = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading spec {}", path.display()))?;
                    serde_json::from_str::<TrackSpec>(&text)?
                }
                None => TrackSpec::default(),
            };
            let truth = generate_track(&spec)?;
            let snap = TrackSnapshot::capture(&truth);
            std::fs::write(&out, serde_json::to_string_pretty(&snap)?)?;
            println!(
                "track with {} cones over {:.1} m written to {}",
                truth.cone_count(),
                truth.lap_length,
                out.display()
            );
        }
    }
    Ok(())
}
