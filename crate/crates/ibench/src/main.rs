//! The `ibench` command line: runs, sweeps, single-case generation,
//! report re-rendering, tradeoff plotting, and fixture generation.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ibench::canonical::write_canonical;
use ibench::config::Config;
use ibench::data::{case_seed, EvalCase};
use ibench::fixtures::{generate_fixtures, FixtureOptions};
use ibench::pipeline::generate_case;
use ibench::report::{
    parse_csv, render_tradeoff_csv, tradeoff_curve, write_run_renderings,
};
use ibench::runner::{load_report, run};
use ibench::suite::Suite;
use ibench::sweep::{default_fusion_combos, sweep_fusion, sweep_selections};

#[derive(Parser)]
#[command(name = "ibench", version, about = "Evaluation harness for the identity customization pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one with-ID/without-ID image pair for a single prompt.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// JSON-encoded ID image.
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the two images.
        #[arg(long, default_value = "generate-out")]
        out: PathBuf,
    },
    /// Execute the full evaluation described by a config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rerun the config once per layer-selection string.
    SweepSelections {
        #[arg(long)]
        config: PathBuf,
        /// Selection strings like "[4,14,16,18,20]"; repeatable.
        #[arg(long = "selection")]
        selections: Vec<String>,
        /// File with one selection string per line (# comments allowed).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Rerun the config once per fusion method.
    SweepFusion {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-render CSV and text tables from a persisted run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Recompute the tradeoff curve from a sweep CSV against a baseline row.
    PlotTradeoff {
        /// sweep.csv produced by a sweep command.
        #[arg(long)]
        sweep_csv: PathBuf,
        /// Label of the row to use as the baseline.
        #[arg(long)]
        baseline: String,
        /// Where to write the tradeoff CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic fixture datasets, prompts, and config.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
        /// Generate the full-size datasets instead of the small ones.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            config,
            image,
            prompt,
            seed,
            out,
        } => {
            let config = Config::from_file(&config)?;
            let suite = Suite::toy(&config)?;
            let text = std::fs::read_to_string(&image)
                .with_context(|| format!("reading {}", image.display()))?;
            let id_image = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", image.display()))?;
            let image_name = image
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            let case = EvalCase {
                dataset: "adhoc".into(),
                image_name: image_name.clone(),
                prompt_set: "adhoc".into(),
                prompt_id: 1,
                prompt,
                seed: case_seed(seed, &image_name, 1),
            };
            let artifacts = generate_case(&suite, &config, &case, &id_image)?;
            std::fs::create_dir_all(&out)?;
            write_canonical(&out.join("image_with_id.json"), &artifacts.image_with_id)?;
            write_canonical(&out.join("image_without_id.json"), &artifacts.image_without_id)?;
            if let Some(err) = &artifacts.branch_error {
                eprintln!("feature branch degraded: {err}");
            }
            println!("wrote image pair to {}", out.display());
        }
        Command::Run { config } => {
            let config = Config::from_file(&config)?;
            let output = run(&config)?;
            write_run_renderings(&output.run_dir, &output.report)?;
            for warning in &output.report.warnings {
                eprintln!("warning: {warning}");
            }
            println!("run dir: {}", output.run_dir.display());
            println!("cases: {}", output.report.cases.len());
            for (metric, value) in &output.report.aggregates {
                match value {
                    Some(v) => println!("{metric}: {v:.6}"),
                    None => println!("{metric}: null"),
                }
            }
        }
        Command::SweepSelections {
            config,
            mut selections,
            file,
        } => {
            let config = Config::from_file(&config)?;
            if let Some(file) = file {
                let text = std::fs::read_to_string(&file)
                    .with_context(|| format!("reading {}", file.display()))?;
                selections.extend(
                    text.lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty() && !l.starts_with('#'))
                        .map(str::to_string),
                );
            }
            let output = sweep_selections(&config, &selections)?;
            for notice in &output.notices {
                eprintln!("notice: {notice}");
            }
            println!("sweep dir: {}", output.sweep_dir.display());
            print!("{}", std::fs::read_to_string(output.sweep_dir.join("sweep.txt"))?);
        }
        Command::SweepFusion { config } => {
            let config = Config::from_file(&config)?;
            let output = sweep_fusion(&config, &default_fusion_combos())?;
            println!("sweep dir: {}", output.sweep_dir.display());
            print!("{}", std::fs::read_to_string(output.sweep_dir.join("sweep.txt"))?);
        }
        Command::Report { run_dir } => {
            let report = load_report(&run_dir)?;
            write_run_renderings(&run_dir, &report)?;
            print!("{}", std::fs::read_to_string(run_dir.join("report.txt"))?);
        }
        Command::PlotTradeoff {
            sweep_csv,
            baseline,
            out,
        } => {
            let text = std::fs::read_to_string(&sweep_csv)
                .with_context(|| format!("reading {}", sweep_csv.display()))?;
            let rows = parse_csv(&text)?;
            let base = rows
                .iter()
                .find(|r| r.label == baseline)
                .with_context(|| format!("no row labeled '{baseline}'"))?
                .clone();
            let curve = tradeoff_curve(&rows, &base);
            let rendered = render_tradeoff_csv(&curve)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, rendered)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{rendered}"),
            }
        }
        Command::Fixtures { out, full, seed } => {
            let manifest = generate_fixtures(&out, FixtureOptions { full, seed })?;
            for (name, dir, count) in &manifest.dataset_dirs {
                println!("dataset {name}: {count} images in {}", dir.display());
            }
            for (name, file, count) in &manifest.prompt_files {
                println!("prompts {name}: {count} lines in {}", file.display());
            }
            println!("config: {}", manifest.config_file.display());
        }
    }
    Ok(())
}
