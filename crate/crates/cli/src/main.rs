use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strel_core::pipeline::{
    load_for_monitoring, monitor_rows, read_food_court_config, run, write_food_court, PipelineConfig, PipelineError,
};
use strel_core::spatial::ModelStrategy;
use strel_core::trace::FoodCourtConfig;

#[derive(Parser)]
#[command(name = "strel-miner", version, about = "Mine spatio-temporal formulas from location traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full mining pipeline from a JSON config.
    Run { config: PathBuf },
    /// Evaluate one formula and print robustness per location.
    Monitor {
        #[arg(long)]
        locations: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// full, mst, delta:<meters> or enhanced_msg:<alpha>
        #[arg(long, default_value = "mst")]
        model: ModelStrategy,
        #[arg(long)]
        formula: String,
        /// Only this location id.
        #[arg(long = "loc")]
        location: Option<String>,
        /// Time stamp on the trace grid; defaults to the first sample.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Write a synthetic food-court data set.
    GenFoodcourt {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run { config } => {
            let config = PipelineConfig::from_path(&config)?;
            let output = run(&config)?;
            let r = &output.report;
            println!(
                "{} locations, {} clusters, tree depth {}; artifacts in {}",
                r.locations,
                r.num_clusters,
                r.tree_depth,
                config.output_dir.display()
            );
            for f in &output.formulas {
                println!("cluster {}: {}", f.label, f.text);
            }
        }
        Command::Monitor { locations, trace, model, formula, location, time } => {
            let (model, trace, dropped) = load_for_monitoring(&locations, &trace, model)?;
            for id in dropped {
                log::warn!("location {id} dropped: too many missing samples");
            }
            println!("location_id,time,robustness,satisfied");
            for row in monitor_rows(&model, &trace, &formula, location.as_deref(), time)? {
                println!("{},{},{},{}", row.location_id, row.time, row.robustness, row.satisfied);
            }
        }
        Command::GenFoodcourt { config, seed, out } => {
            let cfg = match config {
                Some(path) => read_food_court_config(&path)?,
                None => FoodCourtConfig::default(),
            };
            write_food_court(&cfg, seed, &out)?;
            println!("wrote {} and {}", out.join("locations.csv").display(), out.join("traces.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
