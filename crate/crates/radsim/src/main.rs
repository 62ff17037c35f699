use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use radsim::clustering::evaluate_run;
use radsim::fast::{analyze, efast_samples, save_sample_matrix, sensitivity_to_json};
use radsim::pipeline::{
    persist_experiment, run_experiment, AggregationMode, ExperimentConfig, ReferenceConfig,
};
use radsim::radar::{load_detections, save_detections};
use radsim::scenario::{generate_figure_eight, load_trajectory, save_trajectory, Pose2D, VehicleShape};
use radsim::{Error, Result};

/// Detection-level radar simulator and sensitivity-analysis harness.
#[derive(Parser)]
#[command(name = "radsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel worker count.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = Some(workers);
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect ground-truth trajectories.
    Scenario {
        /// Inspect an existing trajectory CSV instead of generating one.
        #[arg(long)]
        inspect: Option<PathBuf>,
        /// Output trajectory CSV path.
        #[arg(long, default_value = "trajectory.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        half_length: f64,
        #[arg(long, default_value_t = 30.0)]
        offset_x: f64,
        #[arg(long, default_value_t = 0.0)]
        offset_y: f64,
        #[arg(long, default_value_t = 0.0)]
        offset_yaw: f64,
        #[arg(long, default_value_t = 5.0)]
        speed: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
    },
    /// Simulate one parameter set and export the detections as CSV.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output detection CSV path.
        #[arg(long, default_value = "detections.csv")]
        out: PathBuf,
    },
    /// Evaluate two detection CSVs against each other.
    Evaluate {
        /// Simulated detection CSV.
        #[arg(long)]
        sim: PathBuf,
        /// Reference detection CSV.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Frame spacing used for time alignment, seconds.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
    },
    /// Emit the eFAST sample matrix as CSV.
    Sample {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "samples.csv")]
        out: PathBuf,
    },
    /// Compute sensitivity indices from precomputed per-run outputs.
    Sensitivity {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV with a single `output` column, one row per sample row.
        #[arg(long)]
        outputs: PathBuf,
        #[arg(long, default_value = "sensitivity.json")]
        out: PathBuf,
    },
    /// Run the full experiment pipeline from a config file.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aggregation mode: min|mean|max|all (overrides the config).
        #[arg(long, value_parser = parse_mode)]
        mode: Option<AggregationMode>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<AggregationMode, String> {
    s.parse::<AggregationMode>().map_err(|e| e.to_string())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scenario {
            inspect,
            out,
            half_length,
            offset_x,
            offset_y,
            offset_yaw,
            speed,
            dt,
        } => {
            if let Some(path) = inspect {
                let s = load_trajectory(&path, VehicleShape::default_car())?;
                println!(
                    "{}: {} frames, dt {:.4} s, duration {:.2} s",
                    path.display(),
                    s.frames.len(),
                    s.dt,
                    s.frames.last().unwrap().t
                );
                return Ok(());
            }
            let s = generate_figure_eight(
                half_length,
                Pose2D::new(offset_x, offset_y, offset_yaw),
                speed,
                dt,
                VehicleShape::default_car(),
            )?;
            save_trajectory(&s, &out)?;
            println!("wrote {} frames to {}", s.frames.len(), out.display());
        }
        Command::Simulate { config, out } => {
            let config = config.load()?;
            let scenario = config.scenario.build()?;
            let params = match &config.reference {
                ReferenceConfig::Synthetic { truth_params } => *truth_params,
                ReferenceConfig::File { .. } => radsim::radar::RadarParams::nominal(),
            };
            let seed = radsim::rng::key(&[config.seed, radsim::rng::stream::REFERENCE]);
            let sets: Result<Vec<_>> = scenario
                .frames
                .iter()
                .enumerate()
                .map(|(i, frame)| {
                    radsim::radar::generate_detections(
                        frame,
                        i as u64,
                        &params,
                        &config.constants,
                        scenario.target_shape,
                        seed,
                    )
                })
                .collect();
            let sets = sets?;
            let total: usize = sets.iter().map(|s| s.detections.len()).sum();
            save_detections(&sets, &out)?;
            println!(
                "wrote {total} detections over {} frames to {}",
                sets.len(),
                out.display()
            );
        }
        Command::Evaluate {
            sim,
            reference,
            k,
            seed,
            dt,
        } => {
            let sim_sets = load_detections(&sim)?;
            let ref_sets = load_detections(&reference)?;
            let summary = evaluate_run(&sim_sets, &ref_sets, k, seed, dt)?;
            let json = serde_json::json!({
                "skipped_frames": summary.skipped_frames,
                "min": summary.min,
                "mean": summary.mean,
                "max": summary.max,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::Sample { config, out } => {
            let config = config.load()?;
            let matrix = efast_samples(
                &config.parameters,
                config.ns_per_param,
                config.interference,
                config.seed,
            )?;
            save_sample_matrix(&matrix, &out)?;
            println!("wrote {} sample rows to {}", matrix.rows(), out.display());
        }
        Command::Sensitivity {
            config,
            outputs,
            out,
        } => {
            let config = config.load()?;
            let matrix = efast_samples(
                &config.parameters,
                config.ns_per_param,
                config.interference,
                config.seed,
            )?;
            let mut reader = csv::Reader::from_path(&outputs)
                .map_err(|e| Error::parse(outputs.display().to_string(), e.to_string()))?;
            let mut values = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let record = record.map_err(|e| {
                    Error::parse(format!("{}:row {}", outputs.display(), i + 1), e.to_string())
                })?;
                let v: f64 = record
                    .get(0)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| {
                        Error::parse(format!("{}:row {}", outputs.display(), i + 1), format!("{e}"))
                    })?;
                values.push(v);
            }
            let result = analyze(&matrix, &values, config.interference)?;
            let json = sensitivity_to_json(&result);
            std::fs::write(&out, serde_json::to_string_pretty(&json)? + "\n")?;
            println!("wrote {}", out.display());
        }
        Command::Run { config, out, mode } => {
            let args = config;
            let mut config = args.load()?;
            if let Some(mode) = mode {
                config.mode = mode;
            }
            if let Some(out) = out {
                config.output_dir = out;
            }
            let outcome = run_experiment(&config)?;
            persist_experiment(&config, &outcome, &config.output_dir)?;
            println!(
                "{} runs ({} flagged), results in {}",
                outcome.records.len(),
                outcome.flagged_runs,
                config.output_dir.display()
            );
            for (mode, result) in &outcome.results {
                println!("[{}]", mode.name());
                for p in &result.parameters {
                    println!(
                        "  {:<14} S_i {:+.4}  S_Ti {:+.4}  interaction {:+.4}{}",
                        p.name,
                        p.s_first,
                        p.s_total,
                        p.interaction,
                        if p.flagged { "  (flagged)" } else { "" }
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
