//! End-to-end orchestration: configure parameter bounds, generate the
//! eFAST sample matrix, simulate and evaluate every sample row against the
//! reference detections, run the sensitivity analysis, and persist result
//! and plot-data files.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{evaluate_run, EvalSummary};
use crate::fast::{analyze, efast_samples, save_sample_matrix, sensitivity_to_json, ParameterSpec, SampleMatrix, SensitivityResult};
use crate::radar::{generate_detections, load_detections, DetectionSet, RadarConstants, RadarParams};
use crate::rng::{key, stream};
use crate::scenario::{generate_figure_eight, load_trajectory, Pose2D, Scenario, VehicleShape};
use crate::{Error, Result};

/// Scalar reduction of a run's per-frame distances fed into the
/// sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    Min,
    Mean,
    Max,
    /// Run all three analyses from the same run records.
    All,
}

impl AggregationMode {
    pub fn scalar_modes(self) -> Vec<ScalarMode> {
        match self {
            AggregationMode::Min => vec![ScalarMode::Min],
            AggregationMode::Mean => vec![ScalarMode::Mean],
            AggregationMode::Max => vec![ScalarMode::Max],
            AggregationMode::All => vec![ScalarMode::Min, ScalarMode::Mean, ScalarMode::Max],
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(AggregationMode::Min),
            "mean" => Ok(AggregationMode::Mean),
            "max" => Ok(AggregationMode::Max),
            "all" => Ok(AggregationMode::All),
            other => Err(Error::validation(format!(
                "unknown aggregation mode '{other}' (expected min|mean|max|all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarMode {
    Min,
    Mean,
    Max,
}

impl ScalarMode {
    pub fn name(self) -> &'static str {
        match self {
            ScalarMode::Min => "min",
            ScalarMode::Mean => "mean",
            ScalarMode::Max => "max",
        }
    }

    fn extract(self, summary: &EvalSummary) -> f64 {
        match self {
            ScalarMode::Min => summary.min,
            ScalarMode::Mean => summary.mean,
            ScalarMode::Max => summary.max,
        }
    }
}

/// Trajectory source for the simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum ScenarioConfig {
    Generated {
        #[serde(default = "default_half_length")]
        half_length: f64,
        #[serde(default = "default_offset_x")]
        offset_x: f64,
        #[serde(default)]
        offset_y: f64,
        #[serde(default)]
        offset_yaw: f64,
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_target_length")]
        target_length: f64,
        #[serde(default = "default_target_width")]
        target_width: f64,
    },
    File {
        path: PathBuf,
        #[serde(default = "default_target_length")]
        target_length: f64,
        #[serde(default = "default_target_width")]
        target_width: f64,
    },
}

fn default_half_length() -> f64 {
    10.0
}
fn default_offset_x() -> f64 {
    30.0
}
fn default_speed() -> f64 {
    5.0
}
fn default_dt() -> f64 {
    0.1
}
fn default_target_length() -> f64 {
    4.5
}
fn default_target_width() -> f64 {
    1.8
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::Generated {
            half_length: default_half_length(),
            offset_x: default_offset_x(),
            offset_y: 0.0,
            offset_yaw: 0.0,
            speed: default_speed(),
            dt: default_dt(),
            target_length: default_target_length(),
            target_width: default_target_width(),
        }
    }
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario> {
        match self {
            ScenarioConfig::Generated {
                half_length,
                offset_x,
                offset_y,
                offset_yaw,
                speed,
                dt,
                target_length,
                target_width,
            } => generate_figure_eight(
                *half_length,
                Pose2D::new(*offset_x, *offset_y, *offset_yaw),
                *speed,
                *dt,
                VehicleShape::new(*target_length, *target_width)?,
            ),
            ScenarioConfig::File {
                path,
                target_length,
                target_width,
            } => load_trajectory(path, VehicleShape::new(*target_length, *target_width)?),
        }
    }
}

/// Comparison baseline: a fixed-parameter synthetic-truth simulation, or
/// recorded detections from file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum ReferenceConfig {
    Synthetic {
        #[serde(default = "default_truth_params")]
        truth_params: RadarParams,
    },
    File {
        path: PathBuf,
    },
}

fn default_truth_params() -> RadarParams {
    // low-noise, high-visibility truth sensor
    RadarParams {
        awg_noise_sd: 0.5,
        dp_offset: 0.0,
        g_max: 20.0,
        noise_figure: 12.0,
        sys_loss: 2.0,
        rcs_mean: 5.0,
    }
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig::Synthetic {
            truth_params: default_truth_params(),
        }
    }
}

fn default_parameters() -> Vec<ParameterSpec> {
    RadarParams::BOUNDS
        .iter()
        .map(|&(name, min, max)| ParameterSpec {
            name: name.to_string(),
            min,
            max,
        })
        .collect()
}

fn default_ns_per_param() -> usize {
    65
}
fn default_interference() -> usize {
    4
}
fn default_k() -> usize {
    1
}
fn default_mode() -> AggregationMode {
    AggregationMode::All
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Full experiment configuration, deserialized from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Master seed; required so no run ever seeds from the wall clock.
    pub seed: u64,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub constants: RadarConstants,
    #[serde(default = "default_parameters")]
    pub parameters: Vec<ParameterSpec>,
    #[serde(default = "default_ns_per_param")]
    pub ns_per_param: usize,
    #[serde(default = "default_interference")]
    pub interference: usize,
    #[serde(default = "default_mode")]
    pub mode: AggregationMode,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenario: ScenarioConfig::default(),
            reference: ReferenceConfig::default(),
            constants: RadarConstants::default(),
            parameters: default_parameters(),
            ns_per_param: default_ns_per_param(),
            interference: default_interference(),
            mode: default_mode(),
            k: default_k(),
            output_dir: default_output_dir(),
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if self.parameters.is_empty() {
            return Err(Error::validation("no parameters configured"));
        }
        let known = RadarParams::field_names();
        for (i, spec) in self.parameters.iter().enumerate() {
            if !known.contains(&spec.name.as_str()) {
                return Err(Error::validation(format!(
                    "parameter '{}' is not a radar parameter (expected one of {known:?})",
                    spec.name
                )));
            }
            if !(spec.min < spec.max) {
                return Err(Error::validation(format!(
                    "parameter '{}' needs min < max",
                    spec.name
                )));
            }
            if self.parameters[..i].iter().any(|p| p.name == spec.name) {
                return Err(Error::validation(format!("duplicate parameter '{}'", spec.name)));
            }
        }
        if self.k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        if let ReferenceConfig::Synthetic { truth_params } = &self.reference {
            if !truth_params.within_bounds() {
                return Err(Error::validation(
                    "synthetic-truth parameters outside their physical bounds",
                ));
            }
        }
        Ok(())
    }
}

/// One simulated sample row and its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub params: RadarParams,
    /// `None` when the run retained no frame and was imputed.
    pub summary: Option<EvalSummary>,
    pub skipped_frames: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Build the reference detection stream: synthetic truth from a reserved
/// seed stream, or frames ingested from a detection CSV aligned against
/// the scenario by timestamp (missing timestamps become empty frames).
pub fn build_reference(config: &ExperimentConfig, scenario: &Scenario) -> Result<Vec<DetectionSet>> {
    match &config.reference {
        ReferenceConfig::Synthetic { truth_params } => {
            let seed = key(&[config.seed, stream::REFERENCE]);
            scenario
                .frames
                .iter()
                .enumerate()
                .map(|(i, frame)| {
                    generate_detections(
                        frame,
                        i as u64,
                        truth_params,
                        &config.constants,
                        scenario.target_shape,
                        seed,
                    )
                })
                .collect()
        }
        ReferenceConfig::File { path } => {
            let loaded = load_detections(path)?;
            let aligned = scenario
                .frames
                .iter()
                .map(|frame| {
                    loaded
                        .iter()
                        .find(|set| (set.frame_t - frame.t).abs() <= scenario.dt / 2.0)
                        .cloned()
                        .unwrap_or(DetectionSet {
                            frame_t: frame.t,
                            detections: Vec::new(),
                        })
                })
                .collect();
            Ok(aligned)
        }
    }
}

fn simulate_run(
    config: &ExperimentConfig,
    scenario: &Scenario,
    reference: &[DetectionSet],
    matrix_row: &[f64],
    run_id: usize,
) -> Result<RunRecord> {
    let started = Instant::now();
    let mut params = RadarParams::nominal();
    for (spec, &value) in config.parameters.iter().zip(matrix_row) {
        params.set(&spec.name, value)?;
    }
    let seed = key(&[config.seed, stream::RUN, run_id as u64]);
    let sim: Result<Vec<DetectionSet>> = scenario
        .frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            generate_detections(
                frame,
                i as u64,
                &params,
                &config.constants,
                scenario.target_shape,
                seed,
            )
        })
        .collect();
    let sim = sim?;
    let eval_seed = key(&[config.seed, stream::KMEANS, run_id as u64]);
    let (summary, skipped) = match evaluate_run(&sim, reference, config.k, eval_seed, scenario.dt) {
        Ok(summary) => {
            let skipped = summary.skipped_frames;
            (Some(summary), skipped)
        }
        Err(Error::Evaluation(_)) => (None, scenario.frames.len()),
        Err(e) => return Err(e),
    };
    Ok(RunRecord {
        run_id,
        params,
        summary,
        skipped_frames: skipped,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Per-mode scalar outputs with flagged runs imputed by their block
/// median. Errors if any block has no valid run.
fn impute_outputs(
    records: &[RunRecord],
    mode: ScalarMode,
    ns_per_param: usize,
) -> Result<Vec<f64>> {
    let mut outputs = vec![f64::NAN; records.len()];
    for block_start in (0..records.len()).step_by(ns_per_param) {
        let block = &records[block_start..block_start + ns_per_param];
        let mut valid: Vec<f64> = block
            .iter()
            .filter_map(|r| r.summary.as_ref().map(|s| mode.extract(s)))
            .collect();
        if valid.is_empty() {
            return Err(Error::Experiment(format!(
                "block starting at run {block_start} has no valid output to impute from"
            )));
        }
        valid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = valid[valid.len() / 2];
        for (offset, record) in block.iter().enumerate() {
            outputs[block_start + offset] = record
                .summary
                .as_ref()
                .map(|s| mode.extract(s))
                .unwrap_or(median);
        }
    }
    Ok(outputs)
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub matrix: SampleMatrix,
    pub records: Vec<RunRecord>,
    pub results: Vec<(ScalarMode, SensitivityResult)>,
    pub flagged_runs: usize,
}

/// Run the full pipeline: sample matrix, one simulation + evaluation per
/// row (in parallel), sensitivity analysis per aggregation mode.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let scenario = config.scenario.build()?;
    let reference = build_reference(config, &scenario)?;
    let matrix = efast_samples(&config.parameters, config.ns_per_param, config.interference, config.seed)?;

    let simulate = || -> Result<Vec<RunRecord>> {
        matrix
            .values
            .par_iter()
            .enumerate()
            .map(|(run_id, row)| simulate_run(config, &scenario, &reference, row, run_id))
            .collect()
    };
    let mut records = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Experiment(e.to_string()))?
            .install(simulate),
        None => simulate(),
    }?;
    records.sort_by_key(|r| r.run_id);

    let flagged_runs = records.iter().filter(|r| r.summary.is_none()).count();
    if flagged_runs * 10 > records.len() {
        return Err(Error::Experiment(format!(
            "{flagged_runs} of {} runs yielded no metric (more than 10%)",
            records.len()
        )));
    }

    let mut results = Vec::new();
    for mode in config.mode.scalar_modes() {
        let outputs = impute_outputs(&records, mode, config.ns_per_param)?;
        results.push((mode, analyze(&matrix, &outputs, config.interference)?));
    }
    Ok(ExperimentOutcome {
        matrix,
        records,
        results,
        flagged_runs,
    })
}

/// Persist all experiment artifacts: sample matrix, run records (JSON
/// lines), per-mode sensitivity JSON, and the plot-data CSVs. Wall times
/// go to a separate timings file so every other artifact is byte-stable
/// for a fixed (config, seed).
pub fn persist_experiment(
    config: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    out_dir: impl AsRef<Path>,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;

    save_sample_matrix(&outcome.matrix, out_dir.join("samples.csv"))?;

    let mut runs = std::fs::File::create(out_dir.join("runs.jsonl"))?;
    for r in &outcome.records {
        let line = serde_json::json!({
            "run_id": r.run_id,
            "skipped_frames": r.skipped_frames,
            "min": r.summary.as_ref().map(|s| s.min),
            "mean": r.summary.as_ref().map(|s| s.mean),
            "max": r.summary.as_ref().map(|s| s.max),
        });
        writeln!(runs, "{line}")?;
    }

    let mut timings = std::fs::File::create(out_dir.join("timings.csv"))?;
    writeln!(timings, "run_id,wall_time_s")?;
    for r in &outcome.records {
        writeln!(timings, "{},{:.6}", r.run_id, r.wall_time_s)?;
    }

    for (mode, result) in &outcome.results {
        let json = sensitivity_to_json(result);
        std::fs::write(
            out_dir.join(format!("sensitivity_{}.json", mode.name())),
            serde_json::to_string_pretty(&json)? + "\n",
        )?;
    }

    export_plot_data(&outcome.records, &outcome.results, out_dir)?;
    let config_echo = toml::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    std::fs::write(out_dir.join("config_used.toml"), config_echo)?;
    Ok(())
}

/// Emit per-mode index bar-chart data and the per-frame distance CSV.
pub fn export_plot_data(
    records: &[RunRecord],
    results: &[(ScalarMode, SensitivityResult)],
    out_dir: impl AsRef<Path>,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    for (mode, result) in results {
        let mut writer = csv::Writer::from_path(out_dir.join(format!("indices_{}.csv", mode.name())))?;
        writer.write_record(["parameter", "s_first", "s_total", "interaction"])?;
        for p in &result.parameters {
            writer.write_record([
                p.name.clone(),
                format!("{:.9}", p.s_first),
                format!("{:.9}", p.s_total),
                format!("{:.9}", p.interaction),
            ])?;
        }
        writer.flush()?;
    }

    let mut writer = csv::Writer::from_path(out_dir.join("distances.csv"))?;
    writer.write_record(["run_id", "frame", "distance"])?;
    for r in records {
        if let Some(summary) = &r.summary {
            for (frame, d) in summary.per_frame_distance.iter().enumerate() {
                writer.write_record([
                    r.run_id.to_string(),
                    frame.to_string(),
                    format!("{d:.9}"),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}
