//! Command-line surface over the radar-supervised depth toolkit.
//!
//! Subcommands cover the full workflow: `synth` writes labeled scenes,
//! `prepare` turns a scene's radar sweeps into weak supervision maps, `loss`
//! scores a prediction against a scene, `filter-input` builds the sparse
//! radar input raster, `eval` computes depth metrics against ground-truth
//! samples, and `gradcheck` verifies the analytic loss gradients.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad flags, malformed or
//! inconsistent files), 2 on numerical errors (non-finite values, failed
//! gradient checks).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use radepth::config::{Config, CONFIG_ENV};
use radepth::geometry::PoseSE3;
use radepth::gradcheck::{build_objective, check_objective, CheckReport, OBJECTIVE_NAMES};
use radepth::io::{self, pfm};
use radepth::loss::LossError;
use radepth::metrics::{evaluate_frames, FrameSamples, GroundTruthSample};
use radepth::pipeline::{
    filter_input, prepare_supervision, scene_loss, supervision_pack, PipelineError, Scene,
};
use radepth::radar::ObjectClass;
use radepth::raster::{DepthRaster, Grid};
use radepth::synth::{generate, SynthSpec};

#[derive(Parser)]
#[command(
    name = "radepth",
    version,
    about = "Radar-supervised depth estimation workflows",
    after_help = "Configuration is read from --config, else from the file named by the \
RADEPTH_CONFIG environment variable, else built-in defaults; command flags override \
individual values. Exit codes: 0 success, 1 validation error, 2 numerical error."
)]
struct Cli {
    /// Configuration file (TOML); any subset of fields overrides the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for frame-level parallelism. Never changes output bytes.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Prepare(PrepareArgs),
    Loss(LossArgs),
    FilterInput(FilterInputArgs),
    Eval(EvalArgs),
    Synth(SynthArgs),
    Gradcheck(GradcheckArgs),
}

/// Build weak-supervision maps from a scene's radar sweeps.
///
/// Accumulates the supervision sweep window into the target frame, runs the
/// configured filter chain, and expands the survivors into a binary mask with
/// per-pixel region assignment. Writes, per scene: {stem}_mask.pfm,
/// {stem}_pseudo_gt.pfm (each masked pixel at its region's radar depth),
/// {stem}_regions.pfm (region id + 1, 0 where unmasked), and
/// {stem}_provenance.json (points surviving each filter stage).
#[derive(Args)]
struct PrepareArgs {
    /// Scene documents (JSON) to process.
    #[arg(required = true, value_name = "SCENE")]
    scenes: Vec<PathBuf>,

    /// Directory receiving the supervision files; created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Peak-weight threshold above which a pixel joins the mask, in (0, 1).
    #[arg(long, value_name = "G")]
    gamma: Option<f64>,

    /// Tolerance band in meters behind the nearest in-box return; deeper
    /// returns are clutter.
    #[arg(long, value_name = "METERS")]
    beta: Option<f64>,

    /// Supervision filter chain as comma-separated stage names.
    #[arg(long, value_name = "STAGES", value_delimiter = ',')]
    chain: Option<Vec<String>>,
}

/// Score prediction rasters against a scene with the full training loss.
///
/// Evaluates the photometric, smoothness, velocity, and radar terms and their
/// weighted total, printing a flat `key = value` report. The radar term uses
/// supervision prepared from the scene's own sweeps and the finest
/// prediction.
#[derive(Args)]
struct LossArgs {
    /// Scene document (JSON).
    #[arg(value_name = "SCENE")]
    scene: PathBuf,

    /// Prediction depth raster (PFM), finest scale first; repeat the flag for
    /// coarser scales. The finest must match the scene resolution; coarser
    /// scales are upsampled.
    #[arg(long = "prediction", required = true, value_name = "PFM")]
    predictions: Vec<PathBuf>,

    /// Pose estimates replacing the recorded source poses in the warping
    /// path: a JSON array with one 12-number row-major rigid transform (ego
    /// to reference) per source frame. Recorded poses still provide the
    /// translation norms the velocity term compares against.
    #[arg(long, value_name = "FILE")]
    poses: Option<PathBuf>,

    /// Write the report to this file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Write finest-scale diagnostic rasters (min_error.pfm,
    /// error_valid.pfm, automask.pfm, radar_residual.pfm) into this
    /// directory.
    #[arg(long, value_name = "DIR")]
    dump_maps: Option<PathBuf>,

    /// Balance between structural and absolute photometric terms, in [0, 1].
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,

    /// Weight of the smoothness term.
    #[arg(long, value_name = "W")]
    lambda_smoothness: Option<f64>,

    /// Weight of the velocity term.
    #[arg(long, value_name = "W")]
    lambda_velocity: Option<f64>,

    /// Weight of the radar term.
    #[arg(long, value_name = "W")]
    lambda_radar: Option<f64>,
}

/// Build the sparse radar depth raster fed to a depth network at inference.
///
/// Accumulates the causal sweep window (never reading past the target time),
/// runs the input filter chain, rasterizes the survivors keeping the nearest
/// return per pixel, and writes {stem}_radar.pfm per scene with occupancy
/// statistics on stdout.
#[derive(Args)]
struct FilterInputArgs {
    /// Scene documents (JSON) to process.
    #[arg(required = true, value_name = "SCENE")]
    scenes: Vec<PathBuf>,

    /// Directory receiving the filtered rasters; created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Input filter chain as comma-separated stage names.
    #[arg(long, value_name = "STAGES", value_delimiter = ',')]
    chain: Option<Vec<String>>,
}

/// Compute depth metrics for predictions against ground-truth samples.
///
/// Prints a fixed-width table with AbsRel, SqRel, RMSE, RMSElog, and the
/// delta threshold accuracies, one row overall and one per class present,
/// plus labeled per-class AbsRel summary lines.
#[derive(Args)]
struct EvalArgs {
    /// Prediction depth raster (PFM); repeat the flag for multiple frames.
    #[arg(long = "prediction", required = true, value_name = "PFM")]
    predictions: Vec<PathBuf>,

    /// Ground-truth samples (JSON array of {u, v, depth, class_label}); one
    /// file per prediction, paired in order.
    #[arg(long = "samples", required = true, value_name = "FILE")]
    samples: Vec<PathBuf>,

    /// Score only these classes (comma-separated; car, truck, bus,
    /// motorcycle, bicycle, pedestrian, other).
    #[arg(long, value_name = "CLASSES", value_delimiter = ',')]
    classes: Option<Vec<String>>,

    /// Rescale each frame's predictions by median(gt)/median(pred) before
    /// scoring.
    #[arg(long)]
    median_scale: bool,

    /// Evaluation depth ceiling in meters; ground truth above it is dropped
    /// and predictions are clamped to it.
    #[arg(long, value_name = "METERS")]
    max_depth: Option<f64>,

    /// Evaluation depth floor in meters.
    #[arg(long, value_name = "METERS")]
    min_depth: Option<f64>,

    /// Average per-frame metrics with equal weight instead of pooling all
    /// samples.
    #[arg(long)]
    per_frame_average: bool,

    /// Write the table to this file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Generate deterministic synthetic scenes with labeled ground truth.
///
/// Each scene gets a target image, source images, a true depth raster, radar
/// sweeps with labeled clutter, 2D boxes, and ground-truth depth samples.
/// Writes {stem}.json plus its rasters, and {stem}_gt.json with the samples
/// in the format `eval --samples` reads. The same seed and spec always
/// produce identical files.
#[derive(Args)]
struct SynthArgs {
    /// Base seed; scene i uses seed + i.
    #[arg(long, default_value_t = 1, value_name = "SEED")]
    seed: u64,

    /// Scene generator parameters (JSON); built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,

    /// Number of scenes to generate.
    #[arg(long, default_value_t = 1, value_name = "N")]
    count: u32,

    /// Directory receiving the scene files; created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// File stem; with --count above 1, scenes are named {stem}_{i:03}.
    #[arg(long, default_value = "scene", value_name = "STEM")]
    stem: String,
}

/// Verify analytic loss gradients against central finite differences.
///
/// Builds seeded instances of each differentiable loss away from
/// absolute-value kinks and compares every coordinate of the hand-derived
/// gradient with a central difference. Prints one pass/fail line per loss;
/// any failure reports the worst coordinate with analytic and numeric values
/// and exits with the numerical-error code.
#[derive(Args)]
struct GradcheckArgs {
    /// Check one objective only (photometric, smoothness, velocity, radar);
    /// default is all of them.
    #[arg(long = "loss", value_name = "NAME")]
    loss: Option<String>,

    /// Seeded instances per objective.
    #[arg(long, default_value_t = 8, value_name = "N")]
    instances: u32,

    /// Base seed for instance construction.
    #[arg(long, default_value_t = 1, value_name = "SEED")]
    seed: u64,

    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4, value_name = "H")]
    step: f64,

    /// Largest relative error tolerated at any coordinate.
    #[arg(long, default_value_t = 1e-4, value_name = "TOL")]
    tol: f64,
}

/// Failures carry the exit code split the interface promises: validation
/// problems (1) versus numerical ones (2).
enum CliError {
    Validation(String),
    Numerical(String),
}

type CliResult<T> = Result<T, CliError>;

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Loss(ref l @ (LossError::NonFinite { .. } | LossError::Negative { .. })) => {
            CliError::Numerical(l.to_string())
        }
        other => CliError::Validation(other.to_string()),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) as i32 - 1;
            let _ = e.print();
            // -1 + 1 keeps help/version at 0 and every parse failure at 1.
            std::process::exit(code + 1);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot build worker pool: {e}")))?;
    let config = load_config(cli.config.as_deref())?;
    pool.install(|| match cli.command {
        Command::Prepare(args) => cmd_prepare(args, config),
        Command::Loss(args) => cmd_loss(args, config),
        Command::FilterInput(args) => cmd_filter_input(args, config),
        Command::Eval(args) => cmd_eval(args, config),
        Command::Synth(args) => cmd_synth(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    })
}

fn load_config(flag: Option<&Path>) -> CliResult<Config> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV).map(PathBuf::from),
    };
    match path {
        Some(p) => Config::load(&p).map_err(validation),
        None => Ok(Config::default()),
    }
}

/// File stem of each input path, rejecting duplicates: outputs are named by
/// stem, so two scenes sharing one would silently overwrite each other.
fn unique_stems(paths: &[PathBuf]) -> CliResult<Vec<String>> {
    let mut stems = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| {
                CliError::Validation(format!("{}: cannot derive a file stem", path.display()))
            })?
            .to_string();
        if stems.contains(&stem) {
            return Err(CliError::Validation(format!(
                "two scenes share the file stem {stem:?}; outputs would collide"
            )));
        }
        stems.push(stem);
    }
    Ok(stems)
}

fn create_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))
}

/// One scene's stdout summary plus an optional stderr warning, kept apart so
/// parallel processing never interleaves output.
struct SceneOutput {
    line: String,
    warning: Option<String>,
}

fn emit(outputs: Vec<CliResult<SceneOutput>>) -> CliResult<()> {
    let mut collected = Vec::with_capacity(outputs.len());
    for out in outputs {
        collected.push(out?);
    }
    for out in collected {
        if let Some(w) = out.warning {
            eprintln!("warning: {w}");
        }
        println!("{}", out.line);
    }
    Ok(())
}

fn stage_summary(stages: &[radepth::radar::stages::StageRecord]) -> String {
    if stages.is_empty() {
        return "no filter stages".into();
    }
    stages
        .iter()
        .map(|s| format!("{} {} -> {}", s.stage, s.points_in, s.points_out))
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_prepare(args: PrepareArgs, mut config: Config) -> CliResult<()> {
    if let Some(gamma) = args.gamma {
        config.association.gamma = gamma;
    }
    if let Some(beta) = args.beta {
        config.radar.beta_m = beta;
    }
    if let Some(chain) = args.chain {
        config.radar.supervision_chain = chain;
    }
    config.validate().map_err(validation)?;
    let stems = unique_stems(&args.scenes)?;
    create_out_dir(&args.out)?;

    let outputs: Vec<CliResult<SceneOutput>> = args
        .scenes
        .par_iter()
        .zip(&stems)
        .map(|(path, stem)| {
            let scene = io::load_scene(path).map_err(validation)?;
            let prepared = prepare_supervision(&scene, &config).map_err(pipeline_error)?;
            pfm::write_mask(
                &args.out.join(format!("{stem}_mask.pfm")),
                prepared.association.mask(),
            )
            .map_err(validation)?;
            pfm::write_depth(
                &args.out.join(format!("{stem}_pseudo_gt.pfm")),
                &prepared.constant_pseudo_gt(),
            )
            .map_err(validation)?;
            let (w, h) = (prepared.projected.width, prepared.projected.height);
            let regions = Grid::from_fn(w, h, |x, y| {
                prepared
                    .association
                    .region(x, y)
                    .map_or(0.0, |id| (id + 1) as f64)
            })
            .expect("projected radar carries a non-empty raster shape");
            pfm::write_gray(&args.out.join(format!("{stem}_regions.pfm")), &regions)
                .map_err(validation)?;
            io::save_stage_records(
                &args.out.join(format!("{stem}_provenance.json")),
                &prepared.stages,
            )
            .map_err(validation)?;
            let warning = scene
                .boxes
                .is_empty()
                .then(|| format!("{stem}: scene has no boxes; supervision is empty"));
            let line = format!(
                "{stem}: mask {} px in {} regions; {}",
                prepared.association.masked_count(),
                prepared.association.region_sizes().len(),
                stage_summary(&prepared.stages),
            );
            Ok(SceneOutput { line, warning })
        })
        .collect();
    emit(outputs)
}

/// Reads a dense prediction raster: every pixel must be finite (numerical
/// error otherwise) and positive (validation error otherwise).
fn read_dense_prediction(path: &Path) -> CliResult<DepthRaster> {
    let gray = pfm::read_gray(path).map_err(validation)?;
    for y in 0..gray.height() {
        for x in 0..gray.width() {
            let v = gray.at(x, y);
            if !v.is_finite() {
                return Err(CliError::Numerical(format!(
                    "{}: non-finite depth {v} at pixel ({x}, {y})",
                    path.display()
                )));
            }
            if v <= 0.0 {
                return Err(CliError::Validation(format!(
                    "{}: non-positive depth {v} at pixel ({x}, {y}); dense predictions \
must be positive everywhere",
                    path.display()
                )));
            }
        }
    }
    Ok(DepthRaster::from_values(gray))
}

/// Reads a prediction raster for evaluation: non-finite values are numerical
/// errors, non-positive pixels just carry no prediction.
fn read_sparse_prediction(path: &Path) -> CliResult<DepthRaster> {
    let gray = pfm::read_gray(path).map_err(validation)?;
    for y in 0..gray.height() {
        for x in 0..gray.width() {
            let v = gray.at(x, y);
            if !v.is_finite() {
                return Err(CliError::Numerical(format!(
                    "{}: non-finite depth {v} at pixel ({x}, {y})",
                    path.display()
                )));
            }
        }
    }
    Ok(DepthRaster::from_values(gray))
}

fn read_pose_estimates(path: &Path) -> CliResult<Vec<PoseSE3>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let rows: Vec<[f64; 12]> = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            PoseSE3::from_rows12(row).map_err(|e| {
                CliError::Validation(format!("{}: pose estimate {i}: {e}", path.display()))
            })
        })
        .collect()
}

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_loss(args: LossArgs, mut config: Config) -> CliResult<()> {
    if let Some(alpha) = args.alpha {
        config.loss.alpha = alpha;
    }
    if let Some(w) = args.lambda_smoothness {
        config.loss.lambda_smoothness = w;
    }
    if let Some(w) = args.lambda_velocity {
        config.loss.lambda_velocity = w;
    }
    if let Some(w) = args.lambda_radar {
        config.loss.lambda_radar = w;
    }
    config.validate().map_err(validation)?;

    let scene = io::load_scene(&args.scene).map_err(validation)?;
    let predictions: Vec<DepthRaster> = args
        .predictions
        .par_iter()
        .map(|p| read_dense_prediction(p))
        .collect::<CliResult<_>>()?;
    let finest = &predictions[0];
    if finest.width() != scene.camera.width || finest.height() != scene.camera.height {
        return Err(CliError::Validation(format!(
            "finest prediction is {}x{} but the scene is {}x{}",
            finest.width(),
            finest.height(),
            scene.camera.width,
            scene.camera.height
        )));
    }
    let poses = args.poses.as_deref().map(read_pose_estimates).transpose()?;

    let prepared = prepare_supervision(&scene, &config).map_err(pipeline_error)?;
    let pack = supervision_pack(&prepared, finest);
    let (report, maps) = scene_loss(&scene, &predictions, poses.as_deref(), Some(&pack), &config)
        .map_err(pipeline_error)?;

    write_or_print(args.out.as_deref(), &io::format_loss_report(&report))?;

    if let Some(dir) = args.dump_maps {
        create_out_dir(&dir)?;
        pfm::write_gray(&dir.join("min_error.pfm"), &maps.min_error).map_err(validation)?;
        pfm::write_mask(&dir.join("error_valid.pfm"), &maps.error_valid).map_err(validation)?;
        if let Some(mask) = &maps.automask {
            pfm::write_mask(&dir.join("automask.pfm"), mask).map_err(validation)?;
        }
        if let Some(residual) = &maps.radar_residual {
            pfm::write_gray(&dir.join("radar_residual.pfm"), residual).map_err(validation)?;
        }
    }
    Ok(())
}

fn cmd_filter_input(args: FilterInputArgs, mut config: Config) -> CliResult<()> {
    if let Some(chain) = args.chain {
        config.radar.input_chain = chain;
    }
    config.validate().map_err(validation)?;
    let stems = unique_stems(&args.scenes)?;
    create_out_dir(&args.out)?;

    let outputs: Vec<CliResult<SceneOutput>> = args
        .scenes
        .par_iter()
        .zip(&stems)
        .map(|(path, stem)| {
            let scene = io::load_scene(path).map_err(validation)?;
            let filtered = filter_input(&scene, &config).map_err(pipeline_error)?;
            pfm::write_depth(
                &args.out.join(format!("{stem}_radar.pfm")),
                &filtered.raster,
            )
            .map_err(validation)?;
            let (w, h) = (filtered.raster.width(), filtered.raster.height());
            let total = (w as usize) * (h as usize);
            let line = format!(
                "{stem}: {} occupied px of {total} ({:.3}%); {}",
                filtered.occupied_pixels,
                100.0 * filtered.occupied_pixels as f64 / total as f64,
                stage_summary(&filtered.stages),
            );
            Ok(SceneOutput {
                line,
                warning: None,
            })
        })
        .collect();
    emit(outputs)
}

fn parse_class(name: &str) -> CliResult<ObjectClass> {
    const CLASSES: [ObjectClass; 7] = [
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Bus,
        ObjectClass::Motorcycle,
        ObjectClass::Bicycle,
        ObjectClass::Pedestrian,
        ObjectClass::Other,
    ];
    CLASSES
        .into_iter()
        .find(|c| c.as_str() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = CLASSES.iter().map(|c| c.as_str()).collect();
            CliError::Validation(format!(
                "unknown class {name:?}; known: {}",
                known.join(", ")
            ))
        })
}

fn read_samples(path: &Path) -> CliResult<Vec<GroundTruthSample>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let samples: Vec<GroundTruthSample> = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    for (i, s) in samples.iter().enumerate() {
        if !s.depth.is_finite() {
            return Err(CliError::Numerical(format!(
                "{}: sample {i} has non-finite depth {}",
                path.display(),
                s.depth
            )));
        }
    }
    Ok(samples)
}

fn cmd_eval(args: EvalArgs, mut config: Config) -> CliResult<()> {
    if args.predictions.len() != args.samples.len() {
        return Err(CliError::Validation(format!(
            "{} predictions but {} sample files; pass one --samples per --prediction",
            args.predictions.len(),
            args.samples.len()
        )));
    }
    if args.median_scale {
        config.metrics.median_scaling = true;
    }
    if args.per_frame_average {
        config.metrics.per_frame_average = true;
    }
    if let Some(d) = args.max_depth {
        config.metrics.max_depth_m = d;
    }
    if let Some(d) = args.min_depth {
        config.metrics.min_depth_m = d;
    }
    config.validate().map_err(validation)?;
    let class_filter = args
        .classes
        .as_ref()
        .map(|names| {
            names
                .iter()
                .map(|n| parse_class(n))
                .collect::<CliResult<Vec<_>>>()
        })
        .transpose()?;

    let loaded: Vec<(DepthRaster, Vec<GroundTruthSample>)> = args
        .predictions
        .par_iter()
        .zip(&args.samples)
        .map(|(pred_path, samples_path)| {
            Ok((
                read_sparse_prediction(pred_path)?,
                read_samples(samples_path)?,
            ))
        })
        .collect::<CliResult<_>>()?;
    let frames: Vec<FrameSamples> = loaded
        .iter()
        .map(|(prediction, samples)| FrameSamples {
            prediction,
            samples,
        })
        .collect();
    let report =
        evaluate_frames(&frames, &config.metrics, class_filter.as_deref()).map_err(validation)?;
    write_or_print(args.out.as_deref(), &io::format_metric_report(&report))
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SynthSpec>(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if args.count == 0 {
        return Err(CliError::Validation("--count must be at least 1".into()));
    }
    create_out_dir(&args.out)?;

    let outputs: Vec<CliResult<SceneOutput>> = (0..args.count)
        .into_par_iter()
        .map(|i| {
            let seed = args.seed + i as u64;
            let stem = if args.count == 1 {
                args.stem.clone()
            } else {
                format!("{}_{i:03}", args.stem)
            };
            let synthetic = generate(seed, &spec).map_err(validation)?;
            let scene = Scene::from_synthetic(&synthetic);
            let doc = io::save_scene(&scene, &args.out, &stem).map_err(validation)?;
            let gt_path = args.out.join(format!("{stem}_gt.json"));
            let mut json = serde_json::to_string_pretty(&scene.gt_samples)
                .map_err(|e| CliError::Validation(format!("{}: {e}", gt_path.display())))?;
            json.push('\n');
            std::fs::write(&gt_path, json)
                .map_err(|e| CliError::Validation(format!("{}: {e}", gt_path.display())))?;
            let line = format!(
                "wrote {} (seed {seed}, {} boxes, {} sweeps, {} gt samples)",
                doc.display(),
                scene.boxes.len(),
                scene.sweeps.len(),
                scene.gt_samples.len()
            );
            Ok(SceneOutput {
                line,
                warning: None,
            })
        })
        .collect();
    emit(outputs)
}

fn cmd_gradcheck(args: GradcheckArgs) -> CliResult<()> {
    if args.instances == 0 {
        return Err(CliError::Validation(
            "--instances must be at least 1".into(),
        ));
    }
    if !(args.step.is_finite() && args.step > 0.0) {
        return Err(CliError::Validation(format!(
            "--step must be positive, got {}",
            args.step
        )));
    }
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(CliError::Validation(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    let names: Vec<String> = match args.loss {
        Some(name) => vec![name],
        None => OBJECTIVE_NAMES.iter().map(|n| n.to_string()).collect(),
    };

    let mut failed = Vec::new();
    for name in &names {
        let mut coords = 0usize;
        let mut worst: Option<CheckReport> = None;
        for k in 0..args.instances {
            let objective = build_objective(name, args.seed + k as u64).map_err(validation)?;
            let report = check_objective(objective.as_ref(), args.step, args.tol);
            coords += report.coords;
            if worst
                .as_ref()
                .map_or(true, |w| report.worst.rel > w.worst.rel)
            {
                worst = Some(report);
            }
        }
        let worst = worst.expect("at least one instance was checked");
        let c = worst.worst;
        if worst.pass {
            println!(
                "{name}: pass ({coords} coordinates, worst rel {:.3e} at coordinate {})",
                c.rel, c.coord
            );
        } else {
            println!(
                "{name}: FAIL at coordinate {}: analytic {} vs numeric {} (rel {:.3e}, \
tolerance {:.0e})",
                c.coord, c.analytic, c.numeric, c.rel, args.tol
            );
            failed.push(name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "gradient check failed for: {}",
            failed.join(", ")
        )))
    }
}
