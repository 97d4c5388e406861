//! The four subcommands. Each takes a loaded config and returns what it
//! wrote; `main` maps errors to exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use cspwave_core::recording::{
    load_recording, read_annotations, write_annotations, write_recording, RecordingManifest,
};
use cspwave_core::synth::generate_synthetic;
use tempfile::TempDir;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{analyze, build_report, data_files, prepare, RunReport, Timings};
use crate::plot;

/// Caps the global worker pool; `None` keeps the hardware default.
pub fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

/// A scratch directory next to `output_dir`, so the final moves are renames
/// on one filesystem. Dropping it removes partial outputs.
fn staging_for(output_dir: &Path) -> Result<TempDir, CliError> {
    let parent = output_dir
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    fs::create_dir_all(&parent).map_err(CliError::io(&parent))?;
    tempfile::Builder::new()
        .prefix(".cspwave-staging-")
        .tempdir_in(&parent)
        .map_err(CliError::io(&parent))
}

/// Moves every entry of `staging` into `output_dir`, replacing old ones.
fn commit(staging: TempDir, output_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(output_dir).map_err(CliError::io(output_dir))?;
    let entries = fs::read_dir(staging.path()).map_err(CliError::io(staging.path()))?;
    for entry in entries {
        let entry = entry.map_err(CliError::io(staging.path()))?;
        let target = output_dir.join(entry.file_name());
        if target.is_dir() {
            fs::remove_dir_all(&target).map_err(CliError::io(&target))?;
        }
        fs::rename(entry.path(), &target).map_err(CliError::io(&target))?;
    }
    Ok(())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(CliError::io(path))
}

/// Generates the `[synth]` recording into `paths.recording_dir` and its
/// annotations into `paths.annotations`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<RecordingManifest, CliError> {
    let spec = cfg
        .synth
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no [synth] section".into()))?;
    spec.validate().map_err(|e| CliError::Usage(format!("synth: {e}")))?;
    let rec = generate_synthetic(spec).map_err(|e| CliError::stage("synth", e))?;
    let manifest = write_recording(&rec.manifest, &rec.segments, &cfg.paths.recording_dir)
        .map_err(|e| CliError::stage("synth", e))?;
    if let Some(parent) = cfg.paths.annotations.parent() {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    write_annotations(&cfg.paths.annotations, &rec.annotations).map_err(|e| CliError::stage("synth", e))?;
    Ok(manifest)
}

/// Summary of a `preprocess` invocation.
#[derive(Debug, Clone)]
pub struct PreprocessOutcome {
    pub clean_dir: PathBuf,
    pub rejections: usize,
    pub segments: usize,
}

/// Cleans the raw recording into `<output_dir>/clean` and writes
/// `<output_dir>/rejections.csv`.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessOutcome, CliError> {
    let manifest_path = cfg.manifest_path();
    require(&manifest_path)?;
    let (manifest, raw) = load_recording(&manifest_path).map_err(|e| CliError::stage("load", e))?;
    let data = prepare(cfg, &manifest, raw, true)?;
    let staging = staging_for(&cfg.paths.output_dir)?;
    let clean = RecordingManifest::new(
        manifest.recording_id.clone(),
        data.sample_rate_hz,
        manifest.channel_labels.clone(),
    );
    write_recording(&clean, &data.segments, &staging.path().join("clean")).map_err(|e| CliError::stage("write", e))?;
    let csv = data.rejections_csv.clone().unwrap_or_default();
    write(staging.path(), "rejections.csv", &csv)?;
    commit(staging, &cfg.paths.output_dir)?;
    Ok(PreprocessOutcome {
        clean_dir: cfg.paths.output_dir.join("clean"),
        rejections: csv.lines().count().saturating_sub(1),
        segments: data.segments.len(),
    })
}

/// Runs every stage and writes all outputs, or nothing on failure.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let manifest_path = cfg.manifest_path();
    require(&manifest_path)?;
    require(&cfg.paths.annotations)?;
    let mut timings = Timings::default();
    let (manifest, raw) = timings
        .time("load", || load_recording(&manifest_path))
        .map_err(|e| CliError::stage("load", e))?;
    let annotations = read_annotations(&cfg.paths.annotations).map_err(|e| CliError::stage("load", e))?;
    let data = timings.time("preprocess", || prepare(cfg, &manifest, raw, cfg.run_preprocess))?;
    let analysis = analyze(cfg, &data, &annotations, &mut timings)?;

    let staging = staging_for(&cfg.paths.output_dir)?;
    let t0 = std::time::Instant::now();
    let mut outputs = Vec::new();
    for (name, text) in data_files(&data, &analysis) {
        write(staging.path(), &name, &text)?;
        outputs.push(name);
    }
    for (name, svg) in plot::render(staging.path())? {
        write(staging.path(), &name, &svg)?;
        outputs.push(name);
    }
    outputs.push("report.json".to_string());
    timings.0.push(crate::pipeline::StageTiming {
        stage: "report".into(),
        ms: t0.elapsed().as_secs_f64() * 1e3,
    });
    let report = build_report(cfg, &data, &analysis, outputs, timings);
    write(staging.path(), "report.json", &report.to_json())?;
    commit(staging, &cfg.paths.output_dir)?;
    Ok(report)
}

/// Re-renders the figures of the report in `paths.output_dir`.
pub fn cmd_plot(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.paths.output_dir;
    let figures = plot::render(dir)?;
    let mut written = Vec::with_capacity(figures.len());
    for (name, svg) in figures {
        write(dir, &name, &svg)?;
        written.push(dir.join(name));
    }
    Ok(written)
}
