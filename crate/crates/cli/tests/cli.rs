mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{config_in, one_seizure_spec, read_dir_files};
use cspwave::{cmd_plot, cmd_preprocess, cmd_run, cmd_synth, CliError, RunConfig};
use cspwave_core::band::BandName;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cspwave"))
        .args(args)
        .env_remove("CSPWAVE_THREADS")
        .output()
        .expect("binary runs")
}

fn small(root: &Path, seed: u64) -> RunConfig {
    let mut cfg = config_in(root, one_seizure_spec(3, 600.0, 600.0, seed));
    cfg.windows.train_counts = [200, 200];
    cfg.windows.test_counts = [50, 50];
    cfg
}

fn write_config(root: &Path, cfg: &RunConfig) -> String {
    let path = root.join("run.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.to_string_lossy().into_owned()
}

fn assert_svg(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
}

#[test]
fn synth_repeats_byte_for_byte() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_synth(&small(a.path(), 9)).unwrap();
    cmd_synth(&small(b.path(), 9)).unwrap();
    let fa = read_dir_files(&a.path().join("recording"));
    assert!(fa.iter().any(|(n, _)| n == "manifest.json"));
    assert_eq!(fa, read_dir_files(&b.path().join("recording")));
    assert_eq!(
        std::fs::read(a.path().join("annotations.csv")).unwrap(),
        std::fs::read(b.path().join("annotations.csv")).unwrap()
    );

    let c = tempfile::tempdir().unwrap();
    cmd_synth(&small(c.path(), 10)).unwrap();
    assert_ne!(fa, read_dir_files(&c.path().join("recording")));
}

#[test]
fn binary_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = small(root.path(), 3);
    // Relative paths resolve against the config file.
    cfg.paths.recording_dir = "recording".into();
    cfg.paths.annotations = "annotations.csv".into();
    cfg.paths.output_dir = "out".into();
    let config = write_config(root.path(), &cfg);

    let synth = bin(&["synth", "--config", &config]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));
    let run = bin(&["run", "--config", &config, "--threads", "1"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains("AUC")).count(), 18);

    let out = root.path().join("out");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["filters"].as_array().unwrap().len(), 9);
    assert_eq!(report["evaluation"].as_array().unwrap().len(), 18);
    for name in report["outputs"].as_array().unwrap() {
        assert!(out.join(name.as_str().unwrap()).is_file(), "{name}");
    }
    for f in [
        "filters.json",
        "windows_index.csv",
        "evaluation.json",
        "evaluation.csv",
        "rejections.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for band in BandName::ALL {
        for s in 1..=2 {
            for t in 1..=2 {
                for prefix in ["waveforms", "cross_waveforms", "energies"] {
                    assert!(out.join(format!("{prefix}_{band}_{s}_{t}.csv")).is_file());
                }
                assert_svg(&out.join(format!("waveforms_{band}_{s}_{t}.svg")));
            }
        }
    }
    assert_svg(&out.join("boxplot_w1.svg"));
    assert_svg(&out.join("boxplot_w2.svg"));

    let csv = std::fs::read_to_string(out.join("waveforms_alpha_1_1.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("window_id,start_us,energy_filtered,x0,x1,"));
    assert_eq!(header.split(',').count(), 3 + 512);
    assert_eq!(lines.count(), 10);

    let filters: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("filters.json")).unwrap()).unwrap();
    let alpha = &filters["alpha"];
    assert_eq!(alpha["w1"].as_array().unwrap().len(), 3);
    assert_eq!(alpha["n_train"]["N1"], 200);

    // No staging directory is left next to the output.
    let leftovers: Vec<_> = std::fs::read_dir(root.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with(".cspwave-staging")
        })
        .collect();
    assert!(leftovers.is_empty());

    std::fs::remove_file(out.join("boxplot_w1.svg")).unwrap();
    let plot = bin(&["plot", "--config", &config]);
    assert!(plot.status.success(), "{}", String::from_utf8_lossy(&plot.stderr));
    assert_svg(&out.join("boxplot_w1.svg"));
}

#[test]
fn missing_recording_is_a_usage_error() {
    let root = tempfile::tempdir().unwrap();
    let config = write_config(root.path(), &small(root.path(), 1));
    let out = bin(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("manifest.json"), "{err}");
    assert!(!root.path().join("out").exists());
}

#[test]
fn malformed_config_names_the_field() {
    let root = tempfile::tempdir().unwrap();
    let toml = small(root.path(), 1)
        .to_toml()
        .replace("n_channels = 3", "n_channels = \"three\"");
    let path = root.path().join("bad.toml");
    std::fs::write(&path, toml).unwrap();
    let out = bin(&["synth", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_channels"));

    let toml = small(root.path(), 1)
        .to_toml()
        .replace("rng_seed = 1\n", "rng_seed = 1\nwindow_count = 4\n");
    std::fs::write(&path, toml).unwrap();
    let out = bin(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window_count"));

    let mut cfg = small(root.path(), 1);
    cfg.synth.as_mut().unwrap().planted_sources[0].mixing_vector = vec![1.0];
    let config = write_config(root.path(), &cfg);
    let out = bin(&["synth", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mixing_vector"));
}

#[test]
fn zero_threads_rejected() {
    let root = tempfile::tempdir().unwrap();
    let config = write_config(root.path(), &small(root.path(), 1));
    let out = bin(&["synth", "--config", &config, "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let root = tempfile::tempdir().unwrap();
    let config = write_config(root.path(), &small(root.path(), 1));
    let rec = root.path().join("recording");
    assert!(bin(&["synth", "--config", &config, "--seed", "5"]).status.success());
    let five = read_dir_files(&rec);
    assert!(bin(&["synth", "--config", &config]).status.success());
    assert_ne!(five, read_dir_files(&rec));
    assert!(bin(&["synth", "--config", &config, "--seed", "5"]).status.success());
    assert_eq!(five, read_dir_files(&rec));
}

#[test]
fn shortfall_is_reported_and_run_completes() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = small(root.path(), 4);
    cfg.windows.train_counts = [5000, 200];
    cmd_synth(&cfg).unwrap();
    let report = cmd_run(&cfg).unwrap();
    let short = &report.windows.shortfalls;
    assert_eq!(short.len(), 1, "{short:?}");
    assert_eq!(short[0].requested, 5000);
    assert!(short[0].got > 0 && short[0].got < 5000);
    assert_eq!(report.windows.achieved.train[0], short[0].got);
    assert_eq!(report.evaluation.len(), 18);
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["windows"]["shortfalls"][0]["requested"], 5000);
}

#[test]
fn preprocess_writes_clean_recording() {
    let root = tempfile::tempdir().unwrap();
    let cfg = small(root.path(), 5);
    cmd_synth(&cfg).unwrap();
    let out = cmd_preprocess(&cfg).unwrap();
    assert_eq!(out.segments, 2);
    assert_eq!(out.rejections, 0);
    assert!(out.clean_dir.join("manifest.json").is_file());
    let log = std::fs::read_to_string(cfg.paths.output_dir.join("rejections.csv")).unwrap();
    assert_eq!(log, "segment_id,rule,start_us,end_us,detail\n");

    // The cleaned recording feeds a run with rejection switched off.
    let mut again = cfg.clone();
    again.paths.recording_dir = out.clean_dir.clone();
    again.paths.output_dir = root.path().join("out2");
    again.run_preprocess = false;
    let report = cmd_run(&again).unwrap();
    assert!(report.rejections.is_none());
    assert_eq!(report.filters.len(), 9);
}

#[test]
fn plot_needs_a_report() {
    let root = tempfile::tempdir().unwrap();
    let cfg = small(root.path(), 1);
    std::fs::create_dir_all(&cfg.paths.output_dir).unwrap();
    let err = cmd_plot(&cfg).unwrap_err();
    assert!(matches!(err, CliError::MissingReportFile(_)), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn plot_handles_empty_waveform_files() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = small(root.path(), 6);
    cfg.bands = vec![BandName::Alpha];
    cmd_synth(&cfg).unwrap();
    cmd_run(&cfg).unwrap();
    let out = &cfg.paths.output_dir;
    std::fs::write(
        out.join("waveforms_alpha_2_2.csv"),
        "window_id,start_us,energy_filtered\n",
    )
    .unwrap();
    cmd_plot(&cfg).unwrap();
    let svg = out.join("waveforms_alpha_2_2.svg");
    assert_svg(&svg);
    assert!(std::fs::read_to_string(svg).unwrap().contains("no waveforms"));
}
