//! TOML run configuration.

use std::path::{Path, PathBuf};

use cspwave_core::band::BandName;
use cspwave_core::preprocess::PreprocessConfig;
use cspwave_core::synth::SyntheticSpec;
use cspwave_core::windowing::SetCounts;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_WINDOW_LEN: usize = 512;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory holding `manifest.json` and the segment files.
    pub recording_dir: PathBuf,
    /// `annotations.csv` with seizure marks.
    pub annotations: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowsConfig {
    pub length_samples: usize,
    /// Training windows `[N1, N2]` (preictal, interictal).
    pub train_counts: [usize; 2],
    /// Test windows `[M1, M2]`.
    pub test_counts: [usize; 2],
}

impl Default for WindowsConfig {
    fn default() -> Self {
        WindowsConfig {
            length_samples: DEFAULT_WINDOW_LEN,
            train_counts: [2000, 2000],
            test_counts: [500, 500],
        }
    }
}

impl WindowsConfig {
    pub fn counts(&self) -> SetCounts {
        SetCounts {
            train: self.train_counts,
            test: self.test_counts,
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_eps() -> f64 {
    cspwave_core::csp::DEFAULT_EPS_REL
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_bands() -> Vec<BandName> {
    BandName::ALL.to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
    #[serde(default = "default_eps")]
    pub eps_rel: f64,
    /// Subtract window means before accumulating covariances.
    #[serde(default)]
    pub center_windows: bool,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_bands")]
    pub bands: Vec<BandName>,
    /// Run artifact rejection inside `run`; off when `recording_dir`
    /// already holds a cleaned recording.
    #[serde(default = "yes")]
    pub run_preprocess: bool,
    pub paths: PathsConfig,
    #[serde(default)]
    pub windows: WindowsConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    /// Generator settings for `synth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SyntheticSpec>,
}

impl RunConfig {
    pub fn new(paths: PathsConfig) -> RunConfig {
        RunConfig {
            rng_seed: default_seed(),
            eps_rel: default_eps(),
            center_windows: false,
            k: DEFAULT_K,
            bands: default_bands(),
            run_preprocess: true,
            paths,
            windows: WindowsConfig::default(),
            preprocess: PreprocessConfig::default(),
            synth: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config file; relative paths are resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = RunConfig::from_toml(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.paths.recording_dir,
            &mut cfg.paths.annotations,
            &mut cfg.paths.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate().map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    /// Checks values; path existence is checked by each command.
    pub fn validate(&self) -> Result<(), String> {
        if self.windows.length_samples < 2 {
            return Err("windows.length_samples must be at least 2".into());
        }
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if !(self.eps_rel >= 0.0 && self.eps_rel.is_finite()) {
            return Err("eps_rel must be a non-negative number".into());
        }
        if self.bands.is_empty() {
            return Err("bands must list at least one band".into());
        }
        let mut seen = self.bands.clone();
        seen.sort_by_key(|b| b.as_str());
        seen.dedup();
        if seen.len() != self.bands.len() {
            return Err("bands must not repeat".into());
        }
        self.preprocess.validate()
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.paths.recording_dir.join("manifest.json")
    }
}
