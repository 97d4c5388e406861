use std::path::PathBuf;

/// Exit status for usage and configuration problems.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures inside a pipeline stage.
pub const EXIT_PIPELINE: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("report file missing: {}", .0.display())]
    MissingReportFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::MissingInput(_) => EXIT_USAGE,
            CliError::Stage { .. } | CliError::MissingReportFile(_) | CliError::Io { .. } => EXIT_PIPELINE,
        }
    }

    pub fn stage(stage: &'static str, e: impl std::fmt::Display) -> CliError {
        CliError::Stage {
            stage,
            message: e.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
