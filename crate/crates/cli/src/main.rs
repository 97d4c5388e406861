use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cspwave::{cmd_plot, cmd_preprocess, cmd_run, cmd_synth, configure_threads, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "cspwave",
    version,
    about = "CSP waveform discovery on long multichannel recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic recording described by the [synth] section.
    Synth(Common),
    /// Reject artifacts and write a cleaned recording.
    Preprocess(Common),
    /// Run the full pipeline and write the report.
    Run(Common),
    /// Re-render SVG figures from an existing report.
    Plot(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, env = "CSPWAVE_THREADS")]
    threads: Option<usize>,
    /// Overrides the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (Command::Synth(common) | Command::Preprocess(common) | Command::Run(common) | Command::Plot(common)) =
        &cli.command;
    configure_threads(common.threads)?;
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.rng_seed = seed;
        if let Some(spec) = cfg.synth.as_mut() {
            spec.rng_seed = seed;
        }
    }
    match cli.command {
        Command::Synth(_) => {
            let m = cmd_synth(&cfg)?;
            println!(
                "wrote {} segments of {} channels to {}",
                m.segment_entries.len(),
                m.n_channels(),
                cfg.paths.recording_dir.display()
            );
        }
        Command::Preprocess(_) => {
            let out = cmd_preprocess(&cfg)?;
            println!(
                "kept {} segments in {}, {} rejections logged",
                out.segments,
                out.clean_dir.display(),
                out.rejections
            );
        }
        Command::Run(_) => {
            let report = cmd_run(&cfg)?;
            for c in &report.evaluation {
                println!("{:<10} w{}  AUC {:.3}", c.band, c.filter, c.auc);
            }
            for s in &report.windows.shortfalls {
                eprintln!(
                    "warning: {} {} windows: requested {}, sampled {}",
                    s.condition,
                    s.split.as_str(),
                    s.requested,
                    s.got
                );
            }
            println!("report written to {}", cfg.paths.output_dir.display());
        }
        Command::Plot(_) => {
            let files = cmd_plot(&cfg)?;
            println!("wrote {} figures to {}", files.len(), cfg.paths.output_dir.display());
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
