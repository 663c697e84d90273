use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oem_swap::sweep::{self, OutputFormat, SweepError};

#[derive(Parser)]
#[command(name = "oem-swap", version, about = "Remote microwave entanglement swapping sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every grid point of a configuration and write the records.
    Run {
        config: PathBuf,
        /// Overrides `output.path` from the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `output.format` from the configuration.
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Check a configuration and the stability of its sweep endpoints.
    Validate { config: PathBuf },
}

fn run(config: PathBuf, out: Option<PathBuf>, format: Option<OutputFormat>) -> Result<(), SweepError> {
    let cfg = sweep::load_config(&config)?;
    let path = out.or_else(|| cfg.output.as_ref().and_then(|o| o.path.clone())).ok_or_else(|| {
        SweepError::Config(vec![sweep::Diagnostic {
            location: "output.path".into(),
            message: "no output path in the configuration and no --out given".into(),
        }])
    })?;
    let format = format
        .or_else(|| cfg.output.as_ref().map(|o| o.format))
        .unwrap_or(OutputFormat::Csv);
    let result = sweep::run_sweep(&cfg)?;
    sweep::write_output(&path, &sweep::render(&result, format))?;
    println!("{} output={}", result.summary(), path.display());
    if result.stable_count() == 0 {
        return Err(SweepError::AllUnstable { points: result.points.len() });
    }
    Ok(())
}

fn validate(config: PathBuf) -> Result<(), SweepError> {
    let cfg = sweep::load_config(&config)?;
    let report = sweep::validate(&cfg)?;
    for e in &report.endpoints {
        println!(
            "endpoint {:.6e}: {} (spectral abscissa {:.3e} rad/s)",
            e.swept_value,
            if e.stable { "stable" } else { "UNSTABLE" },
            e.spectral_abscissa
        );
    }
    if report.endpoints.iter().all(|e| !e.stable) {
        return Err(SweepError::AllUnstable { points: report.endpoints.len() });
    }
    println!("valid: {} grid point(s)", report.points);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, out, format } => run(config, out, format),
        Command::Validate { config } => validate(config),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            if !matches!(e, SweepError::Config(_)) {
                eprintln!();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
