use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use impasse::job::{emit, run, Format, JobSpec};

/// Classification of singularities and impasse points of quasi-linear
/// ODEs, with existence/uniqueness/regularity diagnosis of singular
/// initial value problems.
#[derive(Parser)]
#[command(name = "impasse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a TOML job description and write the report.
    Run {
        /// Path to the job file.
        job: PathBuf,
        /// Directory for the report and trajectory CSV files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Report format.
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// List the bundled example jobs, or print one by name.
    Examples {
        /// Name of a bundled example to print as TOML.
        name: Option<String>,
    },
}

const EXAMPLES: &[(&str, &str)] = &[
    ("cusp_classify", include_str!("../jobs/cusp_classify.toml")),
    ("spiral_fiber", include_str!("../jobs/spiral_fiber.toml")),
    ("nilpotent_fiber", include_str!("../jobs/nilpotent_fiber.toml")),
    (
        "nilpotent_vertical",
        include_str!("../jobs/nilpotent_vertical.toml"),
    ),
    (
        "dichotomy_smooth",
        include_str!("../jobs/dichotomy_smooth.toml"),
    ),
    (
        "dichotomy_resonant",
        include_str!("../jobs/dichotomy_resonant.toml"),
    ),
    (
        "powerlaw_family",
        include_str!("../jobs/powerlaw_family.toml"),
    ),
    ("gamma_zero", include_str!("../jobs/gamma_zero.toml")),
    (
        "smooth_resonance",
        include_str!("../jobs/smooth_resonance.toml"),
    ),
];

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { job, out, format } => {
            let text = match std::fs::read_to_string(&job) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", job.display());
                    return ExitCode::from(2);
                }
            };
            let spec = match JobSpec::from_toml(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let output = match run(&spec) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let format = match format {
                OutputFormat::Json => Format::Json,
                OutputFormat::Text => Format::Text,
            };
            match emit(&output, format, &out) {
                Ok(written) => {
                    for path in written {
                        println!("{}", path.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: cannot write to {}: {e}", out.display());
                    ExitCode::FAILURE
                }
            }
        }
        Command::Examples { name } => match name {
            None => {
                for (name, text) in EXAMPLES {
                    let blurb = text
                        .lines()
                        .next()
                        .unwrap_or("")
                        .trim_start_matches('#')
                        .trim();
                    println!("{name:<20} {blurb}");
                }
                ExitCode::SUCCESS
            }
            Some(n) => match EXAMPLES.iter().find(|(name, _)| *name == n) {
                Some((_, text)) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("error: no bundled example named `{n}`");
                    ExitCode::from(2)
                }
            },
        },
    }
}
