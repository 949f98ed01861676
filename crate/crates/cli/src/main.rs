use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entropic_time_cli::{acceptance, configure_threads, run_file, CliError};

#[derive(Parser)]
#[command(name = "entropic-time", version, about = "Run decoherence and information-gain scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write CSV output plus manifest.json.
    Run {
        config: PathBuf,
        /// Also write an SVG line plot of each CSV.
        #[arg(long)]
        plot: bool,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the acceptance suite.
    Selftest,
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.machine_line());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match cli.command {
        Command::Run { config, plot, out } => match run_file(&config, &out, plot) {
            Ok(manifest) => {
                for f in &manifest.files {
                    println!("{}  {}", f.sha256, out.join(&f.name).display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Selftest => {
            let mut failed = 0;
            for c in acceptance::criteria() {
                let v = acceptance::run_criterion(&c);
                println!("{}", v.line());
                failed += usize::from(!v.passed);
            }
            println!("{} of 15 criteria passed", 15 - failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
