use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pointflow::Complex64;
use pointflow_cli::config::RunConfig;
use pointflow_cli::report::WeightSpec;
use pointflow_cli::{analytic_csv, run_blowup, run_report, run_simulate, AnalyticParams, CliError};

#[derive(Parser)]
#[command(name = "pointflow", version, about = "Point source and vortex simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config and write trajectory, events, report and plot.
    Simulate {
        config: PathBuf,
        /// Print the fully populated config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Invariant report for a trajectory CSV.
    Report {
        trajectory: PathBuf,
        /// `re`, `im` or a comma-separated list.
        #[arg(long, default_value = "re", allow_hyphen_values = true)]
        weights: String,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form two-body samples as CSV.
    Analytic {
        #[arg(long, allow_hyphen_values = true)]
        sum_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        sum_im: f64,
        #[arg(long, default_value_t = 1.0)]
        r0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta0: f64,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Integrate the blown-up system from a config's initial state.
    Blowup { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, print_config } => {
            if print_config {
                print!("{}", RunConfig::load(&config)?.to_toml());
            } else {
                run_simulate(&config)?;
            }
        }
        Command::Report {
            trajectory,
            weights,
            plot,
            out,
        } => {
            let weights: WeightSpec = weights.parse()?;
            run_report(&trajectory, &weights, out.as_deref(), plot.as_deref())?;
        }
        Command::Analytic {
            sum_re,
            sum_im,
            r0,
            theta0,
            t_end,
            samples,
        } => {
            let params = AnalyticParams {
                sum: Complex64::new(sum_re, sum_im),
                r0,
                theta0,
                t_end,
                samples,
            };
            print!("{}", analytic_csv(&params)?);
        }
        Command::Blowup { config } => {
            run_blowup(&config)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pointflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
