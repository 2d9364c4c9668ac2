use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use winratio_cli::analyze::{DeathFlag, MissingFlag, WeightsFlag};
use winratio_cli::{analyze, input, nnt_table, simulate, AnalyzeOptions, CliError, CliResult, Method};

#[derive(Parser)]
#[command(name = "winratio", version, about = "Win probability, win ratio and rank tests for two-group trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV file of subject-level outcomes.
    Analyze {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "wp")]
        method: Method,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "sample-size")]
        weights: WeightsFlag,
        #[arg(long, value_enum, default_value = "equal")]
        death_strategy: DeathFlag,
        #[arg(long, value_enum, default_value = "error")]
        missing: MissingFlag,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Number needed to treat for a range of win ratios.
    NntTable {
        /// Win ratios (> 1, or "inf"); defaults to the standard table.
        #[arg(long, value_delimiter = ',')]
        kappa: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run a Monte-Carlo study described by a TOML file.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "sim-out")]
        out_dir: PathBuf,
        /// Worker threads; results are identical for any value.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze {
            file,
            method,
            alpha,
            weights,
            death_strategy,
            missing,
            json,
            report,
        } => {
            let data = input::read_dataset(&file)?;
            let opts = AnalyzeOptions {
                method,
                alpha,
                weights,
                death_strategy,
                missing,
                input: file.display().to_string(),
            };
            let result = analyze(&data, &opts)?;
            if let Some(path) = report {
                std::fs::write(&path, result.to_json())
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            }
            if json {
                print!("{}", result.to_json());
            } else {
                print!("{}", winratio_cli::report::render_table(&result));
            }
        }
        Command::NntTable { kappa, json } => {
            let kappas = if kappa.is_empty() {
                nnt_table::DEFAULT_KAPPAS.to_vec()
            } else {
                kappa.iter().map(|k| nnt_table::parse_kappa(k)).collect::<CliResult<_>>()?
            };
            let rows = nnt_table::nnt_rows(&kappas)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
            } else {
                print!("{}", nnt_table::render(&rows));
            }
        }
        Command::Simulate {
            config,
            out_dir,
            workers,
        } => {
            let mut cfg = simulate::load_config(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
                cfg.validate().map_err(|e| CliError::Usage(format!("--workers: {e}")))?;
            }
            let out = simulate::run(&cfg, &out_dir)?;
            print!("{}", simulate::render_summary(&out));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
