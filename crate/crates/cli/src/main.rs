use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mobo_cli::report::AnalyzeOptions;
use mobo_cli::{demo, report, service, simulate, CliError, ServiceConfig};
use mobo_core::analysis::ObjectiveSpace;
use mobo_core::RaterPopulation;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "mobo", version, about = "Human-in-the-loop multi-objective optimization of eHMI designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Raw,
    Normalized,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP/JSON service.
    Serve {
        /// Service TOML; MOBO_PORT and MOBO_STORE override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run synthetic MOBO sessions and matched random-search baselines.
    Simulate {
        #[arg(long, default_value_t = 20)]
        raters: usize,
        /// Rater seeds: `1..20`, `1..=20` or `3,5,8`. Defaults to 1..=raters.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Rater population TOML.
        #[arg(long)]
        population: Option<PathBuf>,
        /// Service TOML whose `[session]` table sets the session config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Pareto counts, Bayes-factor tables and correlations for a study CSV.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        /// Column mapping TOML.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        pareto_only: bool,
        #[arg(long)]
        group_col: Option<String>,
        /// Objective space used to select Pareto designs.
        #[arg(long, value_enum, default_value = "normalized")]
        space: Space,
        /// Also write the tables as CSV files into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print one scripted synthetic session step by step.
    Demo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn init_logging(default: &str) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn read_population(path: Option<PathBuf>) -> Result<RaterPopulation, CliError> {
    let Some(p) = path else { return Ok(RaterPopulation::default()) };
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::new("io", format!("{}: {e}", p.display())))?;
    RaterPopulation::from_toml(&text).map_err(|e| CliError::new("config_invalid", e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Serve { config } => {
            init_logging("info");
            let mut cfg = ServiceConfig::load(config.as_deref())?;
            cfg.apply_env(|k| std::env::var(k).ok())?;
            service::serve(cfg)
        }
        Command::Simulate { raters, seeds, out, population, config } => {
            init_logging("warn");
            let session = ServiceConfig::load(config.as_deref())?.session;
            let seeds = match seeds {
                Some(s) => simulate::parse_seeds(&s)?,
                None => (1..=raters as u64).collect(),
            };
            if seeds.len() < raters {
                return Err(CliError::new(
                    "invalid_args",
                    format!("{} seeds given for {raters} raters", seeds.len()),
                ));
            }
            let population = read_population(population)?;
            let summary = simulate::simulate_to_dir(&population, &seeds[..raters], &session, &out, &mut stdout)?;
            let _ = writeln!(
                stdout,
                "mobo >= random on {}/{} raters; mean final hypervolume mobo {:.4} random {:.4}",
                summary.wins(),
                summary.outcomes.len(),
                summary.mean_mobo(),
                summary.mean_random()
            );
            let _ = writeln!(stdout, "wrote {} session logs to {}", 2 * summary.outcomes.len(), out.display());
            Ok(())
        }
        Command::Analyze { data, schema, pareto_only, group_col, space, out } => {
            init_logging("warn");
            let opts = AnalyzeOptions {
                data,
                schema,
                pareto_only,
                group_col,
                space: match space {
                    Space::Raw => ObjectiveSpace::Raw,
                    Space::Normalized => ObjectiveSpace::Normalized,
                },
                out,
            };
            let text = report::run(&opts)?;
            let _ = stdout.write_all(text.as_bytes());
            Ok(())
        }
        Command::Demo { seed, config } => {
            init_logging("warn");
            let session = ServiceConfig::load(config.as_deref())?.session;
            demo::run(&session, seed, |line| {
                let _ = writeln!(stdout, "{line}");
            })
            .map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::new("invalid_args", first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
