use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsf_cli::acceptance::{self, Suite};
use gsf_cli::config::bundled;
use gsf_cli::error::ConfigError;
use gsf_cli::{experiments, CliError, ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "gsf", version, about = "Generalized smooth function experiments and acceptance suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Directory for output files.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of ε-grid points between gauge.eps_max and gauge.eps_min.
    #[arg(long)]
    eps_points: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            eps_points: self.eps_points,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance suite and write acceptance_report.json.
    Acceptance {
        /// Directory whose `<experiment>.toml` files replace the bundled defaults.
        #[arg(long)]
        config_dir: Option<PathBuf>,
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        #[command(flatten)]
        common: Common,
    },
    /// Write δ_ε and H_ε profiles (delta.csv, heaviside.csv).
    DumpProfiles {
        /// Config to take the gauge and mollifier from; bundled default otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.clone(), source }.into())
}

fn run_experiment(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let art = experiments::run(cfg)?;
    for path in art.write(&cfg.output_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = ExperimentConfig::parse(&read_config(&config)?, &common.overrides())?;
            run_experiment(&cfg)
        }
        Command::DumpProfiles { config, common } => {
            let source = match &config {
                Some(p) => read_config(p)?,
                None => bundled("embed_profiles").expect("bundled profile config").to_string(),
            };
            let mut cfg = ExperimentConfig::parse(&source, &common.overrides())?;
            cfg.experiment = gsf_cli::config::Experiment::EmbedProfiles;
            run_experiment(&cfg)
        }
        Command::Acceptance {
            config_dir,
            criteria,
            common,
        } => {
            let overrides = common.overrides();
            let suite = match &config_dir {
                Some(d) => Suite::from_dir(d, &overrides)?,
                None => Suite::bundled(&overrides)?,
            };
            let out = common.output_dir.clone().unwrap_or_else(|| PathBuf::from("acceptance_out"));
            let report = acceptance::run_and_write(&suite, &criteria, &out)?;
            for c in &report.criteria {
                println!("{}", c.summary_line());
            }
            println!("report: {}", out.join("acceptance_report.json").display());
            match report.failed() {
                0 => Ok(()),
                failed => Err(CliError::Acceptance {
                    failed,
                    total: report.criteria.len(),
                }),
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
