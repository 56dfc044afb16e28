use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jtsched_bench::io::{check_records, emit, read_csv_file, write_summary_json};
use jtsched_bench::summary::render_table;
use jtsched_bench::{run_experiment, Algorithm, ExperimentSpec, Result, Summary};
use log::{error, info, warn};

#[derive(Parser)]
#[command(name = "jtsched", version, about = "Monte Carlo experiments for joint user scheduling and beamforming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run {
        spec: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of trials per sweep value.
        #[arg(long)]
        trials: Option<usize>,
        /// Output path prefix (`<out>.csv`, `<out>.summary.json`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of alg1, alg2, alg3.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
    },
    /// Print summary statistics of a results CSV.
    Summarize {
        csv: PathBuf,
        /// Also write the JSON summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a results CSV for format and consistency errors.
    Validate { csv: PathBuf },
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { spec, seed, trials, out, algorithms } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(s) = seed {
                spec.base_seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            if let Some(o) = out {
                spec.output = Some(o);
            }
            if let Some(a) = algorithms {
                spec.algorithms = a;
            }
            spec.validate()?;
            info!("{}: {} values x {} trials, algorithms {:?}", spec.name, spec.values.len(), spec.trials, spec.algorithms);
            let records = run_experiment(&spec)?;
            let failed = records.iter().filter(|r| !r.is_ok()).count();
            if failed > 0 {
                warn!("{failed} of {} runs failed; see the error column", records.len());
            }
            let summary = Summary::new(&records, Some(&spec));
            let (csv, json) = emit(&records, &summary, &spec.output_prefix())?;
            print!("{}", render_table(&summary));
            info!("wrote {} and {}", csv.display(), json.display());
            Ok(true)
        }
        Command::Summarize { csv, out } => {
            let records = read_csv_file(&csv)?;
            let summary = Summary::new(&records, None);
            print!("{}", render_table(&summary));
            if let Some(path) = out {
                write_summary_json(&summary, File::create(&path)?)?;
                info!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Validate { csv } => {
            let records = read_csv_file(&csv)?;
            let problems = check_records(&records);
            for p in &problems {
                error!("{p}");
            }
            if problems.is_empty() {
                println!("{}: {} records, ok", csv.display(), records.len());
            }
            Ok(problems.is_empty())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
