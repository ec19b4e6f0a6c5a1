use cellfree::experiment::{
    parse_solvers, run_monte_carlo, run_sweep, validation, ExperimentSpec, SolverKind, TimingTable,
};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cellfree", version, about = "Monte-Carlo harness for cell-free association and power control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a JSON spec file or a preset.
    Run {
        /// Path to a JSON spec.
        spec: Option<PathBuf>,
        /// Use a shipped preset instead of a spec file.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// Print the spec and expected row counts without solving.
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the built-in correctness suites.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time the solvers and print the run-time table.
    Bench {
        #[arg(long, default_value = "large-150x40")]
        preset: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Base seed for the realizations.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated subset of SCA, APG, FULL, HEU.
    #[arg(long)]
    solvers: Option<String>,
    /// Output directory for result files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Overrides {
    fn apply(&self, spec: &mut ExperimentSpec) -> cellfree::Result<()> {
        if let Some(seed) = self.seed {
            spec.network.rng_seed = seed;
        }
        if let Some(n) = self.realizations {
            spec.num_realizations = n;
        }
        if let Some(list) = &self.solvers {
            spec.solvers = parse_solvers(list)?;
        }
        if let Some(out) = &self.out {
            spec.output_dir = out.clone();
        }
        if let Some(jobs) = self.jobs {
            spec.parallelism = jobs;
        }
        spec.validate()
    }
}

const CONFIG_ERROR: u8 = 1;
const SUITE_FAILURE: u8 = 2;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load_spec(spec: Option<PathBuf>, preset: Option<String>, overrides: &Overrides) -> Result<ExperimentSpec, String> {
    let mut s = match (spec, preset) {
        (Some(path), _) => {
            ExperimentSpec::load(&path).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(name)) => ExperimentSpec::preset(&name).map_err(|e| e.to_string())?,
        (None, None) => return Err("give a spec file or --preset".into()),
    };
    overrides.apply(&mut s).map_err(|e| e.to_string())?;
    Ok(s)
}

fn print_summaries(res: &cellfree::experiment::SweepResults) {
    println!("{:<6} {:>6} {:>9} {:>9} {:>14} {:>14}", "solver", "runs", "failures", "feasible", "median sum SE", "mean time [s]");
    for s in res.summaries() {
        println!(
            "{:<6} {:>6} {:>9} {:>9} {:>14.3} {:>14.3}",
            s.solver.name(),
            s.runs,
            s.failures,
            s.feasible,
            s.median_sum_se,
            s.mean_wall_time
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec, preset, dry_run, overrides } => {
            let spec = match load_spec(spec, preset, &overrides) {
                Ok(s) => s,
                Err(e) => return fail(CONFIG_ERROR, e),
            };
            if dry_run {
                let counts = spec.dry_run();
                println!("{}", serde_json::to_string_pretty(&spec).expect("spec serializes"));
                println!("ue_se.csv rows: {}", counts.ue_rows);
                println!("summary.csv rows: {}", counts.summary_rows);
                return ExitCode::SUCCESS;
            }
            match run_monte_carlo(&spec) {
                Ok(res) => {
                    print_summaries(&res);
                    println!("results written to {}", spec.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(CONFIG_ERROR, e),
            }
        }
        Command::Validate { seed } => {
            let results = validation::run_all(seed);
            for r in &results {
                println!("{r}");
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(SUITE_FAILURE)
            }
        }
        Command::Bench { preset, overrides } => {
            let mut spec = match ExperimentSpec::preset(&preset) {
                Ok(s) => s,
                Err(e) => return fail(CONFIG_ERROR, e),
            };
            spec.num_realizations = 5;
            spec.solvers = vec![SolverKind::Sca, SolverKind::Apg, SolverKind::Heu];
            if let Err(e) = overrides.apply(&mut spec) {
                return fail(CONFIG_ERROR, e);
            }
            let res = match run_sweep(&spec) {
                Ok(r) => r,
                Err(e) => return fail(CONFIG_ERROR, e),
            };
            println!(
                "{} APs, {} UEs, {} realizations",
                spec.network.num_aps, spec.network.num_ues, spec.num_realizations
            );
            println!("{}", TimingTable::from_results(&res));
            if overrides.out.is_some() {
                if let Err(e) = res.write(&spec.output_dir) {
                    return fail(CONFIG_ERROR, e);
                }
            }
            ExitCode::SUCCESS
        }
    }
}
