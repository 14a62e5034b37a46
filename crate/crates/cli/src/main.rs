use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ntnorch::experiments::{run_study, Study, StudyOutput};
use ntnorch::orchestration::RelaxSchedule;
use ntnorch::scenario::{Scenario, ScenarioFile};
use ntnorch::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "ntnorch", version, about = "Multi-operator satellite route orchestration studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one study on a scenario file.
    Run(RunArgs),
    /// Validate a scenario and print its resolved form.
    Check { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Timeseries,
    Negotiate,
    Sweep,
    Opcount,
    Availability,
    Cdf,
    Single,
}

impl From<StudyArg> for Study {
    fn from(s: StudyArg) -> Study {
        match s {
            StudyArg::Timeseries => Study::Timeseries,
            StudyArg::Negotiate => Study::Negotiate,
            StudyArg::Sweep => Study::Sweep,
            StudyArg::Opcount => Study::Opcount,
            StudyArg::Availability => Study::Availability,
            StudyArg::Cdf => Study::Cdf,
            StudyArg::Single => Study::Single,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    study: StudyArg,
    /// Output directory.
    #[arg(long, env = "NTNORCH_OUT", default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Relaxation schedule JSON, replacing the scenario's.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Candidate cap N_r for Step 1.
    #[arg(long)]
    cap: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long)]
    verbose: bool,
    scenario: PathBuf,
}

enum Failure {
    Config(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Domain(_) | Error::UndefinedGeometry(_) => Failure::Internal(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<ScenarioFile, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn prepare(args: &RunArgs) -> Result<Scenario, Failure> {
    let mut file = read_file(&args.scenario)?;
    if let Some(seed) = args.seed {
        file.seed = seed;
    }
    if let Some(cap) = args.cap {
        if cap == 0 {
            return Err(Failure::Config("--cap must be >= 1".into()));
        }
        file.orchestrator.candidate_cap = Some(cap);
    }
    if let Some(p) = &args.schedule {
        let text = fs::read_to_string(p)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
        let s: RelaxSchedule = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        file.studies.schedule = s;
    }
    Ok(Scenario::from_file(file)?)
}

fn write_outputs(dir: &Path, scn: &Scenario, out: &StudyOutput) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Internal(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut config = scn.resolved_json();
    config.push('\n');
    fs::write(dir.join("config.json"), config).map_err(io)?;
    for (name, body) in &out.files {
        fs::write(dir.join(name), body).map_err(io)?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool, Failure> {
    let scn = prepare(&args)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let study = Study::from(args.study);
    if args.verbose {
        eprintln!("running {} on {}", study.as_str(), scn.name);
    }
    let out = run_study(&scn, study, None)?;
    write_outputs(&args.out, &scn, &out)?;
    if args.verbose {
        for (name, _) in &out.files {
            eprintln!("wrote {}", args.out.join(name).display());
        }
    }
    Ok(out.solved)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Check { scenario } => read_file(&scenario)
            .and_then(|f| Ok(Scenario::from_file(f)?))
            .map(|s| {
                println!("{}", s.resolved_json());
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("no feasible route; schedule exhausted");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
