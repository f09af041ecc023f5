use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nonlin_lab::config::Config;
use nonlin_lab::experiments::{run, write_reports};
use nonlin_lab::report::Verdict;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    HullCheck,
    Monge,
    Radial,
    Annulus,
    Gamma,
    Minimax,
    Connectivity,
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::HullCheck => "hull-check",
            Command::Monge => "monge",
            Command::Radial => "radial",
            Command::Annulus => "annulus",
            Command::Gamma => "gamma",
            Command::Minimax => "minimax",
            Command::Connectivity => "connectivity",
            Command::All => "all",
        }
    }
}

/// Numerical experiments on convex-hull, Monge-Ampère, Pohozaev, minimax and
/// connectivity statements. Exit codes: 0 no failed verdict, 1 a failed
/// verdict, 2 bad configuration, 3 runtime failure.
#[derive(Debug, Parser)]
#[command(name = "nonlin-lab", version)]
struct Cli {
    /// Experiment family to run.
    #[arg(value_enum, required_unless_present = "print_config")]
    command: Option<Command>,

    /// Sectioned key = value file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory for JSON reports and CSV artifacts.
    #[arg(long, default_value = "reports")]
    out: PathBuf,

    /// Overrides [run] seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Print the effective configuration with key documentation and exit.
    #[arg(long)]
    print_config: bool,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        None => Config::default(),
        Some(path) => match std::fs::read_to_string(path).map_err(nonlin_lab::Error::from).and_then(|t| Config::parse(&t)) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if cli.print_config {
        print!("{}", cfg.to_text());
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let command = cli.command.expect("clap requires a command without --print-config");
    let outcome = match run(command.name(), &cfg, &cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Err(e) = write_reports(&cli.out, &outcome.reports) {
        eprintln!("writing reports: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    for r in &outcome.reports {
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::OpenEvidence => "open-evidence",
        };
        println!("{verdict:>13}  {}  ({:.2} s)", r.statement, r.timing.wall_seconds);
        if let Some(e) = &r.error {
            println!("{:>13}  error: {e}", "");
        }
    }
    if outcome.runtime_error {
        ExitCode::from(EXIT_RUNTIME)
    } else if outcome.any_fail() {
        ExitCode::from(EXIT_FAIL)
    } else {
        ExitCode::SUCCESS
    }
}
