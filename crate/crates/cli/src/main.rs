//! `msbell`: batch analysis of multisetting Bell inequality violations.

mod report;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use msbell::Error;

use report::{CriterionChoice, Format, SweepKind};

#[derive(Parser)]
#[command(name = "msbell", version, about = "Correlation-tensor analysis of multisetting Bell inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Seed for the random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of optimizer restarts.
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate criteria for one state.
    Analyze {
        /// State spec, e.g. `ghz:n=3,alpha=pi/8`, `w:n=4`, `fourphoton`,
        /// `noise:v=0.8,inner=w:n=3`, `random:n=3,seed=1`.
        #[arg(long)]
        state: String,
        /// Comma-separated list of standard, c442, c442a, c332, cN.
        #[arg(long, value_delimiter = ',', default_value = "standard,c442,c332,cN")]
        criteria: Vec<CriterionChoice>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate criteria along a one-parameter family of states.
    Sweep {
        #[arg(long, value_enum)]
        sweep: SweepKind,
        /// Inner state for `--sweep noise`.
        #[arg(long)]
        state: Option<String>,
        /// Number of qubits for `--sweep ghz` (default 3).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Grid size for continuous parameters; `w` sweeps every integer in range.
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long, value_delimiter = ',', default_value = "c442")]
        criteria: Vec<CriterionChoice>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Exact classical bound by exhaustive enumeration.
    Bound {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Number of parties for the N-party families.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    F442,
    F332,
    #[value(name = "fN", alias = "fn")]
    FN,
    Standard,
}

impl From<FamilyArg> for msbell::bellineq::Family {
    fn from(f: FamilyArg) -> Self {
        use msbell::bellineq::Family;
        match f {
            FamilyArg::F442 => Family::F442,
            FamilyArg::F332 => Family::F332,
            FamilyArg::FN => Family::FN,
            FamilyArg::Standard => Family::Standard,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Domain(_) => 2,
        Error::Arity(_) => 3,
        Error::TooLarge { .. } => 4,
        Error::Validation(_) => 1,
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> io::Result<()> {
    match out {
        Some(path) => File::create(path)?.write_all(text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn run(cli: Cli) -> Result<(String, Option<PathBuf>), Error> {
    let opts = |c: &Common| msbell::Options { restarts: c.restarts, seed: c.seed };
    match cli.command {
        Command::Analyze { state, criteria, format, common } => {
            let text = report::analyze(&state, &criteria, &opts(&common), format)?;
            Ok((text, common.out))
        }
        Command::Sweep { sweep, state, n, from, to, points, criteria, format, common } => {
            let grid = report::SweepGrid { kind: sweep, inner: state, n, from, to, points };
            let text = report::sweep(&grid, &criteria, &opts(&common), format)?;
            Ok((text, common.out))
        }
        Command::Bound { family, n, format, out } => Ok((report::bound(family.into(), n, format)?, out)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, out)) => match emit(&text, out.as_ref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("msbell: cannot write output: {e}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("msbell: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
