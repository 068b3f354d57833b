use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixfrac_cli::commands::{self, Outcome};
use mixfrac_cli::{CliError, ProblemFile};

#[derive(Debug, Parser)]
#[command(
    name = "mixfrac",
    version,
    about = "Fractional variational problems with mixed derivatives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base path for CSV output; `.csv` is appended when missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of grid nodes, overriding the problem file.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Only print machine-readable output and errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Not supported: every computation is deterministic.
    #[arg(long, global = true, hide = true)]
    seed: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimise the functional (with the multiplier search if a constraint is given).
    Solve { file: PathBuf },
    /// Euler–Lagrange residual norms of a trajectory.
    Residual {
        file: PathBuf,
        /// CSV with `t` and `y` columns on the problem grid.
        #[arg(long = "y")]
        y_csv: PathBuf,
        /// Multiplier for `H = F − λG`; required when the file has `G`.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// Also report the max-norm over interior nodes with lo ≤ t ≤ hi.
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
    },
    /// Reference extremal of the quadratic family on [0, b].
    Reference {
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        xi: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
    },
    /// Solve on several grids and report errors and observed orders.
    Convergence {
        file: PathBuf,
        /// Comma-separated node counts, e.g. 251,501,1001.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<usize>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("`{lo}` is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("`{hi}` is not a number"))?;
    if lo <= hi {
        Ok((lo, hi))
    } else {
        Err("window needs lo <= hi".into())
    }
}

const DEFAULT_REFERENCE_NODES: usize = 101;

fn default_out(file: &Path) -> PathBuf {
    file.with_extension("")
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if cli.seed.is_some() {
        return Err(CliError::Usage(
            "--seed is not supported: nothing in mixfrac is random".into(),
        ));
    }
    match &cli.command {
        Command::Solve { file } => {
            let loaded = ProblemFile::read(file)?.load(cli.n)?;
            let out = cli.out.clone().unwrap_or_else(|| default_out(file));
            let (outcome, path) = commands::solve(&loaded, &out)?;
            if let (Some(path), false) = (path, cli.quiet) {
                eprintln!("wrote {}", path.display());
            }
            Ok(outcome)
        }
        Command::Residual {
            file,
            y_csv,
            lambda,
            window,
        } => {
            let loaded = ProblemFile::read(file)?.load(cli.n)?;
            commands::residual(&loaded, y_csv, *lambda, *window)
        }
        Command::Reference { k, alpha, xi, b } => commands::reference(
            *k,
            *alpha,
            *xi,
            *b,
            cli.n.unwrap_or(DEFAULT_REFERENCE_NODES),
            cli.out.as_deref(),
        ),
        Command::Convergence { file, grids } => {
            if cli.n.is_some() {
                return Err(CliError::Usage("--n has no effect on convergence; use --grids".into()));
            }
            let pf = ProblemFile::read(file)?;
            commands::convergence(|n| pf.load(Some(n)), grids)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Err(e) = commands::emit(&outcome.stdout) {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code());
            }
            if let Some(msg) = &outcome.error {
                eprintln!("error: {msg}");
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
