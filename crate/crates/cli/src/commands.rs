use std::io::Write;
use std::path::{Path, PathBuf};

use mixfrac::fracgrid::{FracOrder, Grid, SampledFunction};
use mixfrac::reference::{boundary_value, ml_convolution_extremal, ReferenceSpec};
use mixfrac::solver::{solve_isoperimetric, solve_unconstrained, Solution, SolverError};
use mixfrac::variational::Problem;
use serde::Serialize;

use crate::error::CliError;
use crate::problem_file::Loaded;

/// What a command prints on stdout and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
    /// Why a nonzero `code` was chosen, for stderr.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub objective: Option<f64>,
    pub lambda: Option<f64>,
    pub el_norm: Option<f64>,
    pub constraint_residual: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
}

impl From<&Solution> for Summary {
    fn from(s: &Solution) -> Self {
        Summary {
            objective: Some(s.objective),
            lambda: s.lambda,
            el_norm: Some(s.el_norm),
            constraint_residual: s.constraint_residual,
            iterations: Some(s.iterations),
            converged: s.converged,
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain structs serialize")
}

/// 17 significant digits, `.` as the decimal separator.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for i in 0..columns[0].len() {
        w.write_record(columns.iter().map(|c| fmt_f64(c[i]))).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_string(header: &[&str], columns: &[&[f64]]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for i in 0..columns[0].len() {
        w.write_record(columns.iter().map(|c| fmt_f64(c[i])))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// `<out>.csv`, keeping any extension the user already gave.
pub fn csv_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    if out.extension().is_none_or(|e| e != "csv") {
        s.push(".csv");
    }
    PathBuf::from(s)
}

fn run_solver(p: &Problem, loaded: &Loaded) -> Result<Solution, CliError> {
    let r = if p.constraint().is_some() {
        solve_isoperimetric(p, &loaded.options)
    } else {
        solve_unconstrained(p, &loaded.options)
    };
    match r {
        Ok(s) => Ok(s),
        Err(SolverError::InnerNonConvergence { solution, .. }) => Ok(*solution),
        Err(e) => Err(e.into()),
    }
}

/// Returns the outcome and the CSV path, if one was written.
pub fn solve(loaded: &Loaded, out: &Path) -> Result<(Outcome, Option<PathBuf>), CliError> {
    let p = &loaded.problem;
    let s = match run_solver(p, loaded) {
        Ok(s) => s,
        Err(e @ CliError::Solver(SolverError::BracketFailure { .. })) => {
            // nothing to write, but the summary is still part of the contract
            let summary = Summary {
                objective: None,
                lambda: None,
                el_norm: None,
                constraint_residual: None,
                iterations: None,
                converged: false,
            };
            return Ok((
                Outcome {
                    stdout: to_json(&summary) + "\n",
                    code: 3,
                    error: Some(e.to_string()),
                },
                None,
            ));
        }
        Err(e) => return Err(e),
    };
    let cd = p.combined_derivative(&s.y)?;
    let res = p.el_residual(&s.y, s.lambda)?;
    let path = csv_path(out);
    write_csv(
        &path,
        &["t", "y", "v", "el_residual"],
        &[&p.grid().nodes(), s.y.values(), cd.v.values(), res.values.values()],
    )?;
    Ok((
        Outcome {
            stdout: to_json(&Summary::from(&s)) + "\n",
            code: if s.converged { 0 } else { 3 },
            error: (!s.converged).then(|| "solver did not converge".to_string()),
        },
        Some(path),
    ))
}

/// Reads the `t` and `y` columns of a CSV file and checks them against `grid`.
pub fn read_trajectory(path: &Path, grid: &Grid) -> Result<SampledFunction, CliError> {
    let bad = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (ti, yi) = (col("t")?, col("y")?);
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            let field = rec.get(i).unwrap_or("").trim();
            field
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: `{field}` is not a number", row + 1)))
        };
        ts.push(num(ti)?);
        ys.push(num(yi)?);
    }
    if ts.len() != grid.n() {
        return Err(bad(format!("{} rows but the grid has {} nodes", ts.len(), grid.n())));
    }
    for (i, t) in ts.iter().enumerate() {
        let node = grid.node(i);
        if (t - node).abs() > 1e-12 * (1.0 + node.abs()) {
            return Err(bad(format!("row {}: t = {t} does not match grid node {node}", i + 1)));
        }
    }
    Ok(SampledFunction::new(*grid, ys)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ResidualReport {
    norm_max_interior: f64,
    norm_l2_interior: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    norm_max_window: Option<f64>,
}

pub fn residual(
    loaded: &Loaded,
    y_csv: &Path,
    lambda: Option<f64>,
    window: Option<(f64, f64)>,
) -> Result<Outcome, CliError> {
    let p = &loaded.problem;
    let y = read_trajectory(y_csv, p.grid())?;
    let r = p.el_residual(&y, lambda)?;
    let report = ResidualReport {
        norm_max_interior: r.norm_max_interior,
        norm_l2_interior: r.norm_l2_interior,
        norm_max_window: window.map(|(lo, hi)| r.max_abs_on(lo, hi)),
    };
    Ok(Outcome {
        stdout: to_json(&report) + "\n",
        code: 0,
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct BoundaryReport {
    boundary_value: f64,
}

/// Reference extremal on `[0, b]`. The CSV goes to `out` when given,
/// otherwise to stdout ahead of the JSON line.
pub fn reference(k: f64, alpha: f64, xi: f64, b: f64, n: usize, out: Option<&Path>) -> Result<Outcome, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "alpha = {alpha} is outside the open interval (0, 1)"
        )));
    }
    let grid = Grid::new(0.0, b, n)?;
    let spec = ReferenceSpec::new(k, FracOrder::new(alpha)?, xi, grid)?;
    let y = ml_convolution_extremal(&spec)?;
    let report = BoundaryReport {
        boundary_value: boundary_value(&spec)?,
    };
    let columns: [&[f64]; 2] = [&grid.nodes(), y.values()];
    let mut stdout = String::new();
    match out {
        Some(out) => write_csv(&csv_path(out), &["t", "y"], &columns)?,
        None => stdout.push_str(&csv_string(&["t", "y"], &columns)),
    }
    stdout.push_str(&(to_json(&report) + "\n"));
    Ok(Outcome {
        stdout,
        code: 0,
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ConvergenceRow {
    n: usize,
    h: f64,
    error: Option<f64>,
    order: Option<f64>,
    converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ConvergenceTable {
    /// `reference` or `finest`.
    baseline: &'static str,
    rows: Vec<ConvergenceRow>,
}

/// Piecewise-linear value of `f` at `t`.
fn interpolate(f: &SampledFunction, t: f64) -> f64 {
    let g = f.grid();
    let s = ((t - g.a()) / g.h()).clamp(0.0, (g.n() - 1) as f64);
    let i = (s.floor() as usize).min(g.n() - 2);
    let w = s - i as f64;
    (1.0 - w) * f.values()[i] + w * f.values()[i + 1]
}

fn max_error(y: &SampledFunction, exact: impl Fn(usize, f64) -> f64) -> f64 {
    let g = y.grid();
    (0..g.n()).fold(0.0, |m: f64, i| m.max((y.values()[i] - exact(i, g.node(i))).abs()))
}

/// Errors below this are rounding noise and get no order estimate.
const ROUNDING_FLOOR: f64 = 1e-12;

/// Refinement study. `load` builds the problem for a given `n`.
pub fn convergence(load: impl Fn(usize) -> Result<Loaded, CliError>, grids: &[usize]) -> Result<Outcome, CliError> {
    if grids.len() < 2 {
        return Err(CliError::Usage(
            "a convergence study needs at least two grid sizes".into(),
        ));
    }
    let mut grids = grids.to_vec();
    grids.sort_unstable();
    grids.dedup();
    if grids.len() < 2 {
        return Err(CliError::Usage(
            "a convergence study needs at least two distinct grid sizes".into(),
        ));
    }
    let mut solved = Vec::new();
    for &n in &grids {
        let loaded = load(n)?;
        let s = run_solver(&loaded.problem, &loaded)?;
        solved.push((loaded, s));
    }
    let family = solved[0].0.reference_family;
    let mut errors = Vec::new();
    if family {
        for (loaded, s) in &solved {
            let p = &loaded.problem;
            let xi = p.constraint().map(|c| c.xi).unwrap_or_default();
            let reference = ml_convolution_extremal(&ReferenceSpec::new(p.k(), p.order(), xi, *p.grid())?)?;
            errors.push(Some(max_error(&s.y, |i, _| reference.values()[i])));
        }
    } else {
        let finest = &solved.last().expect("two or more grids").1.y;
        for (i, (_, s)) in solved.iter().enumerate() {
            errors.push((i + 1 < solved.len()).then(|| max_error(&s.y, |_, t| interpolate(finest, t))));
        }
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (i, ((loaded, s), error)) in solved.iter().zip(&errors).enumerate() {
        let h = loaded.problem.grid().h();
        let order = match (i.checked_sub(1).and_then(|j| errors[j]), *error) {
            (Some(prev), Some(e)) if prev > ROUNDING_FLOOR && e > ROUNDING_FLOOR => {
                Some((prev / e).ln() / (rows[i - 1].h / h).ln())
            }
            _ => None,
        };
        rows.push(ConvergenceRow {
            n: loaded.problem.grid().n(),
            h,
            error: *error,
            order,
            converged: s.converged,
        });
    }
    let all = rows.iter().all(|r| r.converged);
    let table = ConvergenceTable {
        baseline: if family { "reference" } else { "finest" },
        rows,
    };
    Ok(Outcome {
        stdout: to_json(&table) + "\n",
        code: if all { 0 } else { 3 },
        error: (!all).then(|| "a solve in the study did not converge".to_string()),
    })
}

/// Writes `text` to stdout in one piece.
pub fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_path_appends_extension() {
        assert_eq!(csv_path(Path::new("out/run")), PathBuf::from("out/run.csv"));
        assert_eq!(csv_path(Path::new("run.csv")), PathBuf::from("run.csv"));
        assert_eq!(csv_path(Path::new("run.v2")), PathBuf::from("run.v2.csv"));
    }

    #[test]
    fn full_precision_formatting() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn interpolation_is_exact_on_lines() {
        let g = Grid::new(0.0, 2.0, 5).unwrap();
        let f = SampledFunction::from_fn(g, |t| 3.0 * t - 1.0).unwrap();
        for t in [0.0, 0.3, 1.0, 1.77, 2.0] {
            assert!((interpolate(&f, t) - (3.0 * t - 1.0)).abs() < 1e-14);
        }
    }
}
