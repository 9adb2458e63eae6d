//! Command-line interface: family specs in, machine-readable JSON/CSV (and
//! an SVG for diagrams) out. One process, one command. Exit codes: 0 on
//! success, 2 on validation failure, 3 on numerical non-convergence, 1 for
//! anything else; errors print a single line on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::bifurcation::{
    assemble_diagram, find_cusps, solve_saddle_node, trace_curve, Frozen, StepControl,
};
use crate::census::run_census;
use crate::family::{
    build_lemma1_family, embed_theta, validate_diffeo, FamilySpec, Lemma1Params, ParamPoint,
    ThetaSlice,
};
use crate::invariants::{max_sources_at_rational, parity_prefix_diff, section_scan};
use crate::output::{curve_csv, diagram_svg, section_csv, to_json_string, write_json};
use crate::rational::Rational;
use crate::rotation::{detect_rational, estimate_rho, tongue_interval};
use crate::scalar::linspace;

type Family = FamilySpec<f64>;

#[derive(Parser)]
#[command(name = "circlebif", version, about = "Bifurcation analysis for families of circle diffeomorphisms")]
pub struct Cli {
    /// Worker threads for grid scans and censuses (falls back to
    /// CIRCLEBIF_THREADS, then to all cores). Output is identical for any
    /// thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FamilyArg {
    /// Family spec JSON file.
    #[arg(long)]
    family: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the family is a diffeomorphism family on a grid.
    Validate {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 256)]
        grid_x: usize,
        #[arg(long, default_value_t = 16)]
        grid_params: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the rotation number at one parameter point.
    Rotnum {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether the rotation number is rational (orbit test).
    Detect {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 64)]
        qmax: i64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate the mode-locking interval through a theta-slice.
    Tongue {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long)]
        rational: Rational,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate and classify all period-q orbits at one parameter point.
    Census {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long)]
        rational: Rational,
        /// Grid points (defaults to 4096 per unit period).
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace the saddle-node curve through a seed point.
    Trace {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        rational: Rational,
        /// Seed "s,theta,x"; refined by Newton at frozen s before tracing.
        #[arg(long)]
        seed: Seed,
        #[arg(long, default_value_t = 1e-6)]
        min_step: f64,
        #[arg(long, default_value_t = 1e-2)]
        max_step: f64,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Find cusp points from a seed lattice or an explicit seed file.
    Cusps {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        rational: Rational,
        /// JSON file with an array of [s, theta, x] seeds.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        scan_grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the full bifurcation diagram for a list of rationals.
    Diagram {
        #[command(flatten)]
        family: FamilyArg,
        /// Comma-separated rationals, e.g. "0/1,1/2".
        #[arg(long, value_delimiter = ',')]
        rationals: Vec<Rational>,
        #[arg(long, default_value_t = 16)]
        scan_grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Directory for per-curve CSV files.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Compute the source-count invariant (a, b) at one rational.
    Invariants {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long)]
        rational: Rational,
        #[arg(long, default_value_t = 256)]
        theta_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First index where two families' parity sequences differ.
    ParityDiff {
        #[arg(long)]
        family_a: PathBuf,
        #[arg(long)]
        family_b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        s_a: f64,
        #[arg(long, default_value_t = 0.0)]
        s_b: f64,
        #[arg(long, value_delimiter = ',')]
        rationals: Vec<Rational>,
        #[arg(long, default_value_t = 256)]
        theta_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan a(s) over horizontal sections of a two-parameter family.
    ScanSection {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        rational: Rational,
        #[arg(long, default_value_t = 32)]
        s_steps: usize,
        #[arg(long, default_value_t = 64)]
        theta_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build the rotation-plus-flow family with 2N periodic orbits.
    ConstructLemma1 {
        #[arg(long)]
        pq: Rational,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        amp: f64,
        #[arg(long, default_value_t = 64)]
        steps: u32,
        /// Append the rotation by theta, making a one-parameter family.
        #[arg(long, default_value_t = false)]
        embed_theta: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

/// "s,theta,x" triple.
#[derive(Clone, Copy, Debug)]
struct Seed([f64; 3]);

impl FromStr for Seed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("expected s,theta,x; got {s:?}"));
        }
        let mut v = [0.0; 3];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|e| format!("bad seed component {part:?}: {e}"))?;
        }
        Ok(Seed(v))
    }
}

enum CliError {
    Io(String),
    Validation(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Validation(m) | CliError::Numeric(m) => m,
        }
    }
}

use crate::bifurcation::BifError;
use crate::census::CensusError;
use crate::family::FamilyError;
use crate::invariants::InvariantError;
use crate::rotation::RotationError;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<FamilyError<f64>> for CliError {
    fn from(e: FamilyError<f64>) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RotationError<f64>> for CliError {
    fn from(e: RotationError<f64>) -> Self {
        match e {
            RotationError::MonotonicityUnverified(_) => CliError::Validation(e.to_string()),
            RotationError::RationalNotAttained(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CensusError<f64>> for CliError {
    fn from(e: CensusError<f64>) -> Self {
        match e {
            CensusError::GridTooCoarse { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<BifError<f64>> for CliError {
    fn from(e: BifError<f64>) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<InvariantError<f64>> for CliError {
    fn from(e: InvariantError<f64>) -> Self {
        match e {
            InvariantError::MonotonicityUnverified(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn load_family(path: &Path) -> Result<Family, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let spec: Family = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("cannot parse {}: {e}", path.display())))?;
    spec.structural_check()?;
    Ok(spec)
}

fn emit<T: serde::Serialize>(out: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    match out {
        Some(path) => write_json(path, value).map_err(CliError::from),
        None => {
            print!("{}", to_json_string(value));
            Ok(())
        }
    }
}

/// Parses the command line, runs one command, and returns the process exit
/// code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("CIRCLEBIF_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("circlebif: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { family, grid_x, grid_params, out } => {
            let spec = load_family(&family.family)?;
            let report = validate_diffeo(&spec, grid_x, grid_params);
            emit(out.as_ref(), &report)?;
            if !report.ok {
                return Err(CliError::Validation(format!(
                    "minimum derivative {} at s={}, theta={}, x={}",
                    report.min_derivative, report.worst.s, report.worst.theta, report.worst_x
                )));
            }
            Ok(())
        }
        Command::Rotnum { family, s, theta, iters, x0, out } => {
            let spec = load_family(&family.family)?;
            let est = estimate_rho(&spec, ParamPoint::new(s, theta), iters, x0);
            emit(out.as_ref(), &est)
        }
        Command::Detect { family, s, theta, qmax, tol, out } => {
            let spec = load_family(&family.family)?;
            let found = detect_rational(&spec, ParamPoint::new(s, theta), qmax, tol);
            #[derive(serde::Serialize)]
            #[serde(rename_all = "camelCase")]
            struct Detected {
                detected: Option<Rational>,
            }
            emit(out.as_ref(), &Detected { detected: found })
        }
        Command::Tongue { family, s, rational, tol, out } => {
            let spec = load_family(&family.family)?;
            let interval = tongue_interval(ThetaSlice::new(&spec, s), rational, tol)?;
            emit(out.as_ref(), &interval)
        }
        Command::Census { family, s, theta, rational, grid, out } => {
            let spec = load_family(&family.family)?;
            let grid = grid.unwrap_or(4096 * rational.denom() as usize);
            let census = run_census(&spec, ParamPoint::new(s, theta), rational, grid)?;
            emit(out.as_ref(), &census)
        }
        Command::Trace { family, rational, seed, min_step, max_step, tol, out, csv } => {
            let spec = load_family(&family.family)?;
            let converged = solve_saddle_node(&spec, rational, seed.0, Frozen::S)?;
            let ctrl = StepControl { min_step, max_step, tol };
            let curve = trace_curve(&spec, rational, &converged, ctrl)?;
            if let Some(path) = csv {
                fs::write(path, curve_csv(&curve))?;
            }
            emit(out.as_ref(), &curve)
        }
        Command::Cusps { family, rational, seeds, scan_grid, out } => {
            let spec = load_family(&family.family)?;
            let seeds = match seeds {
                Some(path) => {
                    let text = fs::read_to_string(&path)?;
                    serde_json::from_str::<Vec<[f64; 3]>>(&text).map_err(|e| {
                        CliError::Validation(format!("cannot parse {}: {e}", path.display()))
                    })?
                }
                None => {
                    let b = spec.param_box;
                    let n = scan_grid.max(2);
                    let mut out = Vec::new();
                    for s in linspace(b.s[0], b.s[1], n) {
                        for theta in linspace(b.theta[0], b.theta[1], n) {
                            for i in 0..n {
                                out.push([s, theta, (i as f64 + 0.5) / n as f64]);
                            }
                        }
                    }
                    out
                }
            };
            let cusps = find_cusps(&spec, rational, &seeds);
            emit(out.as_ref(), &cusps)
        }
        Command::Diagram { family, rationals, scan_grid, out, svg, csv_dir } => {
            let spec = load_family(&family.family)?;
            if rationals.is_empty() {
                return Err(CliError::Validation("no rationals given".into()));
            }
            let diagrams = assemble_diagram(&spec, &rationals, scan_grid);
            if let Some(path) = &svg {
                let mut text = String::new();
                for d in &diagrams {
                    text.push_str(&diagram_svg(d, &spec.param_box));
                }
                fs::write(path, text)?;
            }
            if let Some(dir) = &csv_dir {
                fs::create_dir_all(dir)?;
                for (di, d) in diagrams.iter().enumerate() {
                    for (ci, curve) in d.curves.iter().enumerate() {
                        let name = format!("diagram_{di}_curve_{ci}.csv");
                        fs::write(dir.join(name), curve_csv(curve))?;
                    }
                }
            }
            emit(out.as_ref(), &diagrams)
        }
        Command::Invariants { family, s, rational, theta_samples, out } => {
            let spec = load_family(&family.family)?;
            let record = max_sources_at_rational(ThetaSlice::new(&spec, s), rational, theta_samples)?;
            emit(out.as_ref(), &record)
        }
        Command::ParityDiff {
            family_a,
            family_b,
            s_a,
            s_b,
            rationals,
            theta_samples,
            out,
        } => {
            let spec_a = load_family(&family_a)?;
            let spec_b = load_family(&family_b)?;
            let diff = parity_prefix_diff(
                ThetaSlice::new(&spec_a, s_a),
                ThetaSlice::new(&spec_b, s_b),
                &rationals,
                theta_samples,
            )?;
            emit(out.as_ref(), &diff)
        }
        Command::ScanSection { family, rational, s_steps, theta_samples, out, csv } => {
            let spec = load_family(&family.family)?;
            let scan = section_scan(&spec, rational, s_steps, theta_samples)?;
            if let Some(path) = csv {
                fs::write(path, section_csv(&scan))?;
            }
            emit(out.as_ref(), &scan)
        }
        Command::ConstructLemma1 { pq, n, delta, amp, steps, embed_theta: embed, out } => {
            let params = Lemma1Params {
                p: pq.numer(),
                q: pq.denom() as u32,
                n,
                delta,
                amplitude: amp,
                steps,
            };
            let spec = build_lemma1_family(params)?;
            let spec = if embed { embed_theta(&spec) } else { spec };
            write_json(&out, &spec)?;
            Ok(())
        }
    }
}
