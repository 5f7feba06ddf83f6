//! `porous-equiv`: validate compartment networks, build their star (MRMT) and
//! chain (MINC) equivalents, reduce, compare, and simulate them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod failure;
mod load;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use porous_equiv::realization::{frequency_response, log_grid, transfer_function_with};
use porous_equiv::reduction::{minimal_mrmt_with, truncate, Criterion};
use porous_equiv::sim::{default_horizon, simulate, uniform_grid, InputSignal};
use porous_equiv::transforms::{
    to_minc_with, to_mrmt_with, verify_equivalence_with, DEFAULT_EQUIVALENCE_TOL,
};
use porous_equiv::{
    build_state_space, check_assumptions, json, EquivalentRealization, Tolerances,
    ValidationReport,
};
use serde::Serialize;

use failure::{usage, EXIT_ASSUMPTIONS, EXIT_IO, EXIT_NOT_EQUIVALENT, EXIT_OK};
use load::{load, Kind, Model};

/// Equivalent star and chain realizations of compartmental solute-transport networks.
///
/// Model files are JSON: a network specification
/// `{"volumes": [..], "flow": Q, "edges": [{"i":1,"j":2,"d":..}, ..]}` with
/// 1-based zones and zone 1 mobile (or `"mobile": k`), a realization written
/// by `mrmt`/`minc`/`reduce`, or a state space `{"n", "a", "b", "c"}`.
///
/// Exit codes: 0 success, 1 I/O, parse or usage error, 2 not controllable,
/// 3 assumption violation, 4 numerical failure, 5 `compare` found the models
/// different. Errors are reported as JSON on stderr.
#[derive(Debug, Parser)]
#[command(name = "porous-equiv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Debug, Args)]
struct TolArgs {
    /// Krylov breakdown threshold for rank decisions, relative to ‖A‖_F.
    #[arg(long, global = true, default_value_t = Tolerances::default().rank_tol)]
    rank_tol: f64,
    /// Relative gap below which two eigenvalues count as equal.
    #[arg(long, global = true, default_value_t = Tolerances::default().eig_sep_tol)]
    eig_sep_tol: f64,
    /// Relative input weight below which a mode is unreachable.
    #[arg(long, global = true, default_value_t = Tolerances::default().mode_tol)]
    mode_tol: f64,
    /// Relative threshold for structural zeros in assumption checks.
    #[arg(long, global = true, default_value_t = Tolerances::default().struct_tol)]
    struct_tol: f64,
    /// Relative tolerance for cancelling common transfer-function factors.
    #[arg(long, global = true, default_value_t = Tolerances::default().gcd_tol)]
    gcd_tol: f64,
    /// Relative floor for the positivity of the chain scaling vector.
    #[arg(long, global = true, default_value_t = Tolerances::default().pos_tol)]
    pos_tol: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rank_tol: self.rank_tol,
            eig_sep_tol: self.eig_sep_tol,
            mode_tol: self.mode_tol,
            struct_tol: self.struct_tol,
            gcd_tol: self.gcd_tol,
            pos_tol: self.pos_tol,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the compartmental assumptions; exit 0 iff all pass.
    Validate { model: PathBuf },
    /// Equivalent star (MRMT) realization.
    Mrmt {
        model: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Equivalent chain (MINC) realization.
    Minc {
        model: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Exact lumping to a minimal star, or truncation of a star or chain.
    Reduce(ReduceArgs),
    /// Compare the Markov parameters of two models; exit 0 iff equivalent.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Markov-parameter tolerance.
        #[arg(long, env = "POROUS_EQUIV_TOL", default_value_t = DEFAULT_EQUIVALENCE_TOL)]
        tol: f64,
    },
    /// Coprime transfer function, ascending coefficients.
    Tf {
        model: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Frequency response T(iω) as CSV `omega,re,im`.
    Nyquist {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        omega_min: f64,
        #[arg(long, default_value_t = 1e2)]
        omega_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Outlet concentration for a step or pulse injection, as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReduceMode {
    Minimal,
    Truncate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Form {
    Mrmt,
    Minc,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    model: PathBuf,
    #[arg(long, value_enum)]
    mode: ReduceMode,
    /// Keep compartments with at least this volume.
    #[arg(long, group = "criterion")]
    volume_floor: Option<f64>,
    /// Keep compartments whose connecting exchange rate is at least this.
    #[arg(long, group = "criterion")]
    rate_floor: Option<f64>,
    /// Keep this many compartments, mobile zone included.
    #[arg(long, group = "criterion")]
    keep: Option<usize>,
    /// Form to truncate when the model is not already a star or chain
    /// realization.
    #[arg(long, value_enum, default_value = "mrmt")]
    form: Form,
    /// Allow a truncation that leaves only the mobile zone.
    #[arg(long)]
    allow_mobile_only: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputKind {
    Step,
    Pulse,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    model: PathBuf,
    #[arg(long, value_enum)]
    input: InputKind,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Pulse length (normalized time).
    #[arg(long)]
    duration: Option<f64>,
    /// End of the time grid; defaults to 50 over the slowest decay rate.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1001)]
    points: usize,
    /// Also write every compartment concentration.
    #[arg(long)]
    states: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            report_error(&usage(e.to_string().trim_end().to_owned()));
            return ExitCode::from(EXIT_IO);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => ExitCode::from(report_error(&e)),
    }
}

fn report_error(e: &anyhow::Error) -> u8 {
    let report = failure::classify(e);
    eprintln!("{}", json::to_string(&report));
    report.exit_code
}

fn run(cli: Cli) -> Result<u8> {
    let tol = cli.tol.tolerances();
    match cli.command {
        Command::Validate { model } => validate(&model),
        Command::Mrmt { model, output } => {
            let m = load(&model)?;
            let eq = to_mrmt_with(&m.system, &tol)?;
            emit_json(output.as_deref(), &with_normalization(eq, &m))?;
            Ok(EXIT_OK)
        }
        Command::Minc { model, output } => {
            let m = load(&model)?;
            let eq = to_minc_with(&m.system, &tol)?;
            emit_json(output.as_deref(), &with_normalization(eq, &m))?;
            Ok(EXIT_OK)
        }
        Command::Reduce(args) => reduce(args, &tol),
        Command::Compare { a, b, tol: eq_tol } => {
            let (ma, mb) = (load(&a)?, load(&b)?);
            let report = verify_equivalence_with(&ma.system, &mb.system, eq_tol, &tol);
            emit_json(None, &report)?;
            Ok(if report.equivalent {
                EXIT_OK
            } else {
                EXIT_NOT_EQUIVALENT
            })
        }
        Command::Tf { model, output } => {
            let m = load(&model)?;
            emit_json(output.as_deref(), &transfer_function_with(&m.system, tol.gcd_tol))?;
            Ok(EXIT_OK)
        }
        Command::Nyquist {
            model,
            omega_min,
            omega_max,
            points,
            output,
        } => {
            if !(omega_min > 0.0 && omega_max > omega_min && points >= 1) {
                return Err(usage("need 0 < omega-min < omega-max and points >= 1"));
            }
            let m = load(&model)?;
            let tf = transfer_function_with(&m.system, tol.gcd_tol);
            let omegas = log_grid(omega_min, omega_max, points);
            let response = frequency_response(&tf, &omegas)?;
            let mut w = sink(output.as_deref())?;
            writeln!(w, "omega,re,im")?;
            for (o, t) in omegas.iter().zip(&response) {
                writeln!(w, "{o:.16e},{:.16e},{:.16e}", t.re, t.im)?;
            }
            w.flush()?;
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => simulate_cmd(args),
    }
}

fn validate(path: &Path) -> Result<u8> {
    let value = load::read_json(path)?;
    let report = match load::classify(path, value)? {
        Kind::Spec(file) => {
            let n = file.volumes.len();
            match file.into_spec().and_then(|(spec, _)| build_state_space(&spec)) {
                Ok(built) => check_assumptions(built.state_space.a()),
                Err(porous_equiv::NetworkError::Parse(msg)) => {
                    return Err(porous_equiv::NetworkError::Parse(msg).into())
                }
                Err(e) => ValidationReport::rejected(n, "specification", e.to_string()),
            }
        }
        Kind::Realization(eq) => check_assumptions(eq.system.a()),
        Kind::System(ss) => check_assumptions(ss.a()),
    };
    emit_json(None, &report)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_ASSUMPTIONS })
}

fn with_normalization(mut eq: EquivalentRealization, m: &Model) -> EquivalentRealization {
    if eq.normalization.is_none() {
        eq.normalization = m.normalization.clone();
    }
    eq
}

#[derive(Serialize)]
struct Reduced<'a, R: Serialize> {
    realization: &'a EquivalentRealization,
    report: R,
}

fn reduce(args: ReduceArgs, tol: &Tolerances) -> Result<u8> {
    let m = load(&args.model)?;
    match args.mode {
        ReduceMode::Minimal => {
            let eq = with_normalization(minimal_mrmt_with(&m.system, tol)?, &m);
            let report =
                verify_equivalence_with(&m.system, &eq.system, DEFAULT_EQUIVALENCE_TOL, tol);
            emit_json(
                args.output.as_deref(),
                &Reduced {
                    realization: &eq,
                    report,
                },
            )?;
        }
        ReduceMode::Truncate => {
            let criterion = match (args.volume_floor, args.rate_floor, args.keep) {
                (Some(f), None, None) => Criterion::VolumeFloor(f),
                (None, Some(f), None) => Criterion::RateFloor(f),
                (None, None, Some(k)) => Criterion::KeepK(k),
                _ => {
                    return Err(usage(
                        "truncation needs one of --volume-floor, --rate-floor or --keep",
                    ))
                }
            };
            let source = match (&m.realization, args.form) {
                (Some(eq), _) => eq.clone(),
                (_, Form::Mrmt) => to_mrmt_with(&m.system, tol)?,
                (_, Form::Minc) => to_minc_with(&m.system, tol)?,
            };
            let (small, report) = truncate(&source, criterion, args.allow_mobile_only)?;
            let small = with_normalization(small, &m);
            emit_json(
                args.output.as_deref(),
                &Reduced {
                    realization: &small,
                    report,
                },
            )?;
        }
    }
    Ok(EXIT_OK)
}

fn simulate_cmd(args: SimulateArgs) -> Result<u8> {
    if !(args.amplitude >= 0.0) {
        return Err(usage("amplitude must be nonnegative"));
    }
    let input = match (args.input, args.duration) {
        (InputKind::Step, _) => InputSignal::Constant(args.amplitude),
        (InputKind::Pulse, Some(d)) if d > 0.0 => InputSignal::Pulse {
            amplitude: args.amplitude,
            duration: d,
        },
        (InputKind::Pulse, _) => return Err(usage("pulse input needs --duration > 0")),
    };
    if args.points < 2 {
        return Err(usage("need at least 2 points"));
    }
    let m = load(&args.model)?;
    let t_end = match args.t_end {
        Some(t) if t > 0.0 => t,
        Some(_) => return Err(usage("t-end must be positive")),
        None => default_horizon(&m.system)?.1,
    };
    let grid = uniform_grid(t_end, args.points);
    let traj = simulate(&m.system, &input, &vec![0.0; m.system.n()], &grid)?;
    let mut w = sink(args.output.as_deref())?;
    traj.write_csv(&mut w, args.states)?;
    w.flush()?;
    Ok(EXIT_OK)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    writeln!(w, "{}", json::to_string(value))?;
    w.flush()?;
    Ok(())
}
