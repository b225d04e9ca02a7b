use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use stabsens::bench::{run_bench, write_csv, BenchConfig};
use stabsens::fdbase::{fd_sens_entry, fd_sens_matrix, fd_sens_param, FDConfig};
use stabsens::io::{parse_entry, parse_model, parse_state, parse_system, parse_vector};
use stabsens::sdpcore::{
    build_sdp, check_constraint, solve_sdp_with, SolveOptions, StabilityCertificate, DEFAULT_EPS, DEFAULT_TOL,
};
use stabsens::senscore::{sens_entry, sens_matrix, sens_params_at, SensitivityJson, SensitivityReport};
use stabsens::sysmodel::{simulate_decay, solve_lyapunov, ParametricJacobian, DEFAULT_DT, DEFAULT_XI};
use stabsens::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "stabsens",
    version,
    about = "Lyapunov-SDP stability index and its sensitivities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the stability SDP and print the certificate.
    Index {
        #[arg(long)]
        system: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classical Lyapunov-equation stability test.
    Lyap {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = DEFAULT_XI, allow_negative_numbers = true)]
        xi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity of the index to Jacobian entries or model parameters.
    Sens(SensArgs),
    /// Integrate the system and check the certified decay bound.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        /// JSON array with the initial state.
        #[arg(long)]
        x0: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo comparison of analytic and forward-difference sensitivities.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "1e-1,1e-2,1e-3")]
        fd_steps: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta_bar: f64,
        /// Keep scenarios with an ill-conditioned KKT system in the accuracy figures.
        #[arg(long)]
        include_degenerate: bool,
        /// Evaluate scenarios in parallel (timings are then not comparable).
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also write per-scenario records as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the stability constraint η < η̄.
    Check {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        eta_bar: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct SolverArgs {
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Analytic,
    /// Forward differences.
    Fd,
    /// Central differences.
    Central,
}

#[derive(Args, Debug)]
struct SensArgs {
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    system: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Parameter vector, comma separated; defaults to the midpoint of each range.
    #[arg(long, requires = "model", allow_hyphen_values = true)]
    at: Option<String>,
    #[arg(long, value_enum, default_value_t = Method::Analytic)]
    method: Method,
    #[arg(long, default_value_t = 1e-3)]
    fd_step: f64,
    /// A single 0-based Jacobian entry `i,j`.
    #[arg(long)]
    entry: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn solve(j: &DMatrix<f64>, solver: SolverArgs, opts: SolveOptions) -> Result<StabilityCertificate> {
    solve_sdp_with(
        &build_sdp(j, solver.eps)?,
        &SolveOptions {
            tol: solver.tol,
            ..opts
        },
    )
}

fn load_model(path: &Path, at: Option<&str>) -> Result<ParametricJacobian> {
    let mut pj = parse_model(&read(path)?)?;
    if let Some(at) = at {
        pj.set_current(&parse_vector(at)?)?;
    }
    Ok(pj)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index { system, solver, out } => {
            let j = parse_system(&read(&system)?)?.jacobian()?;
            let cert = solve(&j, solver, SolveOptions::default())?;
            emit(&serde_json::to_value(cert.to_json())?, out.as_deref())
        }
        Command::Lyap { system, xi, out } => {
            let j = parse_system(&read(&system)?)?.jacobian()?;
            let sol = solve_lyapunov(&j, xi)?;
            emit(
                &json!({
                    "phi": sol.phi.to_rows(),
                    "positive_definite": sol.positive_definite,
                    "xi": xi,
                }),
                out.as_deref(),
            )
        }
        Command::Sens(args) => sens(args),
        Command::Simulate {
            system,
            x0,
            t_end,
            dt,
            solver,
            out,
        } => {
            let j = parse_system(&read(&system)?)?.jacobian()?;
            let x0 = parse_state(&read(&x0)?)?;
            let cert = solve(&j, solver, SolveOptions::default())?;
            check_constraint(&cert, f64::INFINITY)?;
            let traj = simulate_decay(&j, &cert.phi, cert.eta, &x0, t_end, dt)?;
            emit(
                &json!({
                    "eta": cert.eta,
                    "times": traj.times,
                    "lyapunov_values": traj.lyapunov_values,
                    "states": traj.states,
                    "violations": traj.violations,
                    "bound_holds": traj.bound_holds(),
                }),
                out.as_deref(),
            )
        }
        Command::Bench {
            model,
            scenarios,
            seed,
            fd_steps,
            eta_bar,
            include_degenerate,
            parallel,
            solver,
            csv,
            out,
        } => {
            let pj = parse_model(&read(&model)?)?;
            let cfg = BenchConfig {
                scenarios,
                seed,
                fd_steps: parse_vector(&fd_steps)?,
                eps: solver.eps,
                tol: solver.tol,
                eta_bar,
                exclude_degenerate: !include_degenerate,
                parallel,
            };
            let report = run_bench(&pj, &cfg)?;
            if let Some(path) = csv {
                write_csv(&report, &path)?;
            }
            emit(&serde_json::to_value(&report)?, out.as_deref())
        }
        Command::Check {
            system,
            eta_bar,
            solver,
            out,
        } => {
            let j = parse_system(&read(&system)?)?.jacobian()?;
            let cert = solve(&j, solver, SolveOptions::default())?;
            let satisfied = check_constraint(&cert, eta_bar)?;
            emit(
                &json!({ "eta": cert.eta, "eta_bar": eta_bar, "satisfied": satisfied }),
                out.as_deref(),
            )
        }
    }
}

fn fd_config(method: Method, step: f64) -> FDConfig {
    match method {
        Method::Central => FDConfig::central(step),
        _ => FDConfig::forward(step),
    }
}

fn sens(args: SensArgs) -> Result<()> {
    let entry = args.entry.as_deref().map(parse_entry).transpose()?;
    let pj = match &args.model {
        Some(path) => Some(load_model(path, args.at.as_deref())?),
        None => None,
    };
    let j = match (&pj, &args.system) {
        (Some(pj), _) => pj.jacobian_at(pj.current())?,
        (None, Some(path)) => parse_system(&read(path)?)?.jacobian()?,
        (None, None) => unreachable!("clap requires --system or --model"),
    };
    let s = args.solver;
    let out = args.out.as_deref();

    if let Some((row, col)) = entry {
        let value = if args.method == Method::Analytic {
            let cert = solve(&j, s, SolveOptions::refined(s.tol))?;
            let e = sens_entry(&cert, &j, row, col)?;
            json!({ "value": e.value, "degenerate": e.degenerate, "cond_estimate": finite(e.cond_estimate) })
        } else {
            let est = fd_sens_entry(&j, row, col, &fd_config(args.method, args.fd_step), s.eps, s.tol)?;
            json!({ "value": est.value, "solves": est.solves })
        };
        let mut v = value;
        v["method"] = json!(method_tag(args.method));
        v["entry"] = json!([row, col]);
        return emit(&v, out);
    }

    let report: SensitivityReport = match (args.method, &pj) {
        (Method::Analytic, Some(pj)) => {
            let cert = solve(&j, s, SolveOptions::refined(s.tol))?;
            sens_params_at(&cert, pj, pj.current())?
        }
        (Method::Analytic, None) => {
            let cert = solve(&j, s, SolveOptions::refined(s.tol))?;
            sens_matrix(&cert, &j)?
        }
        (m, Some(pj)) => {
            let start = std::time::Instant::now();
            let cfg = fd_config(m, args.fd_step);
            let values = (0..pj.n_params())
                .map(|k| fd_sens_param(pj, pj.current(), k, &cfg, s.eps, s.tol).map(|e| e.value))
                .collect::<Result<Vec<_>>>()?;
            SensitivityReport {
                method: cfg.method(),
                d_eta_d_j: None,
                d_eta_d_params: Some(pj.names().into_iter().zip(values).collect()),
                degenerate: false,
                cond_estimate: None,
                elapsed: start.elapsed().as_secs_f64(),
            }
        }
        (m, None) => fd_sens_matrix(&j, &fd_config(m, args.fd_step), s.eps, s.tol)?,
    };
    let json: SensitivityJson = report.to_json();
    emit(&serde_json::to_value(json)?, out)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn method_tag(m: Method) -> &'static str {
    match m {
        Method::Analytic => "analytic",
        Method::Fd => "forward_fd",
        Method::Central => "central_fd",
    }
}

fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}
