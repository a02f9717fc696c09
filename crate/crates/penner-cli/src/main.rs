//! Command-line front end: solve one configuration, run mass or charge
//! flows, sweep phase diagrams, sample densities, run the discrete
//! oracle, and locate the critical coupling. Tables go out as CSV, events
//! and manifests as JSON; reruns with identical flags produce identical
//! bytes.

use clap::{Args, Parser, Subcommand};
use penner::flow::{evolve_t, evolve_v, FlowOptions, Trajectory};
use penner::quad::{mass_integral, w_spread_on_support};
use penner::{
    classify_region, find_vc, minimize_energy, phase_grid, rescale, solve_at, BPair, FieldParams,
    QuadSpec, SupportConfig,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "penner",
    version,
    about = "Equilibrium measures on [0, +inf) in the field x^2/2 + beta*x + gamma*log(x+v)",
    after_help = "Range flags use lo:hi:n with inclusive endpoints and n grid values.\n\
                  Exit codes: 0 success, 1 usage error, 2 no valid configuration, 3 file I/O error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Quadrature tolerance override.
    #[arg(long, default_value_t = 1e-11)]
    quad_tol: f64,
    /// Predictor-step error target for the flows.
    #[arg(long, default_value_t = 1e-8)]
    ode_tol: f64,
}

impl CommonOpts {
    fn quad(&self) -> QuadSpec {
        QuadSpec { tol: self.quad_tol, ..QuadSpec::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the equilibrium configuration at fixed parameters.
    Solve {
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        /// Charge position of the half-line field (default 1).
        #[arg(long)]
        v: Option<f64>,
        /// Real-line quartic coefficient b (with --c, --v, --t-real).
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        /// Real-line charge strength c.
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
        /// Real-line total mass.
        #[arg(long)]
        t_real: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evolve in the total mass and emit the trajectory and its events.
    Flow {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, default_value_t = 0.01)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 128)]
        points: usize,
        /// Output path prefix.
        #[arg(long, default_value = "flow")]
        out: String,
        /// Trajectory table format.
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evolve downward in the charge position at fixed mass.
    Vflow {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        v_start: f64,
        #[arg(long, default_value_t = 1e-6)]
        v_end: f64,
        #[arg(long, default_value_t = 128)]
        points: usize,
        #[arg(long, default_value = "vflow")]
        out: String,
        /// Trajectory table format.
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sweep the (beta, gamma) plane and emit phase cells and boundaries.
    Phasemap {
        /// Beta range as lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        beta: String,
        /// Gamma range as lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        gamma: String,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "phasemap")]
        out: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sample the equilibrium density on a grid.
    Density {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long, default_value_t = 512)]
        points: usize,
        /// Emit the symmetric real-line density instead.
        #[arg(long)]
        realline: bool,
        #[arg(long, default_value = "density")]
        out: String,
        /// Table format.
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Minimize the discrete weighted energy and compare distributions.
    Fekete {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "fekete")]
        out: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Critical coupling of the symmetric quartic-log model.
    Vc {
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    NoValidScenario(String),
    Io(String),
    Numeric(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::NoValidScenario(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numeric(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::NoValidScenario(m) | Failure::Io(m) | Failure::Numeric(m) => m,
        }
    }
}

fn io_err(path: &Path, err: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {err}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version output are not failures.
            use clap::error::ErrorKind;
            let kind = err.kind();
            let _ = err.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}

// 17 significant digits, locale-free.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    parameters: serde_json::Value,
    wall_time_seconds: f64,
    outputs: Vec<String>,
}

fn write_manifest(
    prefix: &str,
    command: &str,
    parameters: serde_json::Value,
    started: Instant,
    outputs: &[PathBuf],
) -> Result<(), Failure> {
    let manifest = Manifest {
        command: command.to_string(),
        version: VERSION.to_string(),
        parameters,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = PathBuf::from(format!("{prefix}.manifest.json"));
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Failure::Io(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

/// The fixed trajectory-row layout:
/// `param,scenario,a1,b1_re,b1_im,b2_re,b2_im,a2,a3,mass_check`.
fn config_row(param: f64, cfg: &SupportConfig, p: &FieldParams, spec: &QuadSpec) -> String {
    let mass_err = mass_integral(cfg, p, spec).map(|m| (m - p.t).abs()).unwrap_or(f64::NAN);
    let mut cols: Vec<String> = vec![fmt(param), cfg.scenario().as_str().to_string()];
    let (a1, b1_re, b1_im, b2_re, b2_im, a2, a3);
    match *cfg {
        SupportConfig::OneCutHard { a1: a, b } => {
            a1 = Some(a);
            a2 = None;
            a3 = None;
            match b {
                BPair::Real { b1, b2 } => {
                    b1_re = Some(b1);
                    b1_im = Some(0.0);
                    b2_re = Some(b2);
                    b2_im = Some(0.0);
                }
                BPair::Conj { re, im } => {
                    b1_re = Some(re);
                    b1_im = Some(im);
                    b2_re = Some(re);
                    b2_im = Some(-im);
                }
            }
        }
        SupportConfig::OneCutSoft { b1, a2: x2, a3: x3 } => {
            a1 = None;
            b1_re = Some(b1);
            b1_im = Some(0.0);
            b2_re = None;
            b2_im = None;
            a2 = Some(x2);
            a3 = Some(x3);
        }
        SupportConfig::TwoCut { a1: a, b1, a2: x2, a3: x3 } => {
            a1 = Some(a);
            b1_re = Some(b1);
            b1_im = Some(0.0);
            b2_re = None;
            b2_im = None;
            a2 = Some(x2);
            a3 = Some(x3);
        }
    }
    for value in [a1, b1_re, b1_im, b2_re, b2_im, a2, a3] {
        cols.push(value.map(fmt).unwrap_or_default());
    }
    cols.push(fmt(mass_err));
    cols.join(",")
}

fn trajectory_csv(traj: &Trajectory, p0: &FieldParams, spec: &QuadSpec) -> String {
    let mut out = String::from("param,scenario,a1,b1_re,b1_im,b2_re,b2_im,a2,a3,mass_check\n");
    for (param, cfg) in &traj.samples {
        let p = match traj.parameter {
            penner::FlowParameter::Mass => p0.with_mass(*param),
            penner::FlowParameter::ChargePosition => p0.with_pole(*param),
        };
        let _ = writeln!(out, "{}", config_row(*param, cfg, &p, spec));
    }
    out
}

#[derive(Serialize)]
struct EventOut {
    kind: String,
    time: f64,
    location: f64,
    pre_scenario: String,
    post_scenario: String,
}

fn events_json(traj: &Trajectory) -> Result<String, Failure> {
    let events: Vec<EventOut> = traj
        .events
        .iter()
        .map(|e| EventOut {
            kind: e.kind.as_str().to_string(),
            time: e.time,
            location: e.location,
            pre_scenario: e.pre_scenario.as_str().to_string(),
            post_scenario: e.post_scenario.as_str().to_string(),
        })
        .collect();
    serde_json::to_string_pretty(&events)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Io(format!("event serialization: {e}")))
}

fn parse_range(text: &str, what: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::Usage(format!("{what}: expected lo:hi:n, got `{text}`")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Failure::Usage(format!("{what}: bad low bound `{}`", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Failure::Usage(format!("{what}: bad high bound `{}`", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Failure::Usage(format!("{what}: bad count `{}`", parts[2])))?;
    if n < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Failure::Usage(format!("{what}: need finite lo < hi and n >= 2")));
    }
    Ok((lo, hi, n))
}

fn field_params(beta: f64, gamma: f64, t: f64, v: Option<f64>) -> Result<FieldParams, Failure> {
    let p = match v {
        Some(v) => FieldParams::with_charge_at(beta, gamma, t, v),
        None => FieldParams::new(beta, gamma, t),
    };
    p.map_err(|e| Failure::Usage(e.to_string()))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve { beta, gamma, t, v, b, c, t_real, common } => {
            cmd_solve(beta, gamma, t, v, b, c, t_real, &common)
        }
        Command::Flow { beta, gamma, t_min, t_max, points, out, format, common } => {
            let p = field_params(beta, gamma, t_max.max(1.0), None)?;
            let started = Instant::now();
            let opts =
                FlowOptions { ode_tol: common.ode_tol, output_points: points, ..Default::default() };
            let spec = common.quad();
            let traj = evolve_t(&p, t_min, t_max, &opts, &spec)
                .map_err(|e| Failure::Numeric(e.to_string()))?;
            emit_trajectory(&out, "flow", &traj, &p, &spec, format, started, serde_json::json!({
                "beta": beta, "gamma": gamma, "t_min": t_min, "t_max": t_max,
                "points": points, "quad_tol": common.quad_tol, "ode_tol": common.ode_tol,
            }))
        }
        Command::Vflow { beta, gamma, t, v_start, v_end, points, out, format, common } => {
            let p = field_params(beta, gamma, t, None)?;
            let started = Instant::now();
            let opts =
                FlowOptions { ode_tol: common.ode_tol, output_points: points, ..Default::default() };
            let spec = common.quad();
            let traj = evolve_v(&p, v_start, v_end, &opts, &spec)
                .map_err(|e| Failure::Numeric(e.to_string()))?;
            emit_trajectory(&out, "vflow", &traj, &p, &spec, format, started, serde_json::json!({
                "beta": beta, "gamma": gamma, "t": t, "v_start": v_start, "v_end": v_end,
                "points": points, "quad_tol": common.quad_tol, "ode_tol": common.ode_tol,
            }))
        }
        Command::Phasemap { beta, gamma, jobs, out, common } => {
            cmd_phasemap(&beta, &gamma, jobs, &out, &common)
        }
        Command::Density { beta, gamma, t, v, points, realline, out, format, common } => {
            cmd_density(beta, gamma, t, v, points, realline, &out, format, &common)
        }
        Command::Fekete { beta, gamma, t, n, seed, out, common } => {
            cmd_fekete(beta, gamma, t, n, seed, &out, &common)
        }
        Command::Vc { common } => {
            let vc =
                find_vc(&common.quad()).map_err(|e| Failure::Numeric(e.to_string()))?;
            println!("{}", fmt(vc));
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveOut {
    scenario: String,
    beta: f64,
    gamma: f64,
    t: f64,
    v: f64,
    region: String,
    a1: Option<f64>,
    b1_re: Option<f64>,
    b1_im: Option<f64>,
    b2_re: Option<f64>,
    b2_im: Option<f64>,
    a2: Option<f64>,
    a3: Option<f64>,
    residual_norm: f64,
    mass_check: f64,
    w_spread: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    beta: Option<f64>,
    gamma: Option<f64>,
    t: Option<f64>,
    v: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    t_real: Option<f64>,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let p = match (b, c, t_real) {
        (Some(b), Some(c), Some(t_real)) => {
            let v = v.ok_or_else(|| {
                Failure::Usage("the real-line form needs --b --c --v --t-real".into())
            })?;
            rescale(b, c, v, t_real).map_err(|e| Failure::Usage(e.to_string()))?
        }
        (None, None, None) => {
            let (beta, gamma, t) = match (beta, gamma, t) {
                (Some(b), Some(g), Some(t)) => (b, g, t),
                _ => return Err(Failure::Usage("need --beta --gamma --t (or --b --c --v --t-real)".into())),
            };
            field_params(beta, gamma, t, v)?
        }
        _ => return Err(Failure::Usage("mixing --beta/--gamma/--t with --b/--c/--t-real".into())),
    };
    let spec = common.quad();
    let rep = solve_at(&p, None, &spec).map_err(|e| match e {
        penner::SolveError::NoValidScenario { .. } => Failure::NoValidScenario(e.to_string()),
        other => Failure::Numeric(other.to_string()),
    })?;
    let mass_check =
        mass_integral(&rep.config, &p, &spec).map(|m| (m - p.t).abs()).unwrap_or(f64::NAN);
    let w_spread = w_spread_on_support(&rep.config, &p, 32, &spec).unwrap_or(f64::NAN);
    let (pu, _) = p.to_unit_pole();
    let mut out = SolveOut {
        scenario: rep.scenario().as_str().to_string(),
        beta: p.beta,
        gamma: p.gamma,
        t: p.t,
        v: p.pole(),
        region: classify_region(pu.beta, pu.gamma).as_str().to_string(),
        a1: None,
        b1_re: None,
        b1_im: None,
        b2_re: None,
        b2_im: None,
        a2: None,
        a3: None,
        residual_norm: rep.residual_norm,
        mass_check,
        w_spread,
    };
    match rep.config {
        SupportConfig::OneCutHard { a1, b } => {
            out.a1 = Some(a1);
            match b {
                BPair::Real { b1, b2 } => {
                    out.b1_re = Some(b1);
                    out.b1_im = Some(0.0);
                    out.b2_re = Some(b2);
                    out.b2_im = Some(0.0);
                }
                BPair::Conj { re, im } => {
                    out.b1_re = Some(re);
                    out.b1_im = Some(im);
                    out.b2_re = Some(re);
                    out.b2_im = Some(-im);
                }
            }
        }
        SupportConfig::OneCutSoft { b1, a2, a3 } => {
            out.b1_re = Some(b1);
            out.b1_im = Some(0.0);
            out.a2 = Some(a2);
            out.a3 = Some(a3);
        }
        SupportConfig::TwoCut { a1, b1, a2, a3 } => {
            out.a1 = Some(a1);
            out.b1_re = Some(b1);
            out.b1_im = Some(0.0);
            out.a2 = Some(a2);
            out.a3 = Some(a3);
        }
    }
    let text = serde_json::to_string_pretty(&out)
        .map_err(|e| Failure::Io(format!("serialization: {e}")))?;
    println!("{text}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn emit_trajectory(
    prefix: &str,
    command: &str,
    traj: &Trajectory,
    p0: &FieldParams,
    spec: &QuadSpec,
    format: OutputFormat,
    started: Instant,
    parameters: serde_json::Value,
) -> Result<(), Failure> {
    let table_path = match format {
        OutputFormat::Csv => {
            let path = PathBuf::from(format!("{prefix}.csv"));
            std::fs::write(&path, trajectory_csv(traj, p0, spec)).map_err(|e| io_err(&path, e))?;
            path
        }
        OutputFormat::Json => {
            let path = PathBuf::from(format!("{prefix}.json"));
            std::fs::write(&path, trajectory_json(traj, p0, spec)?).map_err(|e| io_err(&path, e))?;
            path
        }
    };
    let events_path = PathBuf::from(format!("{prefix}_events.json"));
    std::fs::write(&events_path, events_json(traj)?).map_err(|e| io_err(&events_path, e))?;
    write_manifest(prefix, command, parameters, started, &[table_path, events_path])
}

#[derive(Serialize)]
struct SampleOut {
    param: f64,
    scenario: String,
    a1: Option<f64>,
    b1_re: Option<f64>,
    b1_im: Option<f64>,
    b2_re: Option<f64>,
    b2_im: Option<f64>,
    a2: Option<f64>,
    a3: Option<f64>,
    mass_check: f64,
}

fn trajectory_json(
    traj: &Trajectory,
    p0: &FieldParams,
    spec: &QuadSpec,
) -> Result<String, Failure> {
    let rows: Vec<SampleOut> = traj
        .samples
        .iter()
        .map(|(param, cfg)| {
            let p = match traj.parameter {
                penner::FlowParameter::Mass => p0.with_mass(*param),
                penner::FlowParameter::ChargePosition => p0.with_pole(*param),
            };
            let mass_check =
                mass_integral(cfg, &p, spec).map(|m| (m - p.t).abs()).unwrap_or(f64::NAN);
            let mut row = SampleOut {
                param: *param,
                scenario: cfg.scenario().as_str().to_string(),
                a1: None,
                b1_re: None,
                b1_im: None,
                b2_re: None,
                b2_im: None,
                a2: None,
                a3: None,
                mass_check,
            };
            match *cfg {
                SupportConfig::OneCutHard { a1, b } => {
                    row.a1 = Some(a1);
                    match b {
                        BPair::Real { b1, b2 } => {
                            row.b1_re = Some(b1);
                            row.b1_im = Some(0.0);
                            row.b2_re = Some(b2);
                            row.b2_im = Some(0.0);
                        }
                        BPair::Conj { re, im } => {
                            row.b1_re = Some(re);
                            row.b1_im = Some(im);
                            row.b2_re = Some(re);
                            row.b2_im = Some(-im);
                        }
                    }
                }
                SupportConfig::OneCutSoft { b1, a2, a3 } => {
                    row.b1_re = Some(b1);
                    row.b1_im = Some(0.0);
                    row.a2 = Some(a2);
                    row.a3 = Some(a3);
                }
                SupportConfig::TwoCut { a1, b1, a2, a3 } => {
                    row.a1 = Some(a1);
                    row.b1_re = Some(b1);
                    row.b1_im = Some(0.0);
                    row.a2 = Some(a2);
                    row.a3 = Some(a3);
                }
            }
            row
        })
        .collect();
    serde_json::to_string_pretty(&rows)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Io(format!("trajectory serialization: {e}")))
}

fn cmd_phasemap(
    beta: &str,
    gamma: &str,
    jobs: Option<usize>,
    prefix: &str,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let started = Instant::now();
    let (blo, bhi, nb) = parse_range(beta, "--beta")?;
    let (glo, ghi, ng) = parse_range(gamma, "--gamma")?;
    let jobs = jobs.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let spec = common.quad();
    let cells = phase_grid((blo, bhi), (glo, ghi), nb, ng, jobs, &spec);

    let mut csv = String::from("beta,gamma,region,sequence,events\n");
    for cell in &cells {
        let seq = cell.sequence.iter().map(u8::to_string).collect::<Vec<_>>().join("-");
        let events = match &cell.error {
            Some(err) => format!("error: {err}"),
            None => cell
                .times
                .iter()
                .map(|(k, t)| format!("{}@{}", k.as_str(), fmt(*t)))
                .collect::<Vec<_>>()
                .join(";"),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{seq},\"{events}\"",
            fmt(cell.beta),
            fmt(cell.gamma),
            cell.region.as_str()
        );
    }
    let cells_path = PathBuf::from(format!("{prefix}_cells.csv"));
    std::fs::write(&cells_path, csv).map_err(|e| io_err(&cells_path, e))?;

    let mut bcsv = String::from("curve,beta,gamma\n");
    for curve in penner::boundary_curves(blo, bhi, 512) {
        for (b, g) in curve.points {
            let _ = writeln!(bcsv, "{},{},{}", curve.name, fmt(b), fmt(g));
        }
    }
    let bounds_path = PathBuf::from(format!("{prefix}_boundaries.csv"));
    std::fs::write(&bounds_path, bcsv).map_err(|e| io_err(&bounds_path, e))?;

    write_manifest(
        prefix,
        "phasemap",
        serde_json::json!({
            "beta": beta, "gamma": gamma, "jobs": jobs, "quad_tol": common.quad_tol,
        }),
        started,
        &[cells_path, bounds_path],
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_density(
    beta: f64,
    gamma: f64,
    t: f64,
    v: Option<f64>,
    points: usize,
    realline: bool,
    prefix: &str,
    format: OutputFormat,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let started = Instant::now();
    let p = field_params(beta, gamma, t, v)?;
    let spec = common.quad();
    let rep = solve_at(&p, None, &spec).map_err(|e| match e {
        penner::SolveError::NoValidScenario { .. } => Failure::NoValidScenario(e.to_string()),
        other => Failure::Numeric(other.to_string()),
    })?;
    let cfg = rep.config;
    let hi = cfg.rightmost() * 1.05;
    let mut csv = String::from(if realline { "y,density\n" } else { "x,density\n" });
    let n = points.max(2);
    if realline {
        let edge = hi.sqrt();
        for i in 0..n {
            let y = -edge + 2.0 * edge * i as f64 / (n - 1) as f64;
            let _ = writeln!(csv, "{},{}", fmt(y), fmt(penner::realline_density(&cfg, &p, y)));
        }
    } else {
        for i in 0..n {
            let x = hi * i as f64 / (n - 1) as f64;
            let _ = writeln!(csv, "{},{}", fmt(x), fmt(penner::density(&cfg, &p, x)));
        }
    }
    let path = match format {
        OutputFormat::Csv => {
            let path = PathBuf::from(format!("{prefix}.csv"));
            std::fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
            path
        }
        OutputFormat::Json => {
            let key = if realline { "y" } else { "x" };
            let rows: Vec<serde_json::Value> = csv
                .lines()
                .skip(1)
                .map(|line| {
                    let mut it = line.split(',');
                    let x: f64 = it.next().unwrap_or("nan").parse().unwrap_or(f64::NAN);
                    let d: f64 = it.next().unwrap_or("nan").parse().unwrap_or(f64::NAN);
                    serde_json::json!({ key: x, "density": d })
                })
                .collect();
            let path = PathBuf::from(format!("{prefix}.json"));
            let text = serde_json::to_string_pretty(&rows)
                .map_err(|e| Failure::Io(format!("serialization: {e}")))?;
            std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
            path
        }
    };
    write_manifest(
        prefix,
        "density",
        serde_json::json!({
            "beta": beta, "gamma": gamma, "t": t, "v": p.pole(),
            "points": points, "realline": realline, "quad_tol": common.quad_tol,
        }),
        started,
        &[path],
    )
}

#[derive(Serialize)]
struct FeketeSummary {
    n: usize,
    seed: u64,
    energy: f64,
    sweeps: usize,
    ks_distance: Option<f64>,
    min_particle: f64,
    max_particle: f64,
}

fn cmd_fekete(
    beta: f64,
    gamma: f64,
    t: f64,
    n: usize,
    seed: u64,
    prefix: &str,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let started = Instant::now();
    let p = field_params(beta, gamma, t, None)?;
    let spec = common.quad();
    let out =
        minimize_energy(n, &p, seed, &spec).map_err(|e| Failure::Numeric(e.to_string()))?;
    let ks = solve_at(&p, None, &spec)
        .ok()
        .and_then(|rep| penner::ks_distance(&out.points, &rep.config, &p, &spec).ok());

    let mut csv = String::from("index,position\n");
    for (i, z) in out.points.iter().enumerate() {
        let _ = writeln!(csv, "{i},{}", fmt(*z));
    }
    let points_path = PathBuf::from(format!("{prefix}_points.csv"));
    std::fs::write(&points_path, csv).map_err(|e| io_err(&points_path, e))?;

    let summary = FeketeSummary {
        n,
        seed,
        energy: out.energy,
        sweeps: out.sweeps,
        ks_distance: ks,
        min_particle: out.points[0],
        max_particle: *out.points.last().unwrap(),
    };
    let summary_path = PathBuf::from(format!("{prefix}_summary.json"));
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Failure::Io(format!("serialization: {e}")))?;
    std::fs::write(&summary_path, text + "\n").map_err(|e| io_err(&summary_path, e))?;

    write_manifest(
        prefix,
        "fekete",
        serde_json::json!({
            "beta": beta, "gamma": gamma, "t": t, "n": n, "seed": seed,
            "quad_tol": common.quad_tol,
        }),
        started,
        &[points_path, summary_path],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parser_accepts_grid_syntax() {
        assert_eq!(parse_range("-6:2:9", "x").unwrap(), (-6.0, 2.0, 9));
        assert!(parse_range("2:-6:9", "x").is_err());
        assert!(parse_range("1:2", "x").is_err());
        assert!(parse_range("a:2:3", "x").is_err());
    }

    #[test]
    fn seventeen_digit_format() {
        assert_eq!(fmt(2.5), "2.5000000000000000e0");
        assert_eq!(fmt(-1.0 / 3.0), "-3.3333333333333331e-1");
    }
}
