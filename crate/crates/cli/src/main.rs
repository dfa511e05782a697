//! `gronwall`: certify separation bounds, flow points, compute distances
//! and reproduce the reference configurations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod presets;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gronwall_core::io::{fmt_g17, write_segment_csv, write_trajectory_csv};
use gronwall_core::{
    catalog, certify_pair, distance, flow_point, uniform_times, CertificateDocument, CertifyConfig, ChartPoint, Error,
    Manifold, SamplerConfig, SeedSet, Strategy,
};

const EXIT_ERROR: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Parser)]
#[command(name = "gronwall", version, about = "Gronwall separation bounds for flows on Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate C_T and check d(p(t), q(t)) <= d(p0, q0) e^{C_T t}.
    Certify(CertifyArgs),
    /// Flow a single point and write the trajectory as CSV.
    Flow(FlowArgs),
    /// Riemannian distance between two points.
    Distance(DistanceArgs),
    /// Run a reference configuration and write its artifacts.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct Tolerances {
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    /// JSON file with certification settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Global,
    Submanifold,
    GeodesicTube,
    CurveTube,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    manifold: String,
    /// Catalog field name or inline components, e.g. "0, exp(1 - 1/x^2)".
    #[arg(long, allow_hyphen_values = true)]
    field: String,
    #[arg(long, allow_hyphen_values = true)]
    p0: String,
    #[arg(long, allow_hyphen_values = true)]
    q0: String,
    #[arg(long = "T")]
    t_end: f64,
    #[arg(long, value_enum, default_value = "geodesic-tube")]
    strategy: StrategyArg,
    /// Sampling box for the global strategy: lo1,hi1,lo2,hi2,...
    #[arg(long = "box", allow_hyphen_values = true)]
    sampling_box: Option<String>,
    /// Points of N (submanifold) or of the curve (curve-tube): "x,y;x,y;..."
    #[arg(long, allow_hyphen_values = true)]
    seeds: Option<String>,
    /// Treat the seeds of the submanifold strategy as a point cloud.
    #[arg(long)]
    cloud: bool,
    /// Number of comparison times in [0, T].
    #[arg(long)]
    samples: Option<usize>,
    /// Estimate on the partial tube when a flow leaves the domain.
    #[arg(long)]
    force_incomplete: bool,
    /// Directory for certificate.json and the trajectory CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: Tolerances,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    manifold: String,
    #[arg(long, allow_hyphen_values = true)]
    field: String,
    #[arg(long, allow_hyphen_values = true)]
    p0: String,
    #[arg(long = "T")]
    t_end: f64,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: Tolerances,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    manifold: String,
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    /// Also write the minimizing segment as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: Tolerances,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    preset: presets::Preset,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// A failed command with its exit status.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::IncompleteFlow { .. }) { EXIT_INCOMPLETE } else { EXIT_ERROR };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_ERROR, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_ERROR, message: message.into() }
}

fn parse_numbers(src: &str) -> Result<Vec<f64>, Failure> {
    src.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("not a number: {s:?} in {src:?}"))))
        .collect()
}

fn parse_point(m: &Manifold, src: &str) -> Result<ChartPoint, Failure> {
    let p = ChartPoint::new(parse_numbers(src)?)?;
    if p.dim() != m.dim() {
        return Err(Error::Dimension { expected: m.dim(), got: p.dim() }.into());
    }
    Ok(p)
}

fn parse_points(m: &Manifold, src: &str) -> Result<Vec<ChartPoint>, Failure> {
    src.split(';').filter(|s| !s.trim().is_empty()).map(|s| parse_point(m, s)).collect()
}

fn load_config(tol: &Tolerances) -> Result<CertifyConfig, Failure> {
    let mut cfg = match &tol.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => CertifyConfig::default(),
    };
    if let Some(r) = tol.rel_tol {
        cfg.integrator.rel_tol = r;
    }
    if let Some(a) = tol.abs_tol {
        cfg.integrator.abs_tol = a;
    }
    cfg.integrator.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, write: impl FnOnce(&mut fs::File) -> io::Result<()>) -> Result<(), Failure> {
    let mut f = fs::File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    write(&mut f)?;
    Ok(())
}

/// Writes to stdout; a closed pipe is not an error.
pub fn emit(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn certify(args: CertifyArgs) -> Result<u8, Failure> {
    let m = catalog::manifold(&args.manifold)?;
    let x = catalog::resolve_field(&args.field, &m)?;
    let p0 = parse_point(&m, &args.p0)?;
    let q0 = parse_point(&m, &args.q0)?;
    let mut cfg = load_config(&args.tol)?;
    cfg.force_incomplete |= args.force_incomplete;
    if let Some(n) = args.samples {
        cfg.time_samples = n;
    }
    let seeds = || {
        args.seeds
            .as_deref()
            .ok_or_else(|| usage("this strategy needs --seeds"))
            .and_then(|s| parse_points(&m, s))
    };
    let strategy = match args.strategy {
        StrategyArg::Global => {
            let b = parse_numbers(args.sampling_box.as_deref().ok_or_else(|| usage("global strategy needs --box"))?)?;
            if b.len() != 2 * m.dim() {
                return Err(usage(format!("--box needs {} numbers", 2 * m.dim())));
            }
            let lower = b.iter().step_by(2).copied().collect();
            let upper = b.iter().skip(1).step_by(2).copied().collect();
            Strategy::Global(SamplerConfig::new(lower, upper))
        }
        StrategyArg::Submanifold if args.cloud => Strategy::Submanifold(SeedSet::Cloud(seeds()?)),
        StrategyArg::Submanifold => Strategy::Submanifold(SeedSet::Polyline(seeds()?)),
        StrategyArg::GeodesicTube => Strategy::GeodesicTube,
        StrategyArg::CurveTube => Strategy::CurveTube(seeds()?),
    };

    let (cert, report) = certify_pair(&m, &x, &p0, &q0, args.t_end, &strategy, &cfg)?;
    let json = CertificateDocument::new(&cert, &report).to_json();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("certificate.json"), |f| writeln!(f, "{json}"))?;
        let times = &report.times;
        for (name, start) in [("trajectory_p.csv", &p0), ("trajectory_q.csv", &q0)] {
            let traj = flow_point(&m, &x, start, times, &cfg.integrator)?;
            write_file(&dir.join(name), |f| write_trajectory_csv(f, &traj))?;
        }
    }
    emit(&format!("{json}\n"));
    if let Some(t) = cert.incomplete_at {
        eprintln!("warning: flow incomplete after t = {}; certificate is not valid", fmt_g17(t));
    }
    match report.first_violation {
        Some(t) => {
            eprintln!("bound violated at t = {}", fmt_g17(t));
            Ok(EXIT_VIOLATION)
        }
        None => Ok(0),
    }
}

fn flow(args: FlowArgs) -> Result<u8, Failure> {
    let m = catalog::manifold(&args.manifold)?;
    let x = catalog::resolve_field(&args.field, &m)?;
    let p0 = parse_point(&m, &args.p0)?;
    let cfg = load_config(&args.tol)?;
    if !(args.t_end > 0.0) {
        return Err(usage("--T must be positive"));
    }
    let traj = flow_point(&m, &x, &p0, &uniform_times(args.t_end, args.samples), &cfg.integrator)?;
    match &args.out {
        Some(path) => write_file(path, |f| write_trajectory_csv(f, &traj))?,
        None => {
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &traj)?;
            emit(&String::from_utf8_lossy(&buf));
        }
    }
    if traj.reached(args.t_end) {
        Ok(0)
    } else {
        eprintln!("trajectory left the domain at t = {}", fmt_g17(traj.complete_to));
        Ok(EXIT_INCOMPLETE)
    }
}

fn dist(args: DistanceArgs) -> Result<u8, Failure> {
    let m = catalog::manifold(&args.manifold)?;
    let p = parse_point(&m, &args.p)?;
    let q = parse_point(&m, &args.q)?;
    let cfg = load_config(&args.tol)?;
    let (d, seg) = distance(&m, &p, &q, &cfg.geodesic)?;
    if let Some(path) = &args.out {
        write_file(path, |f| write_segment_csv(f, &seg))?;
    }
    emit(&format!("{}\n", fmt_g17(d)));
    if !seg.converged {
        eprintln!("warning: minimizing segment did not converge");
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Certify(a) => certify(a),
        Command::Flow(a) => flow(a),
        Command::Distance(a) => dist(a),
        Command::Reproduce(a) => presets::reproduce(a.preset, &a.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
