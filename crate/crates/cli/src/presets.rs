//! Reference configurations with their expected outcomes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use clap::ValueEnum;
use gronwall_core::io::{fmt_g17, write_lengths_csv, write_trajectory_csv};
use gronwall_core::{
    catalog, certify_pair, distance, estimate_ct_global, flow_curve, flow_point, length_evolution, CertificateDocument,
    CertifyConfig, ChartPoint, Error, GronwallCertificate, Manifold, SamplerConfig, Strategy, VectorField,
    ViolationReport,
};

use crate::{emit, write_file, Failure};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    /// Slit plane, X = (0, 1): the bound fails once the points pass the slit.
    #[value(name = "example-i")]
    ExampleI,
    /// Slit plane, X = (0, e^{1 - 1/x^2}): the bound holds with C = 3 sqrt(3/(2e)).
    #[value(name = "example-ii")]
    ExampleIi,
    /// Euclidean plane, X = diag(2, 1) x: the bound is attained.
    #[value(name = "euclidean-linear")]
    EuclideanLinear,
    /// Sphere, X = d/dphi: an isometric flow keeps the distance constant.
    #[value(name = "sphere-killing")]
    SphereKilling,
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn pt(c: &[f64]) -> ChartPoint {
    ChartPoint::new(c.to_vec()).expect("preset point")
}

struct Run {
    m: Manifold,
    x: VectorField,
    p0: ChartPoint,
    q0: ChartPoint,
    cfg: CertifyConfig,
    cert: GronwallCertificate,
    report: ViolationReport,
}

fn run(m: Manifold, x: VectorField, p0: ChartPoint, q0: ChartPoint, t_end: f64, strategy: Strategy, cfg: CertifyConfig) -> Result<Run, Failure> {
    let (cert, report) = certify_pair(&m, &x, &p0, &q0, t_end, &strategy, &cfg)?;
    Ok(Run { m, x, p0, q0, cfg, cert, report })
}

/// Largest deviation of the measured distances from `exact(t)`.
fn max_deviation(report: &ViolationReport, exact: impl Fn(f64) -> f64) -> f64 {
    report
        .times
        .iter()
        .zip(&report.measured)
        .map(|(t, d)| (d - exact(*t)).abs())
        .fold(0.0, f64::max)
}

fn example_i(checks: &mut Vec<Check>) -> Result<Run, Failure> {
    let m = catalog::slit_plane();
    let x = catalog::field("unit-y", 2)?;
    let (p0, q0, t_end) = (pt(&[-1.0, -1.0]), pt(&[1.0, -1.0]), 3.0);
    match certify_pair(&m, &x, &p0, &q0, t_end, &Strategy::GeodesicTube, &CertifyConfig::default()) {
        Err(Error::IncompleteFlow { time, .. }) => {
            checks.push(check("tube leaves the domain at t = 1", (time - 1.0).abs() <= 1e-9, format!("exit at t = {}", fmt_g17(time))))
        }
        Err(e) => return Err(e.into()),
        Ok(_) => checks.push(check("tube leaves the domain at t = 1", false, "flow reported complete".into())),
    }
    let cfg = CertifyConfig { force_incomplete: true, ..Default::default() };
    let r = run(m, x, p0, q0, t_end, Strategy::GeodesicTube, cfg)?;
    checks.push(check("C_T = 0", r.cert.c_t == 0.0, format!("C_T = {}", fmt_g17(r.cert.c_t))));
    let fv = r.report.first_violation;
    checks.push(check(
        "first violation in [0.99, 1.01]",
        fv.is_some_and(|t| (0.99..=1.01).contains(&t)),
        format!("first_violation = {}", fv.map_or("none".into(), fmt_g17)),
    ));
    let dev = max_deviation(&r.report, |t| if t <= 1.0 { 2.0 } else { 2.0 * (1.0 + (t - 1.0).powi(2)).sqrt() });
    checks.push(check("measured matches the piecewise formula to 1e-6", dev <= 1e-6, format!("max deviation {}", fmt_g17(dev))));
    Ok(r)
}

fn example_ii(checks: &mut Vec<Check>) -> Result<Run, Failure> {
    let m = catalog::slit_plane();
    let x = catalog::bump_field();
    let c = catalog::bump_field_sup();
    let sampled = SamplerConfig { use_hint: false, ..SamplerConfig::new(vec![-3.0, -3.0], vec![3.0, 3.0]) };
    let est = estimate_ct_global(&m, &x, &sampled)?;
    checks.push(check(
        "sampled sup within 1e-4 of 3 sqrt(3/(2e))",
        (est.value - c).abs() <= 1e-4 && est.rounds <= 6,
        format!("sampled {} after {} rounds, closed form {}", fmt_g17(est.value), est.rounds, fmt_g17(c)),
    ));
    let strategy = Strategy::Global(SamplerConfig::new(vec![-3.0, -3.0], vec![3.0, 3.0]));
    let r = run(m, x, pt(&[-1.0, 0.0]), pt(&[1.0, 0.0]), 5.0, strategy, CertifyConfig::default())?;
    let dev = max_deviation(&r.report, |t| 2.0 * (1.0 + t * t).sqrt());
    checks.push(check("measured matches 2 sqrt(1 + t^2) to 1e-6", dev <= 1e-6, format!("max deviation {}", fmt_g17(dev))));
    checks.push(check("no violation", !r.report.violated(), format!("C_T = {}", fmt_g17(r.cert.c_t))));
    Ok(r)
}

fn euclidean_linear(checks: &mut Vec<Check>) -> Result<Run, Failure> {
    let delta = 1e-2;
    let cfg = CertifyConfig { time_samples: 201, ..Default::default() };
    let r = run(
        catalog::euclidean(2),
        catalog::field("linear-diag21", 2)?,
        pt(&[0.0, 0.0]),
        pt(&[delta, 0.0]),
        2.0,
        Strategy::GeodesicTube,
        cfg,
    )?;
    checks.push(check("C_T = 2", (r.cert.c_t - 2.0).abs() <= 1e-12, format!("C_T = {}", fmt_g17(r.cert.c_t))));
    let ratio_dev = r
        .report
        .measured
        .iter()
        .zip(&r.report.bound)
        .map(|(d, b)| (d / b - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(check("measured / bound = 1 within 1e-6", ratio_dev <= 1e-6, format!("max |ratio - 1| {}", fmt_g17(ratio_dev))));
    let dev = max_deviation(&r.report, |t| delta * (2.0 * t).exp());
    checks.push(check("measured matches delta e^{2t}", dev <= 1e-8 * delta * 4f64.exp(), format!("max deviation {}", fmt_g17(dev))));
    Ok(r)
}

fn sphere_killing(checks: &mut Vec<Check>) -> Result<Run, Failure> {
    let cfg = CertifyConfig { time_samples: 65, ..Default::default() };
    let r = run(
        catalog::sphere(),
        catalog::field("d-phi", 2)?,
        pt(&[1.0, 0.2]),
        pt(&[1.6, 0.9]),
        2.0 * PI,
        Strategy::GeodesicTube,
        cfg,
    )?;
    let dev = max_deviation(&r.report, |_| r.cert.d0) / r.cert.d0;
    checks.push(check("distance constant to 1e-6", dev <= 1e-6, format!("max relative deviation {}", fmt_g17(dev))));
    checks.push(check("no violation", !r.report.violated(), format!("C_T = {}", fmt_g17(r.cert.c_t))));
    Ok(r)
}

/// Runs `preset`, writes its certificate, trajectories and summary into
/// `out`, and fails with exit status 1 if any expected outcome is missed.
pub fn reproduce(preset: Preset, out: &Path) -> Result<u8, Failure> {
    let mut checks = Vec::new();
    let r = match preset {
        Preset::ExampleI => example_i(&mut checks)?,
        Preset::ExampleIi => example_ii(&mut checks)?,
        Preset::EuclideanLinear => euclidean_linear(&mut checks)?,
        Preset::SphereKilling => sphere_killing(&mut checks)?,
    };
    fs::create_dir_all(out)?;
    let json = CertificateDocument::new(&r.cert, &r.report).to_json();
    write_file(&out.join("certificate.json"), |f| writeln!(f, "{json}"))?;
    for (name, start) in [("trajectory_p.csv", &r.p0), ("trajectory_q.csv", &r.q0)] {
        let traj = flow_point(&r.m, &r.x, start, &r.report.times, &r.cfg.integrator)?;
        write_file(&out.join(name), |f| write_trajectory_csv(f, &traj))?;
    }
    if r.cert.incomplete_at.is_none() {
        let (_, seg) = distance(&r.m, &r.p0, &r.q0, &r.cfg.geodesic)?;
        let t_end = r.cert.horizon;
        let fam = flow_curve(&r.m, &r.x, &seg.points, t_end, &r.cfg.integrator, 101);
        if let Ok(fam) = fam {
            let lengths = length_evolution(&r.m, &fam)?;
            write_file(&out.join("lengths.csv"), |f| write_lengths_csv(f, &lengths))?;
        }
    }

    let mut summary = String::new();
    let name = preset.to_possible_value().expect("named preset").get_name().to_string();
    let _ = writeln!(summary, "preset: {name}");
    let _ = writeln!(summary, "manifold: {}", r.m.name());
    let _ = writeln!(summary, "field: {}", r.x.name());
    let _ = writeln!(summary, "strategy: {}", r.cert.strategy.as_str());
    let _ = writeln!(summary, "C_T: {}", fmt_g17(r.cert.c_t));
    let _ = writeln!(summary, "d0: {}", fmt_g17(r.cert.d0));
    let _ = writeln!(summary, "T: {}", fmt_g17(r.cert.horizon));
    let _ = writeln!(
        summary,
        "first_violation: {}",
        r.report.first_violation.map_or("none".into(), fmt_g17)
    );
    for c in &checks {
        let _ = writeln!(summary, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    write_file(&out.join("summary.txt"), |f| f.write_all(summary.as_bytes()))?;
    emit(&summary);
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
}
