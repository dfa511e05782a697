//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use gronwall_core::catalog;
use gronwall_core::{
    certify_pair, distance_value, estimate_ct_global, estimate_ct_tube, flow_curve, length_evolution,
    minimize_geodesic, torsion_swap_residual, CertifyConfig, ChartPoint, GeodesicConfig, IntegratorConfig, LinearMap,
    Manifold, RefinementConfig, SamplerConfig, SeedSet, Strategy, TangentVector, VectorField,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn pt(c: &[f64]) -> ChartPoint {
    ChartPoint::new(c.to_vec()).unwrap()
}

fn segment(a: &[f64], b: &[f64], n: usize) -> Vec<ChartPoint> {
    (0..n).map(|i| pt(a).lerp(&pt(b), i as f64 / (n - 1) as f64)).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gronwall(args: &[&str]) -> (i32, serde_json::Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_gronwall")).args(args).output().expect("run gronwall");
    let code = out.status.code().unwrap_or(-1);
    let json = serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null);
    (code, json)
}

fn floats(v: &serde_json::Value, key: &str) -> Vec<f64> {
    v[key].as_array().map(|a| a.iter().filter_map(|x| x.as_f64()).collect()).unwrap_or_default()
}

fn sampled_constant() -> Outcome {
    let m = catalog::euclidean(2);
    let sampler = SamplerConfig { use_hint: false, ..SamplerConfig::new(vec![-3.0, -3.0], vec![3.0, 3.0]) };
    let start = Instant::now();
    let est = estimate_ct_global(&m, &catalog::bump_field(), &sampler).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let c = catalog::bump_field_sup();
    let err = (est.value - c).abs();
    ensure(err <= 1e-4 && est.rounds <= 6 && secs < 10.0, || {
        format!("C = {} (error {err:.2e}) after {} rounds in {secs:.2}s", est.value, est.rounds)
    })?;
    Ok(format!("C = {:.10} vs {:.10}, error {err:.2e}, {} rounds, {secs:.2}s", est.value, c, est.rounds))
}

fn bump_field_bound_holds() -> Outcome {
    let (code, doc) = gronwall(&[
        "certify", "--manifold", "slit-plane", "--field", "example-ii", "--p0", "-1,0", "--q0", "1,0", "--T", "5",
        "--strategy", "global", "--box", "-3,3,-3,3",
    ]);
    ensure(code == 0, || format!("exit code {code}"))?;
    let (times, measured, bound) = (floats(&doc, "times"), floats(&doc, "measured"), floats(&doc, "bound"));
    ensure(!times.is_empty() && times.len() == measured.len() && *times.last().unwrap() == 5.0, || "bad time grid".into())?;
    let mut worst: f64 = 0.0;
    for ((t, d), b) in times.iter().zip(&measured).zip(&bound) {
        worst = worst.max((d - 2.0 * (1.0 + t * t).sqrt()).abs());
        ensure(d <= b, || format!("measured {d} exceeds bound {b} at t = {t}"))?;
    }
    ensure(worst <= 1e-6, || format!("max deviation from 2 sqrt(1+t^2): {worst:.2e}"))?;
    ensure(doc["first_violation"].is_null(), || "violation reported".into())?;
    Ok(format!("{} samples, max deviation {worst:.2e}, exit 0", times.len()))
}

fn slit_violation() -> Outcome {
    let base = [
        "certify", "--manifold", "slit-plane", "--field", "unit-y", "--p0", "-1,-1", "--q0", "1,-1", "--T", "3",
    ];
    let (code, _) = gronwall(&base);
    ensure(code == 3, || format!("unforced run exited {code}, expected 3 (incomplete)"))?;
    let mut forced = base.to_vec();
    forced.push("--force-incomplete");
    let (code, doc) = gronwall(&forced);
    ensure(code == 2, || format!("forced run exited {code}, expected 2 (violation)"))?;
    ensure(doc["C_T"].as_f64() == Some(0.0), || format!("C_T = {}", doc["C_T"]))?;
    let fv = doc["first_violation"].as_f64().ok_or("no violation reported")?;
    ensure((0.99..=1.01).contains(&fv), || format!("first violation at {fv}"))?;
    let mut worst: f64 = 0.0;
    for (t, d) in floats(&doc, "times").iter().zip(floats(&doc, "measured")) {
        let exact = if *t <= 1.0 { 2.0 } else { 2.0 * (1.0 + (t - 1.0).powi(2)).sqrt() };
        worst = worst.max((d - exact).abs());
    }
    ensure(worst <= 1e-6, || format!("max deviation from the piecewise distance {worst:.2e}"))?;
    Ok(format!("first violation {fv}, max deviation {worst:.2e}"))
}

fn linear_tightness() -> Outcome {
    let m = catalog::euclidean(2);
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let x = VectorField::linear("diag21", a.clone());
    let delta = 1e-2;
    let (p0, q0) = (pt(&[0.3, -0.4]), pt(&[0.3 + delta, -0.4]));
    let cfg = CertifyConfig { time_samples: 201, ..Default::default() };
    let (cert, report) = certify_pair(&m, &x, &p0, &q0, 2.0, &Strategy::GeodesicTube, &cfg).map_err(|e| e.to_string())?;
    let diff = p0.coords() - q0.coords();
    let (mut ratio_dev, mut oracle_dev): (f64, f64) = (0.0, 0.0);
    for ((t, d), b) in report.times.iter().zip(&report.measured).zip(&report.bound) {
        let exact = ((&a * *t).exp() * &diff).norm();
        oracle_dev = oracle_dev.max((d - exact).abs() / exact);
        ratio_dev = ratio_dev.max((d / b - 1.0).abs());
    }
    ensure(ratio_dev <= 1e-6 && oracle_dev <= 1e-8 && !report.violated(), || {
        format!("C_T {} ratio deviation {ratio_dev:.2e}, oracle deviation {oracle_dev:.2e}", cert.c_t)
    })?;
    Ok(format!("C_T = {}, max |ratio - 1| {ratio_dev:.2e}, vs e^(At) {oracle_dev:.2e}", cert.c_t))
}

fn field(src: &str, names: [&str; 2]) -> VectorField {
    catalog::parse_field(src, 2, &names).unwrap()
}

fn length_growth_suite() -> Outcome {
    let e = ["x", "y"];
    let s = ["theta", "phi"];
    let triples: Vec<(Manifold, VectorField, Vec<ChartPoint>)> = vec![
        (catalog::euclidean(2), catalog::field("rotation", 2).unwrap(), segment(&[0.5, 0.0], &[1.5, 1.0], 65)),
        (catalog::euclidean(2), catalog::field("linear-diag21", 2).unwrap(), segment(&[-0.5, 0.2], &[0.5, 0.9], 65)),
        (catalog::euclidean(2), catalog::bump_field(), segment(&[-1.5, 0.0], &[1.5, 0.0], 65)),
        (catalog::euclidean(2), field("sin(y), cos(x)", e), segment(&[-1.0, -1.0], &[1.0, 2.0], 65)),
        (catalog::sphere(), catalog::field("d-phi", 2).unwrap(), segment(&[0.6, 0.0], &[2.0, 1.0], 65)),
        (catalog::sphere(), field("0.1*sin(2*theta), sin(phi)", s), segment(&[0.8, -0.5], &[2.2, 0.7], 65)),
        (catalog::sphere(), field("0.3*sin(theta)*cos(phi), 0.5", s), segment(&[1.0, 0.0], &[1.4, 2.0], 65)),
        (catalog::sphere(), field("0.2*sin(theta)^2, cos(theta)", s), segment(&[0.4, 0.3], &[1.2, -0.3], 65)),
        (catalog::poincare_disk(), field("-y, x", e), segment(&[-0.5, 0.1], &[0.6, 0.2], 65)),
        (catalog::poincare_disk(), field("0.2*(1 - x^2 - y^2), 0", e), segment(&[-0.3, -0.5], &[0.2, 0.4], 65)),
        (catalog::poincare_disk(), field("0.3*(1 - x^2 - y^2)*x, 0.3*(1 - x^2 - y^2)*y", e), segment(&[-0.6, 0.0], &[0.1, 0.5], 65)),
        (catalog::poincare_disk(), field("-y*(1 - x^2 - y^2), 0.5*x*(1 - x^2 - y^2)", e), segment(&[0.0, -0.7], &[0.3, 0.6], 65)),
    ];
    let integ = IntegratorConfig::default();
    let t_end = 1.0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (k, (m, x, c0)) in triples.iter().enumerate() {
        let est = estimate_ct_tube(m, x, &SeedSet::Polyline(c0.clone()), t_end, &RefinementConfig::default(), &integ)
            .map_err(|e| format!("triple {k}: {e}"))?;
        let fam = flow_curve(m, x, c0, t_end, &integ, 101).map_err(|e| format!("triple {k}: {e}"))?;
        let lengths = length_evolution(m, &fam).map_err(|e| e.to_string())?;
        let l0 = lengths[0].1;
        for (t, l) in lengths {
            let bound = l0 * (est.value * t).exp();
            worst = worst.max(l / bound - 1.0);
            ensure(l <= bound * (1.0 + 1e-4), || format!("triple {k} ({}): l({t}) = {l} > {bound}", m.name()))?;
        }
    }

    // Second-order decay of the torsion-swap residual on a curved example.
    let m = catalog::sphere();
    let x = field("0.1*sin(2*theta), sin(phi)", s);
    let resid = |n: usize| -> Result<f64, String> {
        let fam = flow_curve(&m, &x, &segment(&[0.8, -0.5], &[2.2, 0.7], n), 1.0, &integ, n).map_err(|e| e.to_string())?;
        torsion_swap_residual(&m, &x, &fam, n / 2, n / 2).map_err(|e| e.to_string())
    };
    let (coarse, fine) = (resid(41)?, resid(81)?);
    let order = (coarse / fine).log2();
    ensure((1.5..=2.5).contains(&order), || format!("torsion residual order {order:.3} ({coarse:.3e} -> {fine:.3e})"))?;
    Ok(format!("12 triples, max l/bound - 1 = {worst:.2e}; torsion residual order {order:.3}"))
}

fn central_angle(p: &ChartPoint, q: &ChartPoint) -> f64 {
    let (a, b) = (p.as_slice(), q.as_slice());
    let c = a[0].cos() * b[0].cos() + a[0].sin() * b[0].sin() * (a[1] - b[1]).cos();
    c.clamp(-1.0, 1.0).acos()
}

fn random_point(m: &Manifold, rng: &mut ChaCha8Rng) -> ChartPoint {
    if m.name() == "sphere" {
        pt(&[rng.random_range(0.2..PI - 0.2), rng.random_range(-1.2..1.2)])
    } else {
        let r = 0.85 * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..2.0 * PI);
        pt(&[r * a.cos(), r * a.sin()])
    }
}

fn geodesic_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cfg = GeodesicConfig::default();
    let mut worst: f64 = 0.0;
    for m in [catalog::sphere(), catalog::poincare_disk()] {
        for _ in 0..50 {
            let (p, q) = (random_point(&m, &mut rng), random_point(&m, &mut rng));
            let exact = if m.name() == "sphere" {
                central_angle(&p, &q)
            } else {
                catalog::poincare_distance(p.as_slice(), q.as_slice())
            };
            let found = minimize_geodesic(&m, &p, &q, &cfg).map_err(|e| e.to_string())?.length;
            let rel = (found - exact).abs() / exact;
            worst = worst.max(rel);
            ensure(rel <= 1e-5, || format!("{}: {found} vs {exact} ({rel:.2e})", m.name()))?;
        }
        for _ in 0..200 {
            let (a, b, c) = (random_point(&m, &mut rng), random_point(&m, &mut rng), random_point(&m, &mut rng));
            let d = |p: &ChartPoint, q: &ChartPoint| minimize_geodesic(&m, p, q, &cfg).map(|s| s.length);
            let (ab, bc, ac) = (d(&a, &b), d(&b, &c), d(&a, &c));
            let (ab, bc, ac) = (ab.map_err(|e| e.to_string())?, bc.map_err(|e| e.to_string())?, ac.map_err(|e| e.to_string())?);
            ensure(ac <= ab + bc + 1e-6, || format!("{}: {ac} > {ab} + {bc}", m.name()))?;
        }
    }
    Ok(format!("100 pairs, max relative error {worst:.2e}; 400 triangle triples"))
}

fn isometry_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let m = catalog::sphere();
    let x = catalog::field("d-phi", 2).unwrap();
    let cfg = CertifyConfig { time_samples: 33, ..Default::default() };
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (p, q) = (random_point(&m, &mut rng), random_point(&m, &mut rng));
        let (cert, report) = certify_pair(&m, &x, &p, &q, 2.0 * PI, &Strategy::GeodesicTube, &cfg).map_err(|e| e.to_string())?;
        ensure(!report.violated(), || "violation reported".into())?;
        let d0 = distance_value(&m, &p, &q, &cfg.geodesic).map_err(|e| e.to_string())?;
        for d in &report.measured {
            worst = worst.max((d - d0).abs() / d0);
        }
        ensure(worst <= 1e-6, || format!("relative drift {worst:.2e} (C_T {})", cert.c_t))?;
    }
    Ok(format!("5 pairs over [0, 2 pi], max relative drift {worst:.2e}"))
}

fn operator_norm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let ms = [catalog::euclidean(2), catalog::slit_plane(), catalog::sphere(), catalog::poincare_disk()];
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let m = &ms[case % ms.len()];
        let p = match m.name() {
            "sphere" | "poincare-disk" => random_point(m, &mut rng),
            _ => pt(&[rng.random_range(0.1..3.0), rng.random_range(-3.0..3.0)]),
        };
        let a = LinearMap::new(p.clone(), DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0))).unwrap();
        let norm = m.operator_norm(&a).map_err(|e| e.to_string())?;
        let mut brute: f64 = 0.0;
        for _ in 0..10_000 {
            let v = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let len = |w: DVector<f64>| m.tangent_norm(&TangentVector { base: p.clone(), components: w }).unwrap();
            let nv = len(v.clone());
            if nv > 0.0 {
                brute = brute.max(len(a.apply(&v)) / nv);
            }
        }
        let rel = (norm - brute).abs() / norm;
        worst = worst.max(rel);
        ensure(rel <= 1e-3, || format!("{}: {norm} vs {brute}", m.name()))?;
    }
    Ok(format!("100 cases, max relative gap {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("sampled sup of (0, e^(1-1/x^2)) on [-3,3]^2", sampled_constant),
        ("slit-plane bump-field bound, d = 2 sqrt(1+t^2)", bump_field_bound_holds),
        ("slit-plane unit-y violation at t = 1", slit_violation),
        ("linear diag(2,1) flow attains the bound", linear_tightness),
        ("length growth l(t) <= l(0) e^(C_T t), torsion residual order", length_growth_suite),
        ("geodesic distances vs closed forms, triangle inequality", geodesic_oracles),
        ("sphere rotation keeps distances", isometry_conservation),
        ("operator norm vs brute force", operator_norm_oracle),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
