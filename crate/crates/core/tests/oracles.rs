use std::f64::consts::FRAC_PI_4;

use gronwall_core::catalog;
use gronwall_core::{
    certify_pair, estimate_ct_global, estimate_ct_tube, flow_curve, length_evolution, torsion_swap_residual, ChartPoint,
    CertifyConfig, IntegratorConfig, Manifold, RefinementConfig, SamplerConfig, SeedSet, Strategy, VectorField,
};
use nalgebra::{DMatrix, DVector};

fn pt(c: &[f64]) -> ChartPoint {
    ChartPoint::new(c.to_vec()).unwrap()
}

fn segment(a: &[f64], b: &[f64], n: usize) -> Vec<ChartPoint> {
    (0..n).map(|i| pt(a).lerp(&pt(b), i as f64 / (n - 1) as f64)).collect()
}

/// Transports `v` from `from` to `to` along the chart segment with RK4.
fn transport(m: &Manifold, from: &DVector<f64>, to: &DVector<f64>, v: DVector<f64>, steps: usize) -> DVector<f64> {
    let dir = to - from;
    let rhs = |s: f64, v: &DVector<f64>| {
        let gamma = m.christoffel(&ChartPoint::from_vector(from + &dir * s).unwrap()).unwrap();
        -gamma.contract(&dir, v)
    };
    let h = 1.0 / steps as f64;
    let mut v = v;
    for i in 0..steps {
        let s = i as f64 * h;
        let k1 = rhs(s, &v);
        let k2 = rhs(s + 0.5 * h, &(&v + &k1 * (0.5 * h)));
        let k3 = rhs(s + 0.5 * h, &(&v + &k2 * (0.5 * h)));
        let k4 = rhs(s + h, &(&v + &k3 * h));
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    v
}

#[test]
fn covariant_differential_matches_parallel_transport() {
    let m = catalog::sphere();
    let x = catalog::field("d-phi", 2).unwrap();
    let p = pt(&[FRAC_PI_4, 0.3]);
    let nabla = m.covariant_differential(&x, &p).unwrap();
    let h = 1e-4;
    for j in 0..2 {
        let e = DVector::from_fn(2, |i, _| if i == j { 1.0 } else { 0.0 });
        let moved = |s: f64| {
            let q = p.coords() + &e * s;
            let xq = x.eval(&ChartPoint::from_vector(q.clone()).unwrap()).unwrap();
            transport(&m, &q, p.coords(), xq, 8)
        };
        let column = (moved(h) - moved(-h)) / (2.0 * h);
        let err = (column - nabla.entries.column(j)).amax();
        assert!(err < 1e-6, "column {j}: {err}");
    }
}

#[test]
fn torsion_residual_is_small_and_second_order() {
    let m = catalog::euclidean(2);
    let x = catalog::field("rotation", 2).unwrap();
    let cfg = IntegratorConfig::default();
    let c0 = segment(&[1.0, 0.0], &[2.0, 0.5], 200);
    let fam = flow_curve(&m, &x, &c0, 1.0, &cfg, 200).unwrap();
    let r = torsion_swap_residual(&m, &x, &fam, 100, 100).unwrap();
    assert!(r <= 1e-4, "{r}");

    let coarse = flow_curve(&m, &x, &c0, 1.0, &cfg, 101).unwrap();
    let fine = flow_curve(&m, &x, &c0, 1.0, &cfg, 201).unwrap();
    let rc = torsion_swap_residual(&m, &x, &coarse, 50, 100).unwrap();
    let rf = torsion_swap_residual(&m, &x, &fine, 100, 100).unwrap();
    let ratio = rc / rf;
    assert!((3.5..=4.5).contains(&ratio), "{rc} / {rf} = {ratio}");

    let zero = flow_curve(&m, &VectorField::zero(2), &c0, 1.0, &cfg, 50).unwrap();
    assert_eq!(torsion_swap_residual(&m, &VectorField::zero(2), &zero, 10, 10).unwrap(), 0.0);
}

#[test]
fn isometric_flows_conserve_length() {
    let cfg = IntegratorConfig::default();
    let cases: Vec<(Manifold, VectorField, Vec<ChartPoint>)> = vec![
        (catalog::euclidean(2), catalog::field("unit-y", 2).unwrap(), segment(&[-1.0, 0.0], &[2.0, 1.0], 257)),
        (catalog::euclidean(2), catalog::field("rotation", 2).unwrap(), segment(&[-1.0, 0.0], &[2.0, 1.0], 257)),
        (catalog::sphere(), catalog::field("d-phi", 2).unwrap(), segment(&[0.5, 0.0], &[2.0, 1.0], 257)),
    ];
    for (m, x, c0) in cases {
        let fam = flow_curve(&m, &x, &c0, 2.0, &cfg, 41).unwrap();
        let lengths = length_evolution(&m, &fam).unwrap();
        let l0 = lengths[0].1;
        for (t, l) in lengths {
            assert!((l - l0).abs() <= 1e-6 * l0, "{} at {t}: {l} vs {l0}", m.name());
        }
    }
}

#[test]
fn example_ii_length_growth_respects_the_constant() {
    let m = catalog::euclidean(2);
    let x = catalog::bump_field();
    let c = catalog::bump_field_sup();
    let fam = flow_curve(&m, &x, &segment(&[-1.0, 0.0], &[1.0, 0.0], 257), 3.0, &IntegratorConfig::default(), 61).unwrap();
    let lengths = length_evolution(&m, &fam).unwrap();
    let l0 = lengths[0].1;
    assert!((l0 - 2.0).abs() < 1e-12);
    for (t, l) in lengths {
        assert!(l <= l0 * (c * t).exp(), "{t}: {l}");
    }
}

#[test]
fn linear_flow_attains_the_bound() {
    let m = catalog::euclidean(2);
    let x = VectorField::linear("a", DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
    let delta = 1e-2;
    let (p0, q0) = (pt(&[0.3, -0.4]), pt(&[0.3 + delta, -0.4]));
    let cfg = CertifyConfig { time_samples: 201, ..Default::default() };
    let (cert, report) = certify_pair(&m, &x, &p0, &q0, 2.0, &Strategy::GeodesicTube, &cfg).unwrap();
    assert!((cert.c_t - 2.0).abs() < 1e-14);
    assert!(!report.violated());
    for ((t, d), b) in report.times.iter().zip(&report.measured).zip(&report.bound) {
        let exact = delta * (2.0 * t).exp();
        assert!((d - exact).abs() <= 1e-8 * exact, "{t}");
        assert!((d / b - 1.0).abs() <= 1e-6, "{t}: {d} / {b}");
    }
}

#[test]
fn sphere_rotation_keeps_distance_and_never_violates() {
    let m = catalog::sphere();
    let x = catalog::field("d-phi", 2).unwrap();
    let cfg = CertifyConfig { time_samples: 33, ..Default::default() };
    let (cert, report) = certify_pair(&m, &x, &pt(&[1.0, 0.2]), &pt(&[1.6, 0.9]), 6.0, &Strategy::GeodesicTube, &cfg).unwrap();
    assert!(cert.c_t > 0.0);
    assert!(!report.violated());
    for d in &report.measured {
        assert!((d - cert.d0).abs() <= 1e-6 * cert.d0, "{d} vs {}", cert.d0);
    }
}

#[test]
fn example_i_violation_time_tracks_y0() {
    let m = catalog::slit_plane();
    let x = catalog::field("unit-y", 2).unwrap();
    let cfg = CertifyConfig { force_incomplete: true, ..Default::default() };
    for y0 in [0.5, 1.0, 2.0] {
        let (p0, q0) = (pt(&[-1.0, -y0]), pt(&[1.0, -y0]));
        let (cert, report) = certify_pair(&m, &x, &p0, &q0, y0 + 2.0, &Strategy::GeodesicTube, &cfg).unwrap();
        assert_eq!(cert.c_t, 0.0);
        let t = report.first_violation.expect("violation");
        assert!((t - y0).abs() <= 0.01, "y0 = {y0}: {t}");
        for (t, d) in report.times.iter().zip(&report.measured) {
            let exact = if *t <= y0 { 2.0 } else { 2.0 * (1.0 + (t - y0).powi(2)).sqrt() };
            assert!((d - exact).abs() <= 1e-6, "{t}: {d} vs {exact}");
        }
    }
}

#[test]
fn strategies_nest() {
    let m = catalog::euclidean(2);
    let x = catalog::bump_field();
    let (p0, q0) = (pt(&[-1.0, 0.3]), pt(&[0.5, 0.3]));
    let cfg = CertifyConfig { time_samples: 11, ..Default::default() };
    let (tube, _) = certify_pair(&m, &x, &p0, &q0, 1.0, &Strategy::GeodesicTube, &cfg).unwrap();
    let n = SeedSet::Polyline(segment(&[-1.4, 0.3], &[0.9, 0.3], 257));
    let (sub, _) = certify_pair(&m, &x, &p0, &q0, 1.0, &Strategy::Submanifold(n), &cfg).unwrap();
    let sampler = SamplerConfig { use_hint: false, ..SamplerConfig::new(vec![-3.0, -1.0], vec![3.0, 3.0]) };
    let (global, _) = certify_pair(&m, &x, &p0, &q0, 1.0, &Strategy::Global(sampler), &cfg).unwrap();
    assert!(tube.c_t <= sub.c_t * (1.0 + 1e-4), "{} > {}", tube.c_t, sub.c_t);
    assert!(sub.c_t <= global.c_t * (1.0 + 1e-4), "{} > {}", sub.c_t, global.c_t);
    assert!((global.c_t - catalog::bump_field_sup()).abs() < 1e-4);
}

#[test]
fn tube_refinement_never_decreases_the_estimate() {
    let m = catalog::poincare_disk();
    let x = catalog::parse_field("x^2 - y, x*y + 0.3", 2, &["x", "y"]).unwrap();
    let seeds = SeedSet::Polyline(segment(&[-0.4, -0.2], &[0.3, 0.1], 9));
    let mut previous = 0.0;
    for rounds in 0..5 {
        let refine = RefinementConfig { rel_change: 0.0, max_rounds: rounds, ..Default::default() };
        let est = estimate_ct_tube(&m, &x, &seeds, 0.5, &refine, &IntegratorConfig::default()).unwrap();
        assert!(est.value >= previous, "round {rounds}: {} < {previous}", est.value);
        previous = est.value;
    }
}

#[test]
fn global_sup_of_example_ii_field() {
    let m = catalog::euclidean(2);
    let sampler = SamplerConfig { use_hint: false, ..SamplerConfig::new(vec![-3.0, -3.0], vec![3.0, 3.0]) };
    let est = estimate_ct_global(&m, &catalog::bump_field(), &sampler).unwrap();
    assert!((est.value - catalog::bump_field_sup()).abs() < 1e-4, "{}", est.value);
    assert!(est.rounds <= 6);
}
