//! Dormand–Prince 5(4) integrator for autonomous systems with an
//! admissible-state predicate. Steps land on the requested sample times;
//! domain exits are located by step bisection.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.25, max_steps: 1_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0 && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("integrator settings must be positive: {self:?}")))
        }
    }
}

/// Samples of an integrated solution.
#[derive(Debug, Clone)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Largest time reached while every state stayed admissible.
    pub complete_to: f64,
    pub steps: usize,
}

// Exit times are resolved to this absolute resolution.
const EXIT_RESOLUTION: f64 = 1e-11;

const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

enum Step {
    Ok { y1: DVector<f64>, f1: DVector<f64>, err: f64 },
    Inadmissible,
}

fn dopri_step<F, P>(rhs: &F, admissible: &P, y0: &DVector<f64>, f0: &DVector<f64>, h: f64, cfg: &IntegratorConfig) -> Step
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
    P: Fn(&DVector<f64>) -> bool,
{
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(f0.clone());
    for row in A.iter() {
        let mut y = y0.clone();
        for (a, kj) in row.iter().zip(&k) {
            if *a != 0.0 {
                y.axpy(h * a, kj, 1.0);
            }
        }
        if !y.iter().all(|v| v.is_finite()) || !admissible(&y) {
            return Step::Inadmissible;
        }
        match rhs(&y) {
            Some(f) if f.iter().all(|v| v.is_finite()) => k.push(f),
            _ => return Step::Inadmissible,
        }
    }
    // The last stage is evaluated at the fifth-order solution (FSAL).
    let mut y1 = y0.clone();
    for (a, kj) in A[5].iter().zip(&k) {
        if *a != 0.0 {
            y1.axpy(h * a, kj, 1.0);
        }
    }
    let f1 = k[6].clone();
    let mut sum = 0.0;
    for i in 0..y0.len() {
        let e: f64 = E.iter().zip(&k).map(|(w, kj)| w * kj[i]).sum::<f64>() * h;
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        sum += (e / sc).powi(2);
    }
    let err = (sum / y0.len() as f64).sqrt();
    if !err.is_finite() {
        return Step::Inadmissible;
    }
    let mid = hermite(y0, f0, &y1, &f1, h, 0.5);
    if !admissible(&mid) {
        return Step::Inadmissible;
    }
    Step::Ok { y1, f1, err }
}

/// Cubic Hermite interpolant on `[t0, t0 + h]` at fraction `s`.
pub fn hermite(y0: &DVector<f64>, f0: &DVector<f64>, y1: &DVector<f64>, f1: &DVector<f64>, h: f64, s: f64) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * h00 + f0 * (h10 * h) + y1 * h01 + f1 * (h11 * h)
}

fn weighted_norm(v: &DVector<f64>, y: &DVector<f64>, cfg: &IntegratorConfig) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a / (cfg.abs_tol + cfg.rel_tol * b.abs())).powi(2))
        .sum();
    (s / v.len() as f64).sqrt()
}

fn initial_step<F>(rhs: &F, y0: &DVector<f64>, f0: &DVector<f64>, cfg: &IntegratorConfig) -> f64
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let d0 = weighted_norm(y0, y0, cfg);
    let d1 = weighted_norm(f0, y0, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = y0 + f0 * h0;
    let d2 = match rhs(&y1) {
        Some(f1) => weighted_norm(&(f1 - f0), y0, cfg) / h0,
        None => return h0,
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Integrates `y' = rhs(y)` from `y0` at time 0, sampling at `sample_times`
/// (increasing, first entry >= 0). Integration stops early when the
/// solution becomes inadmissible (`rhs` returns `None` or `admissible`
/// fails) or the step size underflows; samples are returned up to that
/// point and `complete_to` records the last admissible time.
pub fn integrate<F, P>(rhs: F, admissible: P, y0: DVector<f64>, sample_times: &[f64], cfg: &IntegratorConfig) -> Result<Solution>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
    P: Fn(&DVector<f64>) -> bool,
{
    cfg.validate()?;
    if sample_times.is_empty() {
        return Err(Error::Invalid("no sample times requested".into()));
    }
    if sample_times[0] < 0.0 || sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("sample times must be increasing and non-negative".into()));
    }
    let t_end = *sample_times.last().unwrap();
    let mut times = Vec::with_capacity(sample_times.len());
    let mut states = Vec::with_capacity(sample_times.len());
    let mut next = 0;
    while next < sample_times.len() && sample_times[next] == 0.0 {
        times.push(0.0);
        states.push(y0.clone());
        next += 1;
    }
    let done = |times, states, complete_to, steps| Ok(Solution { times, states, complete_to, steps });

    if !admissible(&y0) {
        return Err(Error::Invalid("initial state is not admissible".into()));
    }
    let Some(mut f0) = rhs(&y0).filter(|f| f.iter().all(|v| v.is_finite())) else {
        return done(times, states, 0.0, 0);
    };
    if t_end == 0.0 {
        return done(times, states, 0.0, 0);
    }

    let mut t = 0.0;
    let mut y = y0;
    let mut h = initial_step(&rhs, &y, &f0, cfg).min(t_end);
    let mut fail_at: Option<f64> = None;
    let mut steps = 0;

    while t < t_end {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::StepLimitExceeded(cfg.max_steps));
        }
        h = h.min(cfg.max_step);
        if let Some(tf) = fail_at {
            if tf - t <= EXIT_RESOLUTION {
                return done(times, states, t, steps);
            }
            h = h.min(0.5 * (tf - t));
        }
        // Steps land exactly on sample times.
        let target = sample_times[next];
        let land = t + h >= target - 4.0 * f64::EPSILON * target.abs().max(1.0);
        let h_step = if land { target - t } else { h };
        match dopri_step(&rhs, &admissible, &y, &f0, h_step, cfg) {
            Step::Inadmissible => {
                fail_at = Some(fail_at.map_or(t + h_step, |tf: f64| tf.min(t + h_step)));
                h = 0.5 * h_step;
            }
            Step::Ok { y1, f1, err } => {
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if err <= 1.0 {
                    if land {
                        t = target;
                        times.push(target);
                        states.push(y1.clone());
                        next += 1;
                        h = h.max(h_step * factor);
                    } else {
                        t += h_step;
                        h = h_step * factor;
                    }
                    y = y1;
                    f0 = f1;
                } else {
                    h = h_step * factor;
                    if h < 1e-14 * t.abs().max(1.0) {
                        // Step-size underflow: the solution is escaping.
                        return done(times, states, t, steps);
                    }
                }
            }
        }
    }
    done(times, states, t, steps)
}

/// Fixed-step fifth-order Dormand–Prince from 0 to `t_end` in `n` steps.
pub fn integrate_fixed<F>(rhs: F, y0: DVector<f64>, t_end: f64, n: usize) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let h = t_end / n as f64;
    let mut y = y0;
    for _ in 0..n {
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(rhs(&y).ok_or_else(|| Error::Numerical("right-hand side not evaluable".into()))?);
        for row in A.iter().take(5) {
            let mut ys = y.clone();
            for (a, kj) in row.iter().zip(&k) {
                ys.axpy(h * a, kj, 1.0);
            }
            k.push(rhs(&ys).ok_or_else(|| Error::Numerical("right-hand side not evaluable".into()))?);
        }
        for (a, kj) in A[5].iter().zip(&k) {
            y.axpy(h * a, kj, 1.0);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(a: f64) -> impl Fn(&DVector<f64>) -> Option<DVector<f64>> {
        move |y| Some(y * a)
    }

    #[test]
    fn exponential_growth() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let sol = integrate(lin(1.0), |_| true, DVector::from_element(1, 1.0), &times, &IntegratorConfig::default()).unwrap();
        assert_eq!(sol.times, times);
        assert_eq!(sol.complete_to, 1.0);
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert!((y[0] - t.exp()).abs() < 1e-9 * t.exp(), "t = {t}");
        }
    }

    #[test]
    fn exit_time_is_bisected() {
        // y' = 1 from 0, inadmissible once y >= 0.7.
        let sol = integrate(
            |_| Some(DVector::from_element(1, 1.0)),
            |y| y[0] < 0.7,
            DVector::from_element(1, 0.0),
            &[0.0, 0.5, 1.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!((sol.complete_to - 0.7).abs() < 1e-9, "{}", sol.complete_to);
        assert_eq!(sol.times, vec![0.0, 0.5]);
    }

    #[test]
    fn blow_up_stops_before_singularity() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let sol = integrate(
            |y| Some(y.map(|v| v * v)),
            |_| true,
            DVector::from_element(1, 1.0),
            &[0.0, 0.5, 2.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(sol.complete_to < 1.0 && sol.complete_to > 0.999, "{}", sol.complete_to);
        assert_eq!(sol.times.len(), 2);
    }

    #[test]
    fn step_limit() {
        let cfg = IntegratorConfig { max_steps: 3, ..Default::default() };
        let r = integrate(lin(1.0), |_| true, DVector::from_element(1, 1.0), &[0.0, 10.0], &cfg);
        assert!(matches!(r, Err(Error::StepLimitExceeded(3))));
    }

    #[test]
    fn fixed_step_is_fifth_order() {
        let exact = 1f64.exp();
        let err = |n| (integrate_fixed(lin(1.0), DVector::from_element(1, 1.0), 1.0, n).unwrap()[0] - exact).abs();
        let order = (err(8) / err(16)).log2();
        assert!(order > 4.5, "order {order}");
    }

    #[test]
    fn rejects_bad_config_and_samples() {
        let cfg = IntegratorConfig { rel_tol: 0.0, ..Default::default() };
        assert!(integrate(lin(1.0), |_| true, DVector::from_element(1, 1.0), &[0.0, 1.0], &cfg).is_err());
        let cfg = IntegratorConfig::default();
        assert!(integrate(lin(1.0), |_| true, DVector::from_element(1, 1.0), &[0.0, 1.0, 0.5], &cfg).is_err());
    }
}
