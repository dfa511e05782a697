//! Geodesics: shooting, two-point distances by discrete energy
//! minimization, and the closed-form distance of the slit plane.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{curve_length, reparametrize_by_arclength, Trajectory};
use crate::integrator::{integrate, IntegratorConfig};
use crate::manifold::Manifold;
use crate::point::{ChartPoint, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeodesicConfig {
    /// Node count at which the doubling test starts.
    pub initial_nodes: usize,
    pub max_nodes: usize,
    /// Stop doubling once the length changes by less than this, relatively.
    pub rel_change: f64,
    /// Energy-descent iterations per resolution level.
    pub max_iterations: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        Self { initial_nodes: 129, max_nodes: 1025, rel_change: 1e-8, max_iterations: 400 }
    }
}

/// A discretized (locally) minimizing geodesic from `points[0]` to the last point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    pub points: Vec<ChartPoint>,
    pub length: f64,
    pub converged: bool,
}

/// A shot geodesic with its velocities.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub trajectory: Trajectory,
    pub velocities: Vec<TangentVector>,
}

/// Integrates `x'' + Γ(x)(x', x') = 0` from `v.base` with initial velocity `v`.
pub fn geodesic_shoot(m: &Manifold, v: &TangentVector, times: &[f64], cfg: &IntegratorConfig) -> Result<GeodesicPath> {
    m.check_domain(&v.base)?;
    let n = m.dim();
    if v.components.len() != n {
        return Err(Error::Dimension { expected: n, got: v.components.len() });
    }
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from(v.base.coords());
    y0.rows_mut(n, n).copy_from(&v.components);
    let sol = integrate(
        |y| {
            let x = ChartPoint::new(y.rows(0, n).iter().copied().collect::<Vec<_>>()).ok()?;
            let vel = y.rows(n, n).into_owned();
            let gamma = m.christoffel(&x).ok()?;
            let acc = -gamma.contract(&vel, &vel);
            let mut f = DVector::zeros(2 * n);
            f.rows_mut(0, n).copy_from(&vel);
            f.rows_mut(n, n).copy_from(&acc);
            Some(f)
        },
        |y| m.in_domain_slice(&y.as_slice()[..n]),
        y0,
        times,
        cfg,
    )?;
    let mut points = Vec::with_capacity(sol.states.len());
    let mut velocities = Vec::with_capacity(sol.states.len());
    for s in &sol.states {
        let p = ChartPoint::from_vector_unchecked(s.rows(0, n).into_owned());
        velocities.push(TangentVector { base: p.clone(), components: s.rows(n, n).into_owned() });
        points.push(p);
    }
    Ok(GeodesicPath {
        trajectory: Trajectory { times: sol.times, points, complete_to: sol.complete_to },
        velocities,
    })
}

/// Whether the open chart segment `p q` meets the slit `{(0, y) : y >= 0}`.
pub(crate) fn slit_crosses(p: &[f64], q: &[f64]) -> bool {
    let (px, py, qx, qy) = (p[0], p[1], q[0], q[1]);
    if (px < 0.0 && qx > 0.0) || (px > 0.0 && qx < 0.0) {
        // The crossing height has the sign of (py qx - px qy) / (qx - px).
        let cross = py * qx - px * qy;
        if qx > px {
            cross >= 0.0
        } else {
            cross <= 0.0
        }
    } else {
        false
    }
}

pub(crate) fn slit_distance_unchecked(p: &[f64], q: &[f64]) -> f64 {
    if slit_crosses(p, q) {
        p[0].hypot(p[1]) + q[0].hypot(q[1])
    } else {
        (q[0] - p[0]).hypot(q[1] - p[1])
    }
}

/// Distance in the slit plane: the straight-line distance unless the
/// segment meets the slit, in which case the shortest paths run through the
/// tip at the origin and the infimum is `|p| + |q|`.
pub fn slit_plane_distance(p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
    let m = crate::catalog::slit_plane();
    m.check_domain(p)?;
    m.check_domain(q)?;
    Ok(slit_distance_unchecked(p.as_slice(), q.as_slice()))
}

/// Riemannian distance and a minimizing segment. With a closed-form
/// distance the value comes from it and the segment from the numerical
/// minimizer; the segment is marked unconverged if the two disagree by
/// more than `1e-6` relative.
pub fn distance(m: &Manifold, p: &ChartPoint, q: &ChartPoint, cfg: &GeodesicConfig) -> Result<(f64, GeodesicSegment)> {
    m.check_domain(p)?;
    m.check_domain(q)?;
    let mut seg = minimize_geodesic(m, p, q, cfg)?;
    match m.analytic_distance(p, q) {
        Some(d) => {
            if (seg.length - d).abs() > 1e-6 * d.max(f64::MIN_POSITIVE) {
                seg.converged = false;
            }
            Ok((d, seg))
        }
        None => Ok((seg.length, seg)),
    }
}

/// Distance only; skips the minimizer when a closed form exists.
pub fn distance_value(m: &Manifold, p: &ChartPoint, q: &ChartPoint, cfg: &GeodesicConfig) -> Result<f64> {
    m.check_domain(p)?;
    m.check_domain(q)?;
    match m.analytic_distance(p, q) {
        Some(d) => Ok(d),
        None => Ok(minimize_geodesic(m, p, q, cfg)?.length),
    }
}

/// Numerical minimizing segment from `p` to `q`, ignoring any closed form.
///
/// Minimizes the discrete energy `N Σ Δ_iᵀ g(m_i) Δ_i` (midpoint metric)
/// over the interior nodes of a chart polyline. Each step solves the
/// block-tridiagonal system of the energy with the metric frozen and
/// backtracks until the energy decreases and the polyline stays in the
/// domain. Starts coarse and doubles the resolution, warm-starting from
/// the previous level, until `cfg.initial_nodes` is reached and then until
/// the length settles or `cfg.max_nodes` is hit. The result is resampled
/// uniformly in arclength.
pub fn minimize_geodesic(m: &Manifold, p: &ChartPoint, q: &ChartPoint, cfg: &GeodesicConfig) -> Result<GeodesicSegment> {
    m.check_domain(p)?;
    m.check_domain(q)?;
    if cfg.initial_nodes < 3 || cfg.max_nodes < cfg.initial_nodes {
        return Err(Error::Invalid(format!("bad node counts in {cfg:?}")));
    }
    if p == q {
        return Ok(GeodesicSegment { points: vec![p.clone(); cfg.initial_nodes], length: 0.0, converged: true });
    }
    let mut nodes = initial_polyline(m, p, q, 8)?;
    if !polyline_admissible(m, &nodes) {
        return Err(Error::NoPathFound { p: p.to_vec(), q: q.to_vec() });
    }
    let mut converged = descend(m, &mut nodes, cfg.max_iterations)?;
    while nodes.len() < cfg.initial_nodes {
        nodes = refine(&nodes);
        converged = descend(m, &mut nodes, cfg.max_iterations)?;
    }
    let mut length = curve_length(m, &nodes)?;
    while nodes.len() < cfg.max_nodes {
        let mut finer = refine(&nodes);
        let ok = descend(m, &mut finer, cfg.max_iterations)?;
        let finer_length = curve_length(m, &finer)?;
        let change = (finer_length - length).abs() / length.max(f64::MIN_POSITIVE);
        nodes = finer;
        length = finer_length;
        converged = ok;
        if change < cfg.rel_change {
            break;
        }
    }
    let resampled = reparametrize_by_arclength(m, &nodes, nodes.len())?;
    if polyline_admissible(m, &resampled) {
        nodes = resampled;
    }
    let length = curve_length(m, &nodes)?;
    Ok(GeodesicSegment { points: nodes, length, converged })
}

/// Straight chart polyline through any waypoints the manifold suggests,
/// with every waypoint a node and about `segments` segments in total.
fn initial_polyline(m: &Manifold, p: &ChartPoint, q: &ChartPoint, segments: usize) -> Result<Vec<ChartPoint>> {
    let mut corners = vec![p.clone()];
    for w in m.waypoints(p, q) {
        corners.push(ChartPoint::new(w)?);
    }
    corners.push(q.clone());
    let legs: Vec<f64> = corners.windows(2).map(|w| w[0].chart_distance(&w[1])).collect();
    let total: f64 = legs.iter().sum();
    let mut nodes = vec![p.clone()];
    for (w, leg) in corners.windows(2).zip(&legs) {
        let k = ((segments as f64 * leg / total).round() as usize).max(1);
        for i in 1..=k {
            nodes.push(w[0].lerp(&w[1], i as f64 / k as f64));
        }
    }
    let last = nodes.len() - 1;
    nodes[last] = q.clone();
    Ok(nodes)
}

fn refine(nodes: &[ChartPoint]) -> Vec<ChartPoint> {
    let mut out = Vec::with_capacity(2 * nodes.len() - 1);
    for w in nodes.windows(2) {
        out.push(w[0].clone());
        out.push(w[0].lerp(&w[1], 0.5));
    }
    out.push(nodes[nodes.len() - 1].clone());
    out
}

fn polyline_admissible(m: &Manifold, nodes: &[ChartPoint]) -> bool {
    nodes.windows(2).all(|w| m.segment_in_domain(&w[0], &w[1]))
}

struct EnergyState {
    energy: f64,
    /// Gradient with respect to the interior nodes.
    grad: Vec<DVector<f64>>,
    /// Metric at every segment midpoint.
    metrics: Vec<DMatrix<f64>>,
}

fn energy_state(m: &Manifold, nodes: &[ChartPoint]) -> Option<EnergyState> {
    let segs = nodes.len() - 1;
    let scale = segs as f64;
    let n = m.dim();
    let mut energy = 0.0;
    let mut metrics = Vec::with_capacity(segs);
    // Contribution of segment i to its left and right node gradients.
    let mut left = Vec::with_capacity(segs);
    let mut right = Vec::with_capacity(segs);
    for w in nodes.windows(2) {
        let mid = w[0].lerp(&w[1], 0.5);
        let g = m.metric_eval(&mid).ok()?;
        let dg = m.metric_partials(&mid).ok()?;
        let delta = w[1].coords() - w[0].coords();
        let g_delta = &g * &delta;
        energy += scale * delta.dot(&g_delta);
        let quad = DVector::from_fn(n, |k, _| 0.5 * scale * delta.dot(&(&dg[k] * &delta)));
        left.push(&quad - &g_delta * (2.0 * scale));
        right.push(&quad + &g_delta * (2.0 * scale));
        metrics.push(g);
    }
    let grad = (1..segs).map(|j| &right[j - 1] + &left[j]).collect();
    energy.is_finite().then_some(EnergyState { energy, grad, metrics })
}

/// Solves `H d = -grad` for the block-tridiagonal `H` with diagonal blocks
/// `2N (G_{j-1} + G_j)` and off-diagonal blocks `-2N G_j`.
fn newton_direction(state: &EnergyState) -> Option<Vec<DVector<f64>>> {
    let interior = state.grad.len();
    let scale = 2.0 * state.metrics.len() as f64;
    let g = &state.metrics;
    let mut diag_inv: Vec<DMatrix<f64>> = Vec::with_capacity(interior);
    let mut rhs: Vec<DVector<f64>> = Vec::with_capacity(interior);
    for j in 0..interior {
        // Node j + 1 touches segments j and j + 1.
        let mut d = (&g[j] + &g[j + 1]) * scale;
        let mut r = -&state.grad[j];
        if j > 0 {
            let b = &g[j] * (-scale);
            let bd = &b * &diag_inv[j - 1];
            d -= &bd * &b;
            r -= &bd * &rhs[j - 1];
        }
        diag_inv.push(d.try_inverse()?);
        rhs.push(r);
    }
    let mut out = vec![DVector::zeros(0); interior];
    for j in (0..interior).rev() {
        let mut r = rhs[j].clone();
        if j + 1 < interior {
            let b = &g[j + 1] * (-scale);
            r -= &b * &out[j + 1];
        }
        out[j] = &diag_inv[j] * r;
    }
    Some(out)
}

/// Energy descent at fixed resolution. Returns whether it converged.
fn descend(m: &Manifold, nodes: &mut [ChartPoint], max_iterations: usize) -> Result<bool> {
    let n_nodes = nodes.len();
    if n_nodes < 3 {
        return Ok(true);
    }
    let mut state = energy_state(m, nodes).ok_or_else(|| Error::NoPathFound {
        p: nodes[0].to_vec(),
        q: nodes[n_nodes - 1].to_vec(),
    })?;
    for _ in 0..max_iterations {
        let Some(dir) = newton_direction(&state) else {
            return Err(Error::Numerical("singular energy Hessian".into()));
        };
        let slope: f64 = dir.iter().zip(&state.grad).map(|(d, g)| d.dot(g)).sum();
        if -slope <= 1e-15 * state.energy {
            return Ok(true);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut blocked = false;
        for _ in 0..40 {
            let trial: Option<Vec<ChartPoint>> = std::iter::once(Some(nodes[0].clone()))
                .chain(
                    nodes[1..n_nodes - 1]
                        .iter()
                        .zip(&dir)
                        .map(|(c, d)| c.offset(&(d * alpha))),
                )
                .chain(std::iter::once(Some(nodes[n_nodes - 1].clone())))
                .collect();
            let trial = trial.filter(|t| polyline_admissible(m, t));
            blocked |= trial.is_none();
            if let Some(trial) = trial {
                if let Some(s) = energy_state(m, &trial) {
                    if s.energy <= state.energy + 1e-4 * alpha * slope {
                        accepted = Some((trial, s));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, s)) => {
                let gain = state.energy - s.energy;
                nodes.clone_from_slice(&trial);
                state = s;
                if gain <= 1e-15 * state.energy {
                    return Ok(true);
                }
            }
            // No admissible decrease: either a constrained minimum against
            // the domain boundary or the floor of a finite-difference gradient.
            None => return Ok(blocked || -slope <= 1e-10 * state.energy),
        }
    }
    Ok(false)
}
