//! Flows of vector fields: single trajectories, flowed curve families
//! `c(t, τ) = Fl_t(c0(τ))`, curve lengths and the length evolution `l(t)`.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::integrator::{integrate, IntegratorConfig};
use crate::manifold::Manifold;
use crate::point::{ChartPoint, TangentVector};

/// Samples `p(t) = Fl_t(p0)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<ChartPoint>,
    /// Largest time reached before the solution left the domain. Equals the
    /// last sample time exactly when no exit occurred.
    pub complete_to: f64,
}

impl Trajectory {
    pub fn reached(&self, t_end: f64) -> bool {
        self.complete_to >= t_end
    }
}

/// The two-parameter surface `c(t, τ)`; `grid[i][j]` is the point at
/// `times[i]`, `params[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFamily {
    pub times: Vec<f64>,
    pub params: Vec<f64>,
    pub grid: Vec<Vec<ChartPoint>>,
}

/// `n` uniformly spaced times from 0 to `t_end`, both included.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let mut t: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
    t[n - 1] = t_end;
    t
}

fn check_times(times: &[f64]) -> Result<f64> {
    match times {
        [first, .., last] if *first == 0.0 && *last > 0.0 => Ok(*last),
        _ => Err(Error::Invalid("time grid must start at 0 and end at some T > 0".into())),
    }
}

/// Integrates `p' = X(p)` from `p0`, sampled at `times` (starting at 0).
/// Stops early, with `complete_to < T`, if the solution leaves the domain
/// or escapes to infinity.
pub fn flow_point(m: &Manifold, x: &VectorField, p0: &ChartPoint, times: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    m.check_domain(p0)?;
    if x.dim() != m.dim() {
        return Err(Error::Dimension { expected: m.dim(), got: x.dim() });
    }
    check_times(times)?;
    let sol = integrate(
        |y| {
            let s = y.as_slice();
            if m.in_domain_slice(s) {
                x.eval_slice(s).ok()
            } else {
                None
            }
        },
        |y| m.in_domain_slice(y.as_slice()),
        p0.coords().clone(),
        times,
        cfg,
    )?;
    Ok(Trajectory {
        times: sol.times,
        points: sol.states.into_iter().map(ChartPoint::from_vector_unchecked).collect(),
        complete_to: sol.complete_to,
    })
}

/// Independent flows of a set of seed points on a shared time grid.
#[derive(Debug, Clone)]
pub(crate) struct SeedFlows {
    pub trajectories: Vec<Trajectory>,
    /// Earliest failure: the seed index and the time at which the flowed
    /// set stops being admissible.
    pub exit: Option<(usize, f64)>,
}

impl SeedFlows {
    /// Number of leading time samples on which every seed is admissible.
    pub fn valid_rows(&self, times: &[f64]) -> usize {
        match self.exit {
            None => times.len(),
            Some((_, t_exit)) => times.iter().take_while(|&&t| t < t_exit).count(),
        }
    }
}

/// Flows every seed over `times`. With `polyline`, consecutive seeds are
/// joined by chart segments that must also stay in the domain.
pub(crate) fn flow_seeds(
    m: &Manifold,
    x: &VectorField,
    seeds: &[ChartPoint],
    times: &[f64],
    cfg: &IntegratorConfig,
    polyline: bool,
) -> Result<SeedFlows> {
    let t_end = check_times(times)?;
    for p in seeds {
        m.check_domain(p)?;
    }
    let trajectories = seeds
        .par_iter()
        .map(|p| flow_point(m, x, p, times, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut exit: Option<(usize, f64)> = None;
    let mut note = |j: usize, t: f64| {
        if exit.is_none_or(|(_, te)| t < te) {
            exit = Some((j, t));
        }
    };
    for (j, tr) in trajectories.iter().enumerate() {
        if !tr.reached(t_end) {
            note(j, tr.complete_to);
        }
    }
    if polyline {
        let rows = trajectories.iter().map(|tr| tr.times.len()).min().unwrap_or(0);
        'rows: for (i, &t) in times.iter().enumerate().take(rows) {
            for j in 0..seeds.len().saturating_sub(1) {
                let (a, b) = (&trajectories[j].points[i], &trajectories[j + 1].points[i]);
                if !m.segment_in_domain(a, b) {
                    note(j, t);
                    break 'rows;
                }
            }
        }
    }
    Ok(SeedFlows { trajectories, exit })
}

/// Flows each sample of the curve `c0` over `t_samples` uniform times in
/// `[0, T]`. Fails with `IncompleteFlow` if any part of the flowed curve
/// leaves the domain before `T`. Parameters are the cumulative arclength
/// of `c0`.
pub fn flow_curve(
    m: &Manifold,
    x: &VectorField,
    c0: &[ChartPoint],
    t_end: f64,
    cfg: &IntegratorConfig,
    t_samples: usize,
) -> Result<CurveFamily> {
    if c0.len() < 2 {
        return Err(Error::Invalid("a curve needs at least two samples".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::Invalid(format!("flow horizon must be positive, got {t_end}")));
    }
    let params = arclength_params(m, c0)?;
    let times = uniform_times(t_end, t_samples);
    let flows = flow_seeds(m, x, c0, &times, cfg, true)?;
    if let Some((tau_index, time)) = flows.exit {
        return Err(Error::IncompleteFlow { tau_index, time });
    }
    let grid = (0..times.len())
        .map(|i| flows.trajectories.iter().map(|tr| tr.points[i].clone()).collect())
        .collect();
    Ok(CurveFamily { times, params, grid })
}

const GAUSS_NODES: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];

fn segment_length(m: &Manifold, a: &ChartPoint, b: &ChartPoint) -> Result<f64> {
    let delta = b.coords() - a.coords();
    let mut total = 0.0;
    for s in GAUSS_NODES {
        let node = a.lerp(b, s);
        let g = m.metric_eval(&node)?;
        total += 0.5 * delta.dot(&(&g * &delta)).max(0.0).sqrt();
    }
    Ok(total)
}

/// Length of the chart polyline through `pts`, integrating `||c'||_g` on
/// each segment with the two-point Gauss–Legendre rule.
pub fn curve_length(m: &Manifold, pts: &[ChartPoint]) -> Result<f64> {
    if pts.len() < 2 {
        return Err(Error::Invalid("a curve needs at least two samples".into()));
    }
    for p in pts {
        m.check_domain(p)?;
    }
    pts.windows(2).map(|w| segment_length(m, &w[0], &w[1])).sum()
}

/// Cumulative arclength at every sample of the polyline.
pub fn arclength_params(m: &Manifold, pts: &[ChartPoint]) -> Result<Vec<f64>> {
    for p in pts {
        m.check_domain(p)?;
    }
    let mut params = Vec::with_capacity(pts.len());
    let mut s = 0.0;
    params.push(0.0);
    for w in pts.windows(2) {
        s += segment_length(m, &w[0], &w[1])?;
        params.push(s);
    }
    Ok(params)
}

/// Resamples the polyline at `n` points equally spaced in arclength.
pub fn reparametrize_by_arclength(m: &Manifold, pts: &[ChartPoint], n: usize) -> Result<Vec<ChartPoint>> {
    if pts.len() < 2 || n < 2 {
        return Err(Error::Invalid("arclength resampling needs at least two points".into()));
    }
    let params = arclength_params(m, pts)?;
    let total = *params.last().unwrap();
    if total == 0.0 {
        return Ok(vec![pts[0].clone(); n]);
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        if k == n - 1 {
            out.push(pts[pts.len() - 1].clone());
            break;
        }
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 2 < params.len() && params[seg + 1] < s {
            seg += 1;
        }
        let len = params[seg + 1] - params[seg];
        let frac = if len > 0.0 { ((s - params[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(pts[seg].lerp(&pts[seg + 1], frac));
    }
    Ok(out)
}

/// `(t, l(t))` for every row of the family.
pub fn length_evolution(m: &Manifold, fam: &CurveFamily) -> Result<Vec<(f64, f64)>> {
    fam.times
        .iter()
        .zip(&fam.grid)
        .map(|(&t, row)| Ok((t, curve_length(m, row)?)))
        .collect()
}

/// `||∇_{∂t} c_τ - ∇_{∂τ} c_t||_g` at grid node `(ti, tj)`.
///
/// `c_τ` comes from central differences in τ and is differenced again in
/// t; `c_t = X(c)` is differenced in τ. The Christoffel corrections of the
/// two sides coincide, so the residual measures the O(Δt²) truncation
/// error of the grid and vanishes under refinement.
pub fn torsion_swap_residual(m: &Manifold, x: &VectorField, fam: &CurveFamily, ti: usize, tj: usize) -> Result<f64> {
    let nt = fam.times.len();
    let np = fam.params.len();
    if ti == 0 || tj == 0 || ti + 1 >= nt || tj + 1 >= np {
        return Err(Error::Index(ti, tj));
    }
    let c = |i: usize, j: usize| fam.grid[i][j].coords();
    let dtau = fam.params[tj + 1] - fam.params[tj - 1];
    let dt = fam.times[ti + 1] - fam.times[ti - 1];
    let c_tau = |i: usize| (c(i, tj + 1) - c(i, tj - 1)) / dtau;

    let d_t_c_tau: DVector<f64> = (c_tau(ti + 1) - c_tau(ti - 1)) / dt;
    let x_plus = x.eval(&fam.grid[ti][tj + 1])?;
    let x_minus = x.eval(&fam.grid[ti][tj - 1])?;
    let d_tau_c_t: DVector<f64> = (x_plus - x_minus) / dtau;

    let here = &fam.grid[ti][tj];
    let gamma = m.christoffel(here)?;
    let correction = gamma.contract(&x.eval(here)?, &c_tau(ti));
    let lhs = d_t_c_tau + &correction;
    let rhs = d_tau_c_t + &correction;
    m.tangent_norm(&TangentVector { base: here.clone(), components: lhs - rhs })
}
