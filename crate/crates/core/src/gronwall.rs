//! Gronwall certificates: estimate the separation rate `C_T` over the
//! region swept by a flowed tube (or over a coordinate box), then compare
//! measured distances `d(p(t), q(t))` against `d(p0, q0) e^{C_T t}`.
//!
//! All sup estimates are maxima over finite sample sets. They converge to
//! the true supremum under refinement but are lower bounds of it, never
//! rigorous upper bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flow::{flow_point, flow_seeds, uniform_times, Trajectory};
use crate::geodesic::{distance, distance_value, GeodesicConfig};
use crate::integrator::IntegratorConfig;
use crate::manifold::Manifold;
use crate::point::ChartPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Global,
    Submanifold,
    GeodesicTube,
    CurveTube,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Global => "global",
            StrategyKind::Submanifold => "submanifold",
            StrategyKind::GeodesicTube => "geodesic-tube",
            StrategyKind::CurveTube => "curve-tube",
        }
    }
}

/// Seeds whose flow sweeps the tube. A polyline is refined by inserting
/// chart midpoints; a point cloud is only refined in time.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedSet {
    Polyline(Vec<ChartPoint>),
    Cloud(Vec<ChartPoint>),
}

impl SeedSet {
    pub fn points(&self) -> &[ChartPoint] {
        match self {
            SeedSet::Polyline(p) | SeedSet::Cloud(p) => p,
        }
    }

    fn refined(&self) -> SeedSet {
        match self {
            SeedSet::Polyline(p) if p.len() >= 2 => {
                let mut out = Vec::with_capacity(2 * p.len() - 1);
                for w in p.windows(2) {
                    out.push(w[0].clone());
                    out.push(w[0].lerp(&w[1], 0.5));
                }
                out.push(p[p.len() - 1].clone());
                SeedSet::Polyline(out)
            }
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    pub initial_time_samples: usize,
    pub rel_change: f64,
    pub max_rounds: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self { initial_time_samples: 17, rel_change: 1e-4, max_rounds: 6 }
    }
}

/// Coordinate box for the global estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub initial_per_dim: usize,
    /// Best samples whose neighborhoods are refined each round.
    pub candidates: usize,
    pub max_rounds: usize,
    pub rel_change: f64,
    /// Use the field's closed-form sup when it has one.
    pub use_hint: bool,
}

impl SamplerConfig {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper, initial_per_dim: 33, candidates: 32, max_rounds: 6, rel_change: 1e-4, use_hint: true }
    }
}

/// Result of a sup estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    pub samples: Vec<ChartPoint>,
    pub converged: bool,
    pub rounds: usize,
    /// Set when the tube was truncated at a domain exit (seed index, time).
    pub truncated_at: Option<(usize, f64)>,
}

fn max_rate(m: &Manifold, x: &VectorField, points: &[ChartPoint]) -> Result<f64> {
    let rates = points
        .par_iter()
        .map(|p| m.field_rate(x, p))
        .collect::<Result<Vec<f64>>>()?;
    // Sequential fold keeps the reduction order fixed.
    Ok(rates.into_iter().fold(0.0, f64::max))
}

/// `C_T = max ||∇X||_g` over the flow of `seeds` on `[0, T]`, refining
/// the seed and time grids until the max settles. Fails with
/// `IncompleteFlow` if the tube leaves the domain before `T`.
pub fn estimate_ct_tube(
    m: &Manifold,
    x: &VectorField,
    seeds: &SeedSet,
    t_end: f64,
    refine: &RefinementConfig,
    integ: &IntegratorConfig,
) -> Result<RateEstimate> {
    tube_estimate(m, x, seeds, t_end, refine, integ, false)
}

/// Like [`estimate_ct_tube`], but on a domain exit keeps the part of the
/// tube swept before the exit time.
pub fn estimate_ct_tube_partial(
    m: &Manifold,
    x: &VectorField,
    seeds: &SeedSet,
    t_end: f64,
    refine: &RefinementConfig,
    integ: &IntegratorConfig,
) -> Result<RateEstimate> {
    tube_estimate(m, x, seeds, t_end, refine, integ, true)
}

fn tube_estimate(
    m: &Manifold,
    x: &VectorField,
    seeds: &SeedSet,
    t_end: f64,
    refine: &RefinementConfig,
    integ: &IntegratorConfig,
    allow_incomplete: bool,
) -> Result<RateEstimate> {
    if !(t_end > 0.0) {
        return Err(Error::Invalid(format!("horizon must be positive, got {t_end}")));
    }
    if seeds.points().is_empty() {
        return Err(Error::Invalid("no seed points".into()));
    }
    let polyline = matches!(seeds, SeedSet::Polyline(_));
    let mut seeds = seeds.clone();
    let mut n_times = refine.initial_time_samples.max(2);
    let mut previous: Option<f64> = None;
    let mut round = 0;
    loop {
        let times = uniform_times(t_end, n_times);
        let flows = flow_seeds(m, x, seeds.points(), &times, integ, polyline)?;
        if let (Some((tau_index, time)), false) = (flows.exit, allow_incomplete) {
            return Err(Error::IncompleteFlow { tau_index, time });
        }
        let rows = flows.valid_rows(&times).max(1);
        let samples: Vec<ChartPoint> = flows
            .trajectories
            .iter()
            .flat_map(|tr| tr.points.iter().take(rows).cloned())
            .collect();
        let value = max_rate(m, x, &samples)?;
        let converged = previous.is_some_and(|prev| (value - prev).abs() <= refine.rel_change * value.abs());
        if converged || round >= refine.max_rounds {
            return Ok(RateEstimate { value, samples, converged, rounds: round, truncated_at: flows.exit });
        }
        previous = Some(value);
        round += 1;
        seeds = seeds.refined();
        n_times = 2 * n_times - 1;
    }
}

/// Estimate of `sup ||∇X||_g` over a coordinate box: a coarse grid, then
/// rounds that halve the spacing around the best samples and polish them
/// with a local pattern search. The result is a
/// lower bound of the supremum over the box. A closed-form sup supplied by
/// the field is returned directly.
pub fn estimate_ct_global(m: &Manifold, x: &VectorField, sampler: &SamplerConfig) -> Result<RateEstimate> {
    let n = m.dim();
    if sampler.lower.len() != n || sampler.upper.len() != n {
        return Err(Error::Dimension { expected: n, got: sampler.lower.len().min(sampler.upper.len()) });
    }
    if sampler.lower.iter().zip(&sampler.upper).any(|(a, b)| !(a < b)) || sampler.initial_per_dim < 2 {
        return Err(Error::Invalid("sampling box must be non-degenerate".into()));
    }
    if sampler.use_hint {
        if let Some(v) = x.sup_hint(m) {
            return Ok(RateEstimate { value: v, samples: Vec::new(), converged: true, rounds: 0, truncated_at: None });
        }
    }
    let k = sampler.initial_per_dim;
    let mut spacing: Vec<f64> = sampler
        .lower
        .iter()
        .zip(&sampler.upper)
        .map(|(a, b)| (b - a) / (k - 1) as f64)
        .collect();
    let grid: Vec<Vec<f64>> = (0..k.pow(n as u32))
        .map(|mut idx| {
            (0..n)
                .map(|d| {
                    let i = idx % k;
                    idx /= k;
                    if i == k - 1 {
                        sampler.upper[d]
                    } else {
                        sampler.lower[d] + spacing[d] * i as f64
                    }
                })
                .collect()
        })
        .collect();
    let mut scored = score(m, x, grid);
    let mut best = scored.iter().map(|s| s.0).fold(0.0, f64::max);
    let mut converged = false;
    let mut round = 0;
    while round < sampler.max_rounds {
        round += 1;
        spacing.iter_mut().for_each(|h| *h *= 0.5);
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let centers: Vec<Vec<f64>> = scored.iter().take(sampler.candidates).map(|s| s.1.to_vec()).collect();
        let mut local = Vec::new();
        for c in &centers {
            for mut idx in 0..5usize.pow(n as u32) {
                let p: Vec<f64> = (0..n)
                    .map(|d| {
                        let o = (idx % 5) as f64 - 2.0;
                        idx /= 5;
                        (c[d] + o * spacing[d]).clamp(sampler.lower[d], sampler.upper[d])
                    })
                    .collect();
                local.push(p);
            }
        }
        scored.extend(score(m, x, local));
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let starts: Vec<(f64, ChartPoint)> = scored.iter().take(sampler.candidates).cloned().collect();
        let polished: Vec<Vec<(f64, ChartPoint)>> = starts
            .into_par_iter()
            .map(|start| compass_search(m, x, start, &spacing, sampler))
            .collect();
        scored.extend(polished.into_iter().flatten());
        let value = scored.iter().map(|s| s.0).fold(0.0, f64::max);
        let change = (value - best).abs();
        best = value;
        // The first refinement can miss the peak entirely; require two.
        if round >= 2 && change <= sampler.rel_change * value.abs() {
            converged = true;
            break;
        }
    }
    Ok(RateEstimate {
        value: best,
        samples: scored.into_iter().map(|s| s.1).collect(),
        converged,
        rounds: round,
        truncated_at: None,
    })
}

/// Coordinate pattern search for a local maximum of the rate, starting
/// at `start` with steps `spacing`, halving them down to `1e-9` of the box.
/// Returns every admissible point it evaluated.
fn compass_search(
    m: &Manifold,
    x: &VectorField,
    start: (f64, ChartPoint),
    spacing: &[f64],
    sampler: &SamplerConfig,
) -> Vec<(f64, ChartPoint)> {
    let n = spacing.len();
    let (mut best, mut at) = (start.0, start.1.to_vec());
    let mut step = spacing.to_vec();
    let floor: Vec<f64> = sampler.lower.iter().zip(&sampler.upper).map(|(a, b)| 1e-9 * (b - a)).collect();
    let mut visited = Vec::new();
    while step.iter().zip(&floor).any(|(s, f)| s > f) {
        let mut moved = false;
        for d in 0..n {
            for sign in [1.0, -1.0] {
                let mut c = at.clone();
                c[d] = (c[d] + sign * step[d]).clamp(sampler.lower[d], sampler.upper[d]);
                let Some((r, p)) = score(m, x, vec![c.clone()]).pop() else { continue };
                visited.push((r, p));
                if r > best {
                    best = r;
                    at = c;
                    moved = true;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    visited
}

/// Rates at admissible points; points outside the domain or too close to
/// its boundary for finite differences are skipped.
fn score(m: &Manifold, x: &VectorField, points: Vec<Vec<f64>>) -> Vec<(f64, ChartPoint)> {
    let rates: Vec<Option<(f64, ChartPoint)>> = points
        .into_par_iter()
        .map(|c| {
            let p = ChartPoint::new(c).ok()?;
            let r = m.field_rate(x, &p).ok()?;
            Some((r, p))
        })
        .collect();
    rates.into_iter().flatten().collect()
}

/// How `C_T` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Sup over a coordinate box (complete field, global bound).
    Global(SamplerConfig),
    /// Flow of user-supplied samples of a submanifold `N` containing both
    /// points with `d_N(p0, q0) = d(p0, q0)`; the latter is assumed, not checked.
    Submanifold(SeedSet),
    /// Flow of a minimizing geodesic segment from `p0` to `q0`.
    GeodesicTube,
    /// Flow of an arbitrary curve from `p0` to `q0`.
    CurveTube(Vec<ChartPoint>),
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Global(_) => StrategyKind::Global,
            Strategy::Submanifold(_) => StrategyKind::Submanifold,
            Strategy::GeodesicTube => StrategyKind::GeodesicTube,
            Strategy::CurveTube(_) => StrategyKind::CurveTube,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub integrator: IntegratorConfig,
    pub geodesic: GeodesicConfig,
    pub refinement: RefinementConfig,
    /// Uniform comparison times in `[0, T]`.
    pub time_samples: usize,
    /// Estimate on the partial tube and compare on the common time range
    /// instead of failing when a flow is incomplete.
    pub force_incomplete: bool,
    /// Relative slack; defaults to `1e-6 + 10 rel_tol`.
    pub slack: Option<f64>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            geodesic: GeodesicConfig::default(),
            refinement: RefinementConfig::default(),
            time_samples: 601,
            force_incomplete: false,
            slack: None,
        }
    }
}

impl CertifyConfig {
    pub fn slack(&self) -> f64 {
        self.slack.unwrap_or(1e-6 + 10.0 * self.integrator.rel_tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallCertificate {
    pub strategy: StrategyKind,
    pub c_t: f64,
    pub d0: f64,
    pub horizon: f64,
    /// Points where `||∇X||_g` was evaluated; empty for closed-form sups.
    pub tube_samples: Vec<ChartPoint>,
    pub refinement_converged: bool,
    /// Set when certification was forced past a domain exit.
    pub incomplete_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    pub bound: Vec<f64>,
    pub first_violation: Option<f64>,
    pub slack: f64,
}

impl ViolationReport {
    pub fn violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

/// Compares `d(p(t), q(t))` with `d0 e^{C_T t}` on the common time grid,
/// flagging the first time where `measured > bound (1 + slack)`.
pub fn check_bound<D>(traj_p: &Trajectory, traj_q: &Trajectory, d_fn: D, cert: &GronwallCertificate, slack: f64) -> Result<ViolationReport>
where
    D: Fn(&ChartPoint, &ChartPoint) -> Result<f64>,
{
    let n = traj_p.times.len().min(traj_q.times.len());
    if n == 0 || traj_p.times[..n] != traj_q.times[..n] {
        return Err(Error::GridMismatch);
    }
    let times = traj_p.times[..n].to_vec();
    let measured = traj_p.points[..n]
        .iter()
        .zip(&traj_q.points[..n])
        .map(|(p, q)| d_fn(p, q))
        .collect::<Result<Vec<f64>>>()?;
    let bound: Vec<f64> = times.iter().map(|t| cert.d0 * (cert.c_t * t).exp()).collect();
    let first_violation = times
        .iter()
        .zip(measured.iter().zip(&bound))
        .find(|(_, (m, b))| **m > **b * (1.0 + slack))
        .map(|(t, _)| *t);
    Ok(ViolationReport { times, measured, bound, first_violation, slack })
}

/// Builds a certificate for the pair `p0`, `q0` over `[0, T]` and checks it
/// against the measured separation of their trajectories.
pub fn certify_pair(
    m: &Manifold,
    x: &VectorField,
    p0: &ChartPoint,
    q0: &ChartPoint,
    t_end: f64,
    strategy: &Strategy,
    cfg: &CertifyConfig,
) -> Result<(GronwallCertificate, ViolationReport)> {
    m.check_domain(p0)?;
    m.check_domain(q0)?;
    if !(t_end > 0.0) {
        return Err(Error::Invalid(format!("horizon must be positive, got {t_end}")));
    }
    let tube = |seeds: &SeedSet| {
        if cfg.force_incomplete {
            estimate_ct_tube_partial(m, x, seeds, t_end, &cfg.refinement, &cfg.integrator)
        } else {
            estimate_ct_tube(m, x, seeds, t_end, &cfg.refinement, &cfg.integrator)
        }
    };
    let (d0, estimate) = match strategy {
        Strategy::Global(sampler) => (distance_value(m, p0, q0, &cfg.geodesic)?, estimate_ct_global(m, x, sampler)?),
        Strategy::Submanifold(seeds) => (distance_value(m, p0, q0, &cfg.geodesic)?, tube(seeds)?),
        Strategy::GeodesicTube => {
            let (d0, seg) = distance(m, p0, q0, &cfg.geodesic)?;
            if !seg.converged {
                return Err(Error::Numerical("minimizing geodesic segment did not converge".into()));
            }
            (d0, tube(&SeedSet::Polyline(seg.points))?)
        }
        Strategy::CurveTube(curve) => (distance_value(m, p0, q0, &cfg.geodesic)?, tube(&SeedSet::Polyline(curve.clone()))?),
    };

    let times = uniform_times(t_end, cfg.time_samples);
    let traj_p = flow_point(m, x, p0, &times, &cfg.integrator)?;
    let traj_q = flow_point(m, x, q0, &times, &cfg.integrator)?;
    let mut incomplete_at = estimate.truncated_at.map(|(_, t)| t);
    for (i, tr) in [&traj_p, &traj_q].into_iter().enumerate() {
        if !tr.reached(t_end) {
            if !cfg.force_incomplete {
                return Err(Error::IncompleteFlow { tau_index: i, time: tr.complete_to });
            }
            incomplete_at = Some(incomplete_at.map_or(tr.complete_to, |t: f64| t.min(tr.complete_to)));
        }
    }
    let cert = GronwallCertificate {
        strategy: strategy.kind(),
        c_t: estimate.value,
        d0,
        horizon: t_end,
        tube_samples: estimate.samples,
        refinement_converged: estimate.converged,
        incomplete_at,
    };
    let report = check_bound(&traj_p, &traj_q, |p, q| distance_value(m, p, q, &cfg.geodesic), &cert, cfg.slack())?;
    Ok((cert, report))
}

/// `r0 e^{C_T t}` rounded upward: the guard factor covers the rounding of
/// the product `C_T t`, of `exp` and of the final multiplication.
/// Overflow yields `+inf`.
pub fn enclosure_radius(r0: f64, c_t: f64, t: f64) -> Result<f64> {
    if !(r0 >= 0.0) || !(t >= 0.0) || !(c_t >= 0.0) || !r0.is_finite() || !c_t.is_finite() || !t.is_finite() {
        return Err(Error::Invalid(format!("enclosure radius needs finite r0, C_T, t >= 0 (got {r0}, {c_t}, {t})")));
    }
    let exponent = c_t * t;
    if r0 == 0.0 || exponent == 0.0 {
        return Ok(r0);
    }
    let guard = 1.0 + (4.0 + exponent) * f64::EPSILON;
    let r = r0 * exponent.exp() * guard;
    Ok(if r.is_finite() { r } else { f64::INFINITY })
}

/// JSON shape of a certificate together with its report.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateDocument {
    pub strategy: StrategyKind,
    #[serde(rename = "C_T")]
    pub c_t: f64,
    pub d0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub converged: bool,
    pub first_violation: Option<f64>,
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    pub bound: Vec<f64>,
}

impl CertificateDocument {
    pub fn new(cert: &GronwallCertificate, report: &ViolationReport) -> Self {
        Self {
            strategy: cert.strategy,
            c_t: cert.c_t,
            d0: cert.d0,
            horizon: cert.horizon,
            converged: cert.refinement_converged,
            first_violation: report.first_violation,
            times: report.times.clone(),
            measured: report.measured.clone(),
            bound: report.bound.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        crate::io::to_json_g17(self).expect("certificate serializes")
    }
}
