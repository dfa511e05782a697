//! Riemannian manifolds covered by one chart, and the pointwise geometry
//! needed for separation bounds: metric, Christoffel symbols, norms,
//! covariant differentials and their mapping norms.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::point::{ChartPoint, LinearMap, TangentVector};

pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&[f64]) -> Christoffel + Send + Sync>;
pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type SegmentFn = Arc<dyn Fn(&[f64], &[f64]) -> bool + Send + Sync>;
pub type WaypointFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// Relative central-difference step for a coordinate of magnitude `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Christoffel symbols `Γ^k_ij` at one point, stored densely as `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[(k * self.n + i) * self.n + j] = value;
    }

    /// `out^k = Γ^k_ij u^i v^j`.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.get(k, i, j) * u[i] * v[j];
                }
            }
            s
        })
    }

    /// Largest `|Γ^k_ij - Γ^k_ji|`.
    pub fn lower_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

/// A Riemannian manifold `(M, g)` described by one chart whose image is the
/// open set where `in_domain` holds.
#[derive(Clone)]
pub struct Manifold {
    name: String,
    dim: usize,
    metric: MetricFn,
    domain: DomainFn,
    christoffel_analytic: Option<ChristoffelFn>,
    distance_analytic: Option<DistanceFn>,
    segment_admissible: Option<SegmentFn>,
    waypoints: Option<WaypointFn>,
}

impl fmt::Debug for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manifold")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("christoffel_analytic", &self.christoffel_analytic.is_some())
            .field("distance_analytic", &self.distance_analytic.is_some())
            .finish()
    }
}

impl Manifold {
    pub fn new<G, D>(name: impl Into<String>, dim: usize, metric: G, domain: D) -> Self
    where
        G: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        D: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        assert!(dim > 0, "manifold dimension must be positive");
        Self {
            name: name.into(),
            dim,
            metric: Arc::new(metric),
            domain: Arc::new(domain),
            christoffel_analytic: None,
            distance_analytic: None,
            segment_admissible: None,
            waypoints: None,
        }
    }

    pub fn with_christoffel<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> Christoffel + Send + Sync + 'static,
    {
        self.christoffel_analytic = Some(Arc::new(f));
        self
    }

    pub fn with_distance<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.distance_analytic = Some(Arc::new(f));
        self
    }

    /// Exact test for whether the chart segment between two domain points
    /// stays in the domain. Without it, segments are checked by sampling.
    pub fn with_segment_check<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> bool + Send + Sync + 'static,
    {
        self.segment_admissible = Some(Arc::new(f));
        self
    }

    /// Intermediate chart points used to build an admissible initial
    /// polyline when the straight chart segment leaves the domain.
    pub fn with_waypoints<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    {
        self.waypoints = Some(Arc::new(f));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_christoffel(&self) -> bool {
        self.christoffel_analytic.is_some()
    }

    pub fn has_analytic_distance(&self) -> bool {
        self.distance_analytic.is_some()
    }

    pub fn in_domain(&self, p: &ChartPoint) -> bool {
        self.in_domain_slice(p.as_slice())
    }

    pub(crate) fn in_domain_slice(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|c| c.is_finite()) && (self.domain)(x)
    }

    /// Whether the whole chart segment `[a, b]` lies in the domain.
    pub fn segment_in_domain(&self, a: &ChartPoint, b: &ChartPoint) -> bool {
        if !self.in_domain(a) || !self.in_domain(b) {
            return false;
        }
        match &self.segment_admissible {
            Some(check) => check(a.as_slice(), b.as_slice()),
            None => (1..16).all(|i| self.in_domain(&a.lerp(b, i as f64 / 16.0))),
        }
    }

    pub(crate) fn waypoints(&self, p: &ChartPoint, q: &ChartPoint) -> Vec<Vec<f64>> {
        self.waypoints
            .as_ref()
            .map(|w| w(p.as_slice(), q.as_slice()))
            .unwrap_or_default()
    }

    pub(crate) fn analytic_distance(&self, p: &ChartPoint, q: &ChartPoint) -> Option<f64> {
        self.distance_analytic.as_ref().map(|d| d(p.as_slice(), q.as_slice()))
    }

    pub(crate) fn check_domain(&self, p: &ChartPoint) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: p.dim() });
        }
        if !self.in_domain(p) {
            return Err(self.domain_error(p.as_slice()));
        }
        Ok(())
    }

    fn domain_error(&self, x: &[f64]) -> Error {
        Error::Domain { manifold: self.name.clone(), coords: x.to_vec() }
    }

    /// Every point `p ± 2h e_i` must be admissible for a central difference.
    fn check_stencil(&self, p: &ChartPoint) -> Result<()> {
        let x = p.as_slice();
        let mut y = x.to_vec();
        for i in 0..self.dim {
            let h = 2.0 * fd_step(x[i]);
            for s in [-h, h] {
                y[i] = x[i] + s;
                if !self.in_domain_slice(&y) {
                    return Err(self.domain_error(&y));
                }
            }
            y[i] = x[i];
        }
        Ok(())
    }

    fn raw_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = (self.metric)(x);
        if g.nrows() != self.dim || g.ncols() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: g.nrows() });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("metric of {} is not finite at {x:?}", self.name)));
        }
        Ok((&g + g.transpose()) * 0.5)
    }

    /// The metric tensor `g_ij(p)`, symmetrized.
    pub fn metric_eval(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_domain(p)?;
        self.raw_metric(p.as_slice())
    }

    /// `g(u, v)` at `p` for chart component vectors.
    pub fn inner(&self, p: &ChartPoint, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let g = self.metric_eval(p)?;
        Ok(u.dot(&(&g * v)))
    }

    /// `||v||_g`.
    pub fn tangent_norm(&self, v: &TangentVector) -> Result<f64> {
        let g = self.metric_eval(&v.base)?;
        Ok(v.components.dot(&(&g * &v.components)).max(0.0).sqrt())
    }

    /// Christoffel symbols of the Levi-Civita connection at `p`. Uses the
    /// closed form when available, else central differences of the metric.
    pub fn christoffel(&self, p: &ChartPoint) -> Result<Christoffel> {
        self.check_domain(p)?;
        match &self.christoffel_analytic {
            Some(gamma) => Ok(gamma(p.as_slice())),
            None => self.christoffel_finite_difference(p, None),
        }
    }

    /// Christoffel symbols from central differences of `g` with step `h`
    /// (default [`fd_step`] per coordinate), ignoring any closed form.
    pub fn christoffel_finite_difference(&self, p: &ChartPoint, h: Option<f64>) -> Result<Christoffel> {
        self.check_domain(p)?;
        let n = self.dim;
        let dg = match h {
            Some(h) => {
                let x = p.as_slice();
                let mut y = x.to_vec();
                for i in 0..n {
                    for s in [-2.0 * h, 2.0 * h] {
                        y[i] = x[i] + s;
                        if !self.in_domain_slice(&y) {
                            return Err(self.domain_error(&y));
                        }
                    }
                    y[i] = x[i];
                }
                self.metric_partials_fd(p, |_| h)?
            }
            None => {
                self.check_stencil(p)?;
                self.metric_partials_fd(p, fd_step)?
            }
        };
        let g = self.raw_metric(p.as_slice())?;
        let g_inv = g
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("metric of {} is not positive definite", self.name)))?
            .inverse();
        let mut gamma = Christoffel::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gamma.set(k, i, j, 0.5 * s);
                    gamma.set(k, j, i, 0.5 * s);
                }
            }
        }
        Ok(gamma)
    }

    fn metric_partials_fd(&self, p: &ChartPoint, step: impl Fn(f64) -> f64) -> Result<Vec<DMatrix<f64>>> {
        let x = p.as_slice();
        let mut y = x.to_vec();
        (0..self.dim)
            .map(|k| {
                let h = step(x[k]);
                y[k] = x[k] + h;
                let plus = self.raw_metric(&y)?;
                y[k] = x[k] - h;
                let minus = self.raw_metric(&y)?;
                y[k] = x[k];
                Ok((plus - minus) / (2.0 * h))
            })
            .collect()
    }

    /// Partial derivatives `∂_k g` of the metric. With closed-form
    /// Christoffels these follow from metric compatibility.
    pub fn metric_partials(&self, p: &ChartPoint) -> Result<Vec<DMatrix<f64>>> {
        self.check_domain(p)?;
        let n = self.dim;
        match &self.christoffel_analytic {
            Some(gamma) => {
                let gamma = gamma(p.as_slice());
                let g = self.raw_metric(p.as_slice())?;
                Ok((0..n)
                    .map(|k| {
                        DMatrix::from_fn(n, n, |i, j| {
                            (0..n)
                                .map(|l| g[(i, l)] * gamma.get(l, k, j) + g[(j, l)] * gamma.get(l, k, i))
                                .sum()
                        })
                    })
                    .collect())
            }
            None => {
                self.check_stencil(p)?;
                self.metric_partials_fd(p, fd_step)
            }
        }
    }

    /// Chart Jacobian `∂_j X^i` of a field at `p`.
    pub fn field_jacobian(&self, x: &VectorField, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_domain(p)?;
        if x.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.dim() });
        }
        if let Some(j) = x.analytic_jacobian(p.as_slice()) {
            if j.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("Jacobian of `{}` is not finite", x.name())));
            }
            return Ok(j);
        }
        self.check_stencil(p)?;
        let n = self.dim;
        let c = p.as_slice();
        let mut y = c.to_vec();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = fd_step(c[j]);
            y[j] = c[j] + h;
            let plus = x.eval_slice(&y)?;
            y[j] = c[j] - h;
            let minus = x.eval_slice(&y)?;
            y[j] = c[j];
            jac.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        Ok(jac)
    }

    /// The covariant differential `∇X(p)`: `(∇X)^i_j = ∂_j X^i + Γ^i_jk X^k`.
    pub fn covariant_differential(&self, x: &VectorField, p: &ChartPoint) -> Result<LinearMap> {
        let mut a = self.field_jacobian(x, p)?;
        let gamma = self.christoffel(p)?;
        let xv = x.eval(p)?;
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += (0..n).map(|k| gamma.get(i, j, k) * xv[k]).sum::<f64>();
            }
        }
        LinearMap::new(p.clone(), a)
    }

    /// Mapping norm `sup ||A v||_g / ||v||_g`, the largest singular value of
    /// `R A R^-1` where `g = R^T R`.
    pub fn operator_norm(&self, a: &LinearMap) -> Result<f64> {
        let g = self.metric_eval(&a.base)?;
        let chol = g
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("metric of {} is not positive definite", self.name)))?;
        let r = chol.l().transpose();
        let n = self.dim;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let whitened = &r * &a.entries * r_inv;
        let sv = whitened.singular_values();
        Ok(sv.iter().fold(0.0f64, |m, s| m.max(*s)))
    }

    /// `||∇X(p)||_g`.
    pub fn field_rate(&self, x: &VectorField, p: &ChartPoint) -> Result<f64> {
        let a = self.covariant_differential(x, p)?;
        self.operator_norm(&a)
    }
}
