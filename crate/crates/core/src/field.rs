//! Smooth vector fields given by their chart components.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::point::ChartPoint;

pub type ComponentsFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// Closed-form value of `sup_M ||∇X||_g` for a given manifold, when known.
pub type SupHintFn = Arc<dyn Fn(&Manifold) -> Option<f64> + Send + Sync>;

/// A vector field `X` on a chart. All closures must be pure.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    dim: usize,
    components: ComponentsFn,
    jacobian_analytic: Option<JacobianFn>,
    sup_hint: Option<SupHintFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("jacobian_analytic", &self.jacobian_analytic.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(name: impl Into<String>, dim: usize, components: F) -> Self
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            components: Arc::new(components),
            jacobian_analytic: None,
            sup_hint: None,
        }
    }

    pub fn with_jacobian<F>(mut self, jacobian: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian_analytic = Some(Arc::new(jacobian));
        self
    }

    pub fn with_sup_hint<F>(mut self, hint: F) -> Self
    where
        F: Fn(&Manifold) -> Option<f64> + Send + Sync + 'static,
    {
        self.sup_hint = Some(Arc::new(hint));
        self
    }

    /// The zero field in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        Self::new("zero", dim, move |_| DVector::zeros(dim))
            .with_jacobian(move |_| DMatrix::zeros(dim, dim))
            .with_sup_hint(|_| Some(0.0))
    }

    /// The linear field `x -> A x` in chart coordinates.
    pub fn linear(name: impl Into<String>, a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "linear field needs a square matrix");
        let n = a.nrows();
        let jac = a.clone();
        Self::new(name, n, move |x| &a * DVector::from_column_slice(x))
            .with_jacobian(move |_| jac.clone())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian_analytic.is_some()
    }

    pub fn sup_hint(&self, m: &Manifold) -> Option<f64> {
        self.sup_hint.as_ref().and_then(|h| h(m))
    }

    /// Components `X(p)`; fails on dimension mismatch or non-finite output.
    pub fn eval(&self, p: &ChartPoint) -> Result<DVector<f64>> {
        self.eval_slice(p.as_slice())
    }

    pub(crate) fn eval_slice(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        let v = (self.components)(x);
        if v.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: v.len() });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical(format!("field `{}` is not finite at {x:?}", self.name)));
        }
        Ok(v)
    }

    pub(crate) fn analytic_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jacobian_analytic.as_ref().map(|j| j(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_evaluates() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let x = VectorField::linear("diag", a);
        let p = ChartPoint::new(vec![1.0, 3.0]).unwrap();
        assert_eq!(x.eval(&p).unwrap().as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn non_finite_components_rejected() {
        let x = VectorField::new("bad", 1, |p| DVector::from_element(1, 1.0 / p[0]));
        let p = ChartPoint::new(vec![0.0]).unwrap();
        assert!(matches!(x.eval(&p), Err(Error::Numerical(_))));
    }
}
