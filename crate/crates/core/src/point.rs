//! Points, tangent vectors and linear maps expressed in a single chart.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point of the manifold given by its chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    coords: DVector<f64>,
}

impl ChartPoint {
    /// Fails if any coordinate is NaN or infinite.
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords: Vec<f64> = coords.into();
        if coords.is_empty() {
            return Err(Error::Invalid("a chart point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("non-finite chart coordinates {coords:?}")));
        }
        Ok(Self { coords: DVector::from_vec(coords) })
    }

    pub fn from_vector(coords: DVector<f64>) -> Result<Self> {
        Self::new(coords.as_slice().to_vec())
    }

    /// Skips the finiteness check. Callers must guarantee finite input.
    pub(crate) fn from_vector_unchecked(coords: DVector<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.as_slice().to_vec()
    }

    /// Chart-linear interpolation `(1 - s) self + s other`.
    pub fn lerp(&self, other: &ChartPoint, s: f64) -> ChartPoint {
        Self::from_vector_unchecked(&self.coords * (1.0 - s) + &other.coords * s)
    }

    /// Chart coordinates displaced by `delta`, or `None` if the result is not finite.
    pub fn offset(&self, delta: &DVector<f64>) -> Option<ChartPoint> {
        let c = &self.coords + delta;
        c.iter().all(|x| x.is_finite()).then(|| Self::from_vector_unchecked(c))
    }

    pub fn chart_distance(&self, other: &ChartPoint) -> f64 {
        (&self.coords - &other.coords).norm()
    }
}

/// A tangent vector: components in the coordinate basis at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub components: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, components: impl Into<Vec<f64>>) -> Result<Self> {
        let components = DVector::from_vec(components.into());
        if components.len() != base.dim() {
            return Err(Error::Dimension { expected: base.dim(), got: components.len() });
        }
        Ok(Self { base, components })
    }
}

/// An endomorphism of the tangent space at `base`; `entries[(i, j)]` maps
/// component `j` of the input to component `i` of the output.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub base: ChartPoint,
    pub entries: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(base: ChartPoint, entries: DMatrix<f64>) -> Result<Self> {
        let n = base.dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Dimension { expected: n, got: entries.nrows().max(entries.ncols()) });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("linear map has non-finite entries".into()));
        }
        Ok(Self { base, entries })
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }
}
