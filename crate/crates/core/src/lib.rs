//! Finite-time Gronwall separation bounds for flows of vector fields on
//! single-chart Riemannian manifolds.
//!
//! A [`Manifold`] is a coordinate domain with a metric. A [`VectorField`]
//! is flowed with an adaptive Dormand-Prince integrator, distances come
//! from closed forms or discrete energy minimization, and
//! [`certify_pair`] compares `d(p(t), q(t))` against `d(p0, q0) e^{C_T t}`
//! where `C_T` estimates `sup ||∇X||_g` over the region the flow sweeps.

// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod expr;
pub mod field;
pub mod flow;
pub mod geodesic;
pub mod gronwall;
pub mod integrator;
pub mod io;
pub mod manifold;
pub mod point;

pub use error::{Error, Result};
pub use field::VectorField;
pub use flow::{
    arclength_params, curve_length, flow_curve, flow_point, length_evolution, reparametrize_by_arclength,
    torsion_swap_residual, uniform_times, CurveFamily, Trajectory,
};
pub use geodesic::{distance, distance_value, geodesic_shoot, minimize_geodesic, GeodesicConfig, GeodesicPath, GeodesicSegment};
pub use gronwall::{
    certify_pair, check_bound, enclosure_radius, estimate_ct_global, estimate_ct_tube, estimate_ct_tube_partial,
    CertificateDocument, CertifyConfig, GronwallCertificate, RateEstimate, RefinementConfig, SamplerConfig, SeedSet,
    Strategy, StrategyKind, ViolationReport,
};
pub use integrator::IntegratorConfig;
pub use manifold::{Christoffel, Manifold};
pub use point::{ChartPoint, LinearMap, TangentVector};
