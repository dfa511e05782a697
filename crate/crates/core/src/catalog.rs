//! Builtin manifolds and vector fields, addressed by stable names.
//!
//! Manifolds: `euclidean(n)`, `slit-plane`, `sphere`, `poincare-disk`.
//! Fields: `zero`, `unit-y`, `d-phi`, `rotation`, `example-ii`,
//! `linear-diag21`; anything else is parsed as an inline expression list.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{split_top_level, Expr};
use crate::field::VectorField;
use crate::geodesic::{slit_crosses, slit_distance_unchecked};
use crate::manifold::{Christoffel, Manifold};

pub const MANIFOLD_NAMES: &[&str] = &["euclidean(n)", "slit-plane", "sphere", "poincare-disk"];
pub const FIELD_NAMES: &[&str] = &["zero", "unit-y", "d-phi", "rotation", "example-ii", "linear-diag21"];

/// `3 sqrt(3 / (2e))`, the sup of the `example-ii` bump field's Jacobian norm
/// in the flat plane.
pub fn bump_field_sup() -> f64 {
    3.0 * (3.0 / (2.0 * E)).sqrt()
}

pub fn manifold(name: &str) -> Result<Manifold> {
    let name = name.trim();
    if let Some(n) = name.strip_prefix("euclidean(").and_then(|s| s.strip_suffix(')')) {
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::UnknownManifold(name.to_string()))?;
        if n == 0 {
            return Err(Error::UnknownManifold(name.to_string()));
        }
        return Ok(euclidean(n));
    }
    match name {
        "slit-plane" => Ok(slit_plane()),
        "sphere" => Ok(sphere()),
        "poincare-disk" => Ok(poincare_disk()),
        _ => Err(Error::UnknownManifold(name.to_string())),
    }
}

pub fn euclidean(n: usize) -> Manifold {
    Manifold::new(format!("euclidean({n})"), n, move |_| DMatrix::identity(n, n), |_| true)
        .with_christoffel(move |_| Christoffel::zeros(n))
        .with_distance(|p, q| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// The plane with the closed ray `{(0, y) : y >= 0}` removed.
pub fn slit_plane() -> Manifold {
    Manifold::new("slit-plane", 2, |_| DMatrix::identity(2, 2), |x| !(x[0] == 0.0 && x[1] >= 0.0))
        .with_christoffel(|_| Christoffel::zeros(2))
        .with_distance(slit_distance_unchecked)
        .with_segment_check(|p, q| !slit_crosses(p, q))
        .with_waypoints(|p, q| {
            if slit_crosses(p, q) {
                // Just below the tip, on the chart's axis of symmetry.
                vec![vec![0.0, -1e-7]]
            } else {
                Vec::new()
            }
        })
}

/// Unit sphere in the chart `(θ, φ)`, `g = diag(1, sin²θ)`, poles excluded.
/// `φ` ranges over the whole real line.
pub fn sphere() -> Manifold {
    Manifold::new(
        "sphere",
        2,
        |x| {
            let s = x[0].sin();
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s * s])
        },
        |x| x[0] > 0.0 && x[0] < std::f64::consts::PI,
    )
    .with_christoffel(|x| {
        let (s, c) = x[0].sin_cos();
        let mut g = Christoffel::zeros(2);
        g.set(0, 1, 1, -s * c);
        g.set(1, 0, 1, c / s);
        g.set(1, 1, 0, c / s);
        g
    })
}

/// Poincaré disk model of the hyperbolic plane, `g = 4 / (1 - |x|²)² δ`.
pub fn poincare_disk() -> Manifold {
    Manifold::new(
        "poincare-disk",
        2,
        |x| {
            let w = 1.0 - (x[0] * x[0] + x[1] * x[1]);
            DMatrix::identity(2, 2) * (4.0 / (w * w))
        },
        |x| x[0] * x[0] + x[1] * x[1] < 1.0,
    )
    .with_christoffel(|x| {
        // g = e^{2φ} δ, φ = ln 2 - ln(1 - r²)
        let w = 1.0 - (x[0] * x[0] + x[1] * x[1]);
        let dphi = [2.0 * x[0] / w, 2.0 * x[1] / w];
        let mut g = Christoffel::zeros(2);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = 0.0;
                    if i == k {
                        v += dphi[j];
                    }
                    if j == k {
                        v += dphi[i];
                    }
                    if i == j {
                        v -= dphi[k];
                    }
                    g.set(k, i, j, v);
                }
            }
        }
        g
    })
    .with_distance(poincare_distance)
}

/// `arccosh(1 + 2|p-q|² / ((1-|p|²)(1-|q|²)))`, evaluated stably for nearby points.
pub fn poincare_distance(p: &[f64], q: &[f64]) -> f64 {
    let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    let wp = 1.0 - p.iter().map(|a| a * a).sum::<f64>();
    let wq = 1.0 - q.iter().map(|a| a * a).sum::<f64>();
    let delta = 2.0 * d2 / (wp * wq);
    (delta + (delta * (delta + 2.0)).sqrt()).ln_1p()
}

/// Chart coordinate names used by inline field expressions.
pub fn coordinate_names(m: &Manifold) -> Vec<String> {
    match m.name() {
        "sphere" => vec!["theta".into(), "phi".into()],
        _ if m.dim() <= 3 => ["x", "y", "z"][..m.dim()].iter().map(|s| s.to_string()).collect(),
        _ => (1..=m.dim()).map(|i| format!("x{i}")).collect(),
    }
}

fn is_flat(m: &Manifold) -> bool {
    m.name() == "slit-plane" || m.name().starts_with("euclidean(")
}

/// A catalog field by name, in dimension `dim`.
pub fn field(name: &str, dim: usize) -> Result<VectorField> {
    let planar = |f: VectorField| {
        if dim == 2 {
            Ok(f)
        } else {
            Err(Error::Dimension { expected: 2, got: dim })
        }
    };
    match name.trim() {
        "zero" => Ok(VectorField::zero(dim)),
        n @ ("unit-y" | "d-phi") => planar(
            VectorField::new(n, 2, |_| DVector::from_vec(vec![0.0, 1.0]))
                .with_jacobian(|_| DMatrix::zeros(2, 2))
                .with_sup_hint(|m| is_flat(m).then_some(0.0)),
        ),
        "rotation" => planar(
            VectorField::new("rotation", 2, |x| DVector::from_vec(vec![-x[1], x[0]]))
                .with_jacobian(|_| DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))
                .with_sup_hint(|m| is_flat(m).then_some(1.0)),
        ),
        "example-ii" => planar(bump_field()),
        "linear-diag21" => planar(
            VectorField::linear("linear-diag21", DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]))
                .with_sup_hint(|m| is_flat(m).then_some(2.0)),
        ),
        other => Err(Error::UnknownField(other.to_string())),
    }
}

/// `X = (0, e^{1 - 1/x²})`, extended by zero on `x = 0`.
pub fn bump_field() -> VectorField {
    VectorField::new("example-ii", 2, |x| DVector::from_vec(vec![0.0, bump(x[0])]))
        .with_jacobian(|x| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, bump_slope(x[0]), 0.0]))
        .with_sup_hint(|m| is_flat(m).then(bump_field_sup))
}

fn bump(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / (x * x)).exp()
    }
}

/// `d/dx e^{1 - 1/x²} = 2 x^{-3} e^{1 - 1/x²}`, written to avoid `inf * 0` near zero.
fn bump_slope(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let a = x.abs();
    (1.0 - 1.0 / (a * a) + 2f64.ln() - 3.0 * a.ln()).exp().copysign(x)
}

/// Parses an inline field, e.g. `"0, exp(1 - 1/x^2)"` or `"[-y, x]"`.
pub fn parse_field(src: &str, dim: usize, names: &[&str]) -> Result<VectorField> {
    let body = src.trim();
    let body = body
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(body);
    let parts = split_top_level(body);
    if parts.len() != dim {
        return Err(Error::Dimension { expected: dim, got: parts.len() });
    }
    let exprs = parts
        .iter()
        .map(|p| Expr::parse(p, names))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorField::new(src.trim(), dim, move |x| {
        DVector::from_iterator(exprs.len(), exprs.iter().map(|e| e.eval(x)))
    }))
}

/// Catalog field if `spec` names one, otherwise an inline expression in the
/// manifold's coordinate names.
pub fn resolve_field(spec: &str, m: &Manifold) -> Result<VectorField> {
    match field(spec, m.dim()) {
        Err(Error::UnknownField(_)) => {
            let names = coordinate_names(m);
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            parse_field(spec, m.dim(), &names).map_err(|e| match e {
                Error::Parse(msg) => Error::UnknownField(format!("{spec} ({msg})")),
                other => other,
            })
        }
        other => other,
    }
}
