//! Metric fields: point-to-metric maps, including closed-form test geometries.

use super::MetricTensor;
use crate::{Error, Result};

/// A smooth assignment of a metric to every point of a chart.
pub trait MetricField {
    fn dim(&self) -> usize;
    fn metric(&self, x: &[f64]) -> Result<MetricTensor>;
}

impl<F: MetricField + ?Sized> MetricField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        (**self).metric(x)
    }
}

impl<F: MetricField + ?Sized> MetricField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        (**self).metric(x)
    }
}

fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() == d {
        Ok(())
    } else {
        Err(Error::Dimension(format!("point of length {} for a {d}-dimensional field", x.len())))
    }
}

/// `g = I`.
#[derive(Clone, Copy, Debug)]
pub struct Euclidean {
    pub dim: usize,
}

impl MetricField for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        check_dim(x, self.dim)?;
        Ok(MetricTensor::identity(self.dim))
    }
}

/// The same metric everywhere.
#[derive(Clone, Debug)]
pub struct Constant(pub MetricTensor);

impl MetricField for Constant {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        check_dim(x, self.0.dim())?;
        Ok(self.0.clone())
    }
}

/// Flat plane in polar coordinates `(r, θ)`: `diag(1, r²)`.
#[derive(Clone, Copy, Debug)]
pub struct PolarFlat;

impl MetricField for PolarFlat {
    fn dim(&self) -> usize {
        2
    }
    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        check_dim(x, 2)?;
        MetricTensor::diagonal(&[1.0, x[0] * x[0]])
    }
}

/// Sphere of radius `radius` in `(θ, φ)`: `diag(r², r² sin²θ)`.
#[derive(Clone, Copy, Debug)]
pub struct SphereChart {
    pub radius: f64,
}

impl Default for SphereChart {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

impl MetricField for SphereChart {
    fn dim(&self) -> usize {
        2
    }
    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        check_dim(x, 2)?;
        let r2 = self.radius * self.radius;
        let s = x[0].sin();
        MetricTensor::diagonal(&[r2, r2 * s * s])
    }
}

/// Poincaré upper half-plane `(x, y)`, `y > 0`: `diag(1/y², 1/y²)`.
#[derive(Clone, Copy, Debug)]
pub struct PoincareHalfPlane;

impl MetricField for PoincareHalfPlane {
    fn dim(&self) -> usize {
        2
    }
    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        check_dim(x, 2)?;
        let y = x[1];
        if !(y > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("half-plane metric needs y > 0, got {y}")));
        }
        let w = 1.0 / (y * y);
        MetricTensor::diagonal(&[w, w])
    }
}

/// Pullback of a field through the linear map `x = A y`: `g̃(y) = Aᵀ g(Ay) A`.
pub struct LinearPullback<F> {
    pub field: F,
    /// Row-major `dim × dim` map.
    pub map: Vec<f64>,
}

impl<F: MetricField> LinearPullback<F> {
    /// `x = c·y`.
    pub fn scaled(field: F, c: f64) -> Self {
        let d = field.dim();
        let mut map = vec![0.0; d * d];
        for i in 0..d {
            map[i * d + i] = c;
        }
        Self { field, map }
    }
}

impl<F: MetricField> MetricField for LinearPullback<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn metric(&self, y: &[f64]) -> Result<MetricTensor> {
        let d = self.dim();
        check_dim(y, d)?;
        let x: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| self.map[i * d + j] * y[j]).sum())
            .collect();
        self.field.metric(&x)?.pullback(&self.map, d)
    }
}

/// Names accepted by [`closed_form`].
pub const CLOSED_FORM_FIELDS: [&str; 4] = ["euclidean", "polar", "sphere", "poincare"];

/// Looks up a closed-form test field by name.
pub fn closed_form(name: &str, dim: usize) -> Result<Box<dyn MetricField>> {
    let fixed = |f: Box<dyn MetricField>| {
        if dim == 2 {
            Ok(f)
        } else {
            Err(Error::Dimension(format!("field `{name}` is two-dimensional, asked for {dim}")))
        }
    };
    match name {
        "euclidean" => Ok(Box::new(Euclidean { dim })),
        "polar" => fixed(Box::new(PolarFlat)),
        "sphere" => fixed(Box::new(SphereChart::default())),
        "poincare" => fixed(Box::new(PoincareHalfPlane)),
        other => Err(Error::Unknown { kind: "field", name: other.to_string() }),
    }
}
