//! Learned metrics and differential geometry.
//!
//! Point-wise quantities (Christoffel symbols, Ricci scalar, geodesics) work
//! on any [`MetricField`]. [`point_geometry`] evaluates the same curvature
//! stencil for a batch of points on the tape.

pub mod algebra;
mod batch;
mod curvature;
pub mod field;
mod geodesic;
mod metric;
mod metric_net;

pub use algebra::Christoffel;
pub use batch::{point_geometry, PointGeometry};
pub use curvature::{christoffel, ricci_scalar, CHRISTOFFEL_STEP, CURVATURE_STEP};
pub use field::{closed_form, MetricField, CLOSED_FORM_FIELDS};
pub use geodesic::{geodesic_integrate, geodesic_integrate_with_step, GeodesicSample};
pub use metric::{inner_product, metric_from_factor, volume_element, MetricTensor};
pub use metric_net::{diagonal_shift, LearnedField, MetricNet};
