use super::algebra::{self, Christoffel, Plain, Samples, Stencil, SymMat};
use super::MetricField;
use crate::{Error, Result};

/// Step for metric differences in curvature computations.
pub const CURVATURE_STEP: f64 = 1e-3;
/// Step for metric differences in Christoffel symbols used by geodesics.
pub const CHRISTOFFEL_STEP: f64 = 1e-4;

fn sample<F: MetricField + ?Sized>(field: &F, stencil: &Stencil, x: &[f64], h: f64) -> Result<Vec<SymMat<f64>>> {
    if x.len() != field.dim() {
        return Err(Error::Dimension(format!(
            "point of length {} for a {}-dimensional field",
            x.len(),
            field.dim()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("difference step must be positive, got {h}")));
    }
    stencil
        .points(x, h)
        .iter()
        .map(|p| field.metric(p).map(|g| g.packed()))
        .collect()
}

/// `Γᵏ_ij = ½ gᵏˡ(∂ᵢ g_jl + ∂ⱼ g_il − ∂ₗ g_ij)` by central differences with step `h`.
pub fn christoffel<F: MetricField + ?Sized>(field: &F, x: &[f64], h: f64) -> Result<Christoffel<f64>> {
    let stencil = Stencil::christoffel(field.dim());
    let metrics = sample(field, &stencil, x, h)?;
    let samples = Samples { stencil: &stencil, metrics: &metrics, h };
    let origin = vec![0; field.dim()];
    Ok(algebra::christoffel_at(&mut Plain, &samples, &origin)?.0)
}

/// Ricci scalar from nested central differences with step `h`.
pub fn ricci_scalar<F: MetricField + ?Sized>(field: &F, x: &[f64], h: f64) -> Result<f64> {
    let stencil = Stencil::ricci(field.dim());
    let metrics = sample(field, &stencil, x, h)?;
    let samples = Samples { stencil: &stencil, metrics: &metrics, h };
    algebra::ricci_scalar_at(&mut Plain, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::*;
    use crate::geometry::MetricTensor;
    use std::f64::consts::FRAC_PI_4;

    fn all_gamma(g: &Christoffel<f64>) -> Vec<(usize, usize, usize, f64)> {
        let d = g.dim();
        let mut v = Vec::new();
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    v.push((k, i, j, *g.get(k, i, j)));
                }
            }
        }
        v
    }

    #[test]
    fn euclidean_has_no_connection() {
        let g = christoffel(&Euclidean { dim: 3 }, &[0.2, -1.0, 3.0], 1e-4).unwrap();
        assert!(all_gamma(&g).iter().all(|e| e.3 == 0.0));
    }

    #[test]
    fn constant_metric_has_no_connection() {
        let m = MetricTensor::new(2, vec![3.0, 0.7, 0.7, 2.0]).unwrap();
        let g = christoffel(&Constant(m), &[1.0, 1.0], 1e-4).unwrap();
        assert!(all_gamma(&g).iter().all(|e| e.3 == 0.0));
    }

    #[test]
    fn polar_symbols() {
        let g = christoffel(&PolarFlat, &[2.0, 0.0], 1e-4).unwrap();
        for (k, i, j, v) in all_gamma(&g) {
            let expected = match (k, i, j) {
                (0, 1, 1) => -2.0,
                (1, 0, 1) | (1, 1, 0) => 0.5,
                _ => 0.0,
            };
            assert!((v - expected).abs() < 1e-6, "Γ^{k}_{i}{j} = {v}");
        }
    }

    #[test]
    fn symmetric_in_lower_indices() {
        let g = christoffel(&SphereChart::default(), &[0.9, 0.3], 1e-4).unwrap();
        for k in 0..2 {
            assert_eq!(g.get(k, 0, 1).to_bits(), g.get(k, 1, 0).to_bits());
        }
    }

    #[test]
    fn curvature_of_closed_forms() {
        let e = ricci_scalar(&Euclidean { dim: 2 }, &[0.5, 0.5], CURVATURE_STEP).unwrap();
        assert!(e.abs() < 1e-8);
        let s = ricci_scalar(&SphereChart::default(), &[FRAC_PI_4, 0.0], CURVATURE_STEP).unwrap();
        assert!((s - 2.0).abs() / 2.0 < 1e-3, "sphere R = {s}");
        let p = ricci_scalar(&PoincareHalfPlane, &[0.0, 1.0], CURVATURE_STEP).unwrap();
        assert!((p + 2.0).abs() / 2.0 < 1e-3, "half-plane R = {p}");
        let f = ricci_scalar(&PolarFlat, &[2.0, 0.0], CURVATURE_STEP).unwrap();
        assert!(f.abs() < 1e-5, "polar R = {f}");
    }

    #[test]
    fn singular_metric_is_reported() {
        // polar metric degenerates at r = 0
        assert!(matches!(
            christoffel(&PolarFlat, &[0.0, 0.0], 1e-4),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(christoffel(&PolarFlat, &[1.0, 0.0], 0.0).is_err());
    }
}
