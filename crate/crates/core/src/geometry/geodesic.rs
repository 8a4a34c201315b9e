use super::curvature::{christoffel, CHRISTOFFEL_STEP};
use super::{inner_product, MetricField};
use crate::{Error, Result};

/// One sampled state along a geodesic.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `√(g(ẋ, ẋ))`.
    pub speed: f64,
}

fn acceleration<F: MetricField + ?Sized>(field: &F, x: &[f64], v: &[f64], h: f64) -> Result<Vec<f64>> {
    let gamma = christoffel(field, x, h)?;
    let d = x.len();
    Ok((0..d)
        .map(|k| {
            let mut a = 0.0;
            for i in 0..d {
                for j in 0..d {
                    a -= gamma.get(k, i, j) * v[i] * v[j];
                }
            }
            a
        })
        .collect())
}

fn speed<F: MetricField + ?Sized>(field: &F, x: &[f64], v: &[f64]) -> Result<f64> {
    Ok(inner_product(&field.metric(x)?, v, v)?.max(0.0).sqrt())
}

/// Integrates `ẍᵏ = −Γᵏ_ij ẋⁱ ẋʲ` with classical RK4 over `steps` uniform steps.
///
/// Returns `steps + 1` samples, starting with the initial state.
pub fn geodesic_integrate<F: MetricField + ?Sized>(
    field: &F,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    steps: usize,
) -> Result<Vec<GeodesicSample>> {
    geodesic_integrate_with_step(field, x0, v0, duration, steps, CHRISTOFFEL_STEP)
}

pub fn geodesic_integrate_with_step<F: MetricField + ?Sized>(
    field: &F,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    steps: usize,
    h: f64,
) -> Result<Vec<GeodesicSample>> {
    let d = field.dim();
    if x0.len() != d || v0.len() != d {
        return Err(Error::Dimension(format!(
            "initial point/velocity of lengths {}/{} for a {d}-dimensional field",
            x0.len(),
            v0.len()
        )));
    }
    if steps == 0 || !duration.is_finite() {
        return Err(Error::Invalid(format!("need steps > 0 and finite duration, got {steps}, {duration}")));
    }
    if x0.iter().chain(v0).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("initial state is not finite".into()));
    }
    let dt = duration / steps as f64;
    let fail = |t: f64| move |e: Error| Error::GeodesicFailure { t, source: Box::new(e) };

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(GeodesicSample { t: 0.0, x: x.clone(), v: v.clone(), speed: speed(field, &x, &v).map_err(fail(0.0))? });

    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    for n in 0..steps {
        let t = n as f64 * dt;
        let acc = |x: &[f64], v: &[f64]| acceleration(field, x, v, h).map_err(fail(t));
        let k1x = v.clone();
        let k1v = acc(&x, &v)?;
        let x2 = axpy(&x, 0.5 * dt, &k1x);
        let v2 = axpy(&v, 0.5 * dt, &k1v);
        let k2v = acc(&x2, &v2)?;
        let x3 = axpy(&x, 0.5 * dt, &v2);
        let v3 = axpy(&v, 0.5 * dt, &k2v);
        let k3v = acc(&x3, &v3)?;
        let x4 = axpy(&x, dt, &v3);
        let v4 = axpy(&v, dt, &k3v);
        let k4v = acc(&x4, &v4)?;
        for i in 0..d {
            x[i] += dt / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        let t_next = (n + 1) as f64 * dt;
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::GeodesicFailure {
                t: t_next,
                source: Box::new(Error::Invalid("state became non-finite".into())),
            });
        }
        let s = speed(field, &x, &v).map_err(fail(t_next))?;
        out.push(GeodesicSample { t: t_next, x: x.clone(), v: v.clone(), speed: s });
    }
    Ok(out)
}
