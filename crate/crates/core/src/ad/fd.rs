//! Central finite differences, the oracle for gradient checks.

use super::{AdError, ParamStore};

/// Step used for coordinate `i` of a central difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FdStep {
    /// `base * max(1, |theta_i|)`.
    Relative(f64),
    /// The same step for every coordinate.
    Absolute(f64),
}

impl Default for FdStep {
    fn default() -> Self {
        FdStep::Relative(1e-5)
    }
}

impl FdStep {
    fn at(self, theta: f64) -> f64 {
        match self {
            FdStep::Relative(h) => h * theta.abs().max(1.0),
            FdStep::Absolute(h) => h,
        }
    }

    fn base(self) -> f64 {
        match self {
            FdStep::Relative(h) | FdStep::Absolute(h) => h,
        }
    }
}

/// `(f(theta + h e_i) - f(theta - h e_i)) / 2h` for every scalar of `theta`.
pub fn finite_diff_grad<F, E>(mut f: F, theta: &ParamStore, step: FdStep) -> Result<ParamStore, E>
where
    F: FnMut(&ParamStore) -> Result<f64, E>,
    E: From<AdError>,
{
    if !(step.base() > 0.0) {
        return Err(AdError::InvalidStep(step.base()).into());
    }
    let base = theta.flatten();
    let mut grad = vec![0.0; base.len()];
    let mut probe = base.clone();
    for i in 0..base.len() {
        let h = step.at(base[i]);
        probe[i] = base[i] + h;
        let plus = f(&theta.unflatten(&probe)?)?;
        probe[i] = base[i] - h;
        let minus = f(&theta.unflatten(&probe)?)?;
        probe[i] = base[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(AdError::NonFinite {
                op: "finite_diff_grad".into(),
                detail: format!("evaluation at coordinate {i} is not finite"),
            }
            .into());
        }
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(theta.unflatten(&grad)?)
}

/// Norm-wise relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Array;

    fn store(v: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("theta", Array::vector(v.to_vec()).unwrap()).unwrap();
        s
    }

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let g = finite_diff_grad(
            |p: &ParamStore| -> Result<f64, AdError> {
                let t = p.get("theta")?.data()[0];
                Ok(t * t)
            },
            &store(&[3.0]),
            FdStep::Absolute(1e-5),
        )
        .unwrap();
        assert!((g.flatten()[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_diff_grad(
            |_: &ParamStore| -> Result<f64, AdError> { Ok(4.2) },
            &store(&[1.0, -2.0, 7.0]),
            FdStep::default(),
        )
        .unwrap();
        assert_eq!(g.flatten(), vec![0.0; 3]);
    }

    #[test]
    fn non_positive_step_rejected() {
        let r = finite_diff_grad(
            |_: &ParamStore| -> Result<f64, AdError> { Ok(0.0) },
            &store(&[1.0]),
            FdStep::Absolute(0.0),
        );
        assert!(matches!(r, Err(AdError::InvalidStep(_))));
    }

    #[test]
    fn non_finite_evaluation_rejected() {
        let r = finite_diff_grad(
            |p: &ParamStore| -> Result<f64, AdError> {
                let t = p.get("theta")?.data()[0];
                Ok(if t > 1.0 { f64::INFINITY } else { t })
            },
            &store(&[1.0]),
            FdStep::Absolute(1e-5),
        );
        assert!(matches!(r, Err(AdError::NonFinite { .. })));
    }
}
