//! Gradient descent and natural-gradient updates.
//!
//! The natural step solves `(G + γI) d = ∇L` by conjugate gradient, where
//! `G` is the empirical Fisher `(1/B) Σ u_b u_bᵀ` over per-sample gradients.
//! `G` is applied through matrix-vector products and never materialized.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Natural,
}

/// A damped curvature operator `v ↦ (G + γI) v`.
#[derive(Clone, Debug, PartialEq)]
pub enum FisherApprox {
    /// `G = I`.
    Identity { dim: usize, damping: f64 },
    /// `G = (1/B) Σ u_b u_bᵀ`.
    Empirical { grads: Vec<Vec<f64>>, damping: f64 },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_damping(damping: f64) -> Result<()> {
    if damping >= 0.0 && damping.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("damping must be finite and non-negative, got {damping}")))
    }
}

impl FisherApprox {
    pub fn identity(dim: usize, damping: f64) -> Result<Self> {
        check_damping(damping)?;
        Ok(Self::Identity { dim, damping })
    }

    /// Empirical Fisher of equal-length per-sample gradient vectors.
    pub fn empirical(per_sample_grads: Vec<Vec<f64>>, damping: f64) -> Result<Self> {
        check_damping(damping)?;
        let first = per_sample_grads
            .first()
            .ok_or(Error::EmptyBatch("empirical Fisher needs at least one gradient"))?;
        let dim = first.len();
        for (b, u) in per_sample_grads.iter().enumerate() {
            if u.len() != dim {
                return Err(Error::Dimension(format!("gradient {b} has length {}, expected {dim}", u.len())));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("gradient {b} is not finite")));
            }
        }
        Ok(Self::Empirical { grads: per_sample_grads, damping })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Identity { dim, .. } => *dim,
            Self::Empirical { grads, .. } => grads[0].len(),
        }
    }

    pub fn damping(&self) -> f64 {
        match self {
            Self::Identity { damping, .. } | Self::Empirical { damping, .. } => *damping,
        }
    }

    /// `(G + γI) v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!("matvec of length {} on a {}-dim operator", v.len(), self.dim())));
        }
        let damping = self.damping();
        match self {
            Self::Identity { .. } => Ok(v.iter().map(|x| x + damping * x).collect()),
            Self::Empirical { grads, .. } => {
                let inv_b = 1.0 / grads.len() as f64;
                let mut out = vec![0.0; v.len()];
                for u in grads {
                    let c = dot(u, v) * inv_b;
                    for (o, ui) in out.iter_mut().zip(u) {
                        *o += c * ui;
                    }
                }
                for (o, x) in out.iter_mut().zip(v) {
                    *o += damping * x;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgSettings {
    pub max_iters: usize,
    /// Target `‖(G+γI)x − b‖ / ‖b‖`.
    pub tol: f64,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { max_iters: 50, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Conjugate gradient from `x = 0`.
///
/// Stops at the residual tolerance or the iteration cap (reported through
/// `converged`). A non-positive curvature `pᵀAp` is a breakdown: the
/// operator is not positive-definite.
pub fn cg_solve(op: &FisherApprox, b: &[f64], settings: CgSettings) -> Result<CgReport> {
    if b.len() != op.dim() {
        return Err(Error::Dimension(format!("right-hand side of length {} for a {}-dim operator", b.len(), op.dim())));
    }
    let b_norm = norm(b);
    let mut x = vec![0.0; b.len()];
    if b_norm == 0.0 {
        return Ok(CgReport { x, iterations: 0, rel_residual: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut rel = 1.0;
    for it in 1..=settings.max_iters {
        let ap = op.matvec(&p)?;
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(Error::CgBreakdown {
                iteration: it,
                detail: format!("pᵀAp = {curvature}"),
            });
        }
        let alpha = rs / curvature;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        rel = rs_new.sqrt() / b_norm;
        if rel <= settings.tol {
            return Ok(CgReport { x, iterations: it, rel_residual: rel, converged: true });
        }
        let beta = rs_new / rs;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Ok(CgReport { x, iterations: settings.max_iters, rel_residual: rel, converged: false })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateRule {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub cg: CgSettings,
}

impl UpdateRule {
    pub fn new(kind: OptimizerKind, lr: f64, cg: CgSettings) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Invalid(format!("learning rate must be finite and positive, got {lr}")));
        }
        Ok(Self { kind, lr, cg })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub theta: Vec<f64>,
    /// Present for natural steps.
    pub cg: Option<CgReport>,
}

/// `θ − η∇L` (sgd) or `θ − η (G+γI)⁻¹∇L` (natural).
pub fn step(rule: &UpdateRule, theta: &[f64], grad: &[f64], fisher: Option<&FisherApprox>) -> Result<StepOutcome> {
    if theta.len() != grad.len() {
        return Err(Error::Dimension(format!("{} parameters, {} gradient entries", theta.len(), grad.len())));
    }
    let (direction, cg) = match (rule.kind, fisher) {
        (OptimizerKind::Sgd, _) => (grad.to_vec(), None),
        (OptimizerKind::Natural, Some(f)) => {
            let report = cg_solve(f, grad, rule.cg)?;
            (report.x.clone(), Some(report))
        }
        (OptimizerKind::Natural, None) => {
            return Err(Error::Invalid("natural step requires a Fisher approximation".into()))
        }
    };
    let theta = theta.iter().zip(&direction).map(|(t, d)| t - rule.lr * d).collect();
    Ok(StepOutcome { theta, cg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_one_action() {
        let f = FisherApprox::empirical(vec![vec![1.0, 2.0]], 0.0).unwrap();
        assert_eq!(f.matvec(&[1.0, 0.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn damping_adds_identity() {
        let grads = vec![vec![0.3, -1.0, 2.0], vec![1.5, 0.2, -0.7]];
        let v = [0.5, -2.0, 4.0];
        let a = FisherApprox::empirical(grads.clone(), 1.0).unwrap().matvec(&v).unwrap();
        let b = FisherApprox::empirical(grads, 0.0).unwrap().matvec(&v).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i] - v[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn two_sample_half_identity() {
        let f = FisherApprox::empirical(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).unwrap();
        assert_eq!(f.matvec(&[2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn fisher_errors() {
        assert!(matches!(FisherApprox::empirical(vec![], 1e-3), Err(Error::EmptyBatch(_))));
        assert!(FisherApprox::empirical(vec![vec![1.0], vec![1.0, 2.0]], 1e-3).is_err());
        assert!(FisherApprox::empirical(vec![vec![f64::NAN]], 1e-3).is_err());
        assert!(FisherApprox::identity(2, -1.0).is_err());
    }

    fn diag24() -> FisherApprox {
        // (1/2)(u1 u1ᵀ + u2 u2ᵀ) = diag(2, 4)
        FisherApprox::empirical(vec![vec![2.0, 0.0], vec![0.0, 8f64.sqrt()]], 0.0).unwrap()
    }

    #[test]
    fn cg_examples() {
        let id = FisherApprox::identity(3, 0.0).unwrap();
        let r = cg_solve(&id, &[1.0, -2.0, 3.5], CgSettings::default()).unwrap();
        assert_eq!(r.x, vec![1.0, -2.0, 3.5]);
        assert_eq!(r.iterations, 1);
        let r = cg_solve(&diag24(), &[2.0, 4.0], CgSettings::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_breakdown_on_singular_operator() {
        let f = FisherApprox::empirical(vec![vec![1.0, 0.0]], 0.0).unwrap();
        assert!(matches!(cg_solve(&f, &[0.0, 1.0], CgSettings::default()), Err(Error::CgBreakdown { .. })));
    }

    #[test]
    fn cg_reports_iteration_cap() {
        let grads: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 4.0 } else { 0.0 }).collect()).collect();
        let f = FisherApprox::empirical(grads, 1e-3).unwrap();
        let r = cg_solve(&f, &[1.0; 6], CgSettings { max_iters: 1, tol: 1e-8 }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn zero_rhs() {
        let r = cg_solve(&diag24(), &[0.0, 0.0], CgSettings::default()).unwrap();
        assert_eq!(r.x, vec![0.0, 0.0]);
        assert!(r.converged);
    }

    #[test]
    fn step_examples() {
        let sgd = UpdateRule::new(OptimizerKind::Sgd, 0.1, CgSettings::default()).unwrap();
        let out = step(&sgd, &[1.0, 1.0], &[2.0, 4.0], None).unwrap();
        assert!((out.theta[0] - 0.8).abs() < 1e-15 && (out.theta[1] - 0.6).abs() < 1e-15);

        let nat = UpdateRule::new(OptimizerKind::Natural, 1.0, CgSettings::default()).unwrap();
        let out = step(&nat, &[3.0, -1.0], &[2.0, 4.0], Some(&diag24())).unwrap();
        assert!((out.theta[0] - 2.0).abs() < 1e-12 && (out.theta[1] + 2.0).abs() < 1e-12);
        assert!(matches!(step(&nat, &[0.0], &[1.0], None), Err(Error::Invalid(_))));
        assert!(UpdateRule::new(OptimizerKind::Sgd, 0.0, CgSettings::default()).is_err());
    }

    #[test]
    fn identity_natural_step_equals_sgd_bitwise() {
        let theta = [0.3, -1.7, 2.2, 1e-3];
        let grad = [0.11, 5.0, -0.25, 3.3];
        let sgd = UpdateRule::new(OptimizerKind::Sgd, 0.05, CgSettings::default()).unwrap();
        let nat = UpdateRule { kind: OptimizerKind::Natural, ..sgd };
        let a = step(&sgd, &theta, &grad, None).unwrap().theta;
        let id = FisherApprox::identity(4, 0.0).unwrap();
        let b = step(&nat, &theta, &grad, Some(&id)).unwrap().theta;
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn natural_direction_descends(
            grads in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 5), 1..8),
            g in proptest::collection::vec(-3.0f64..3.0, 5),
            damping in 1e-3f64..1.0,
        ) {
            let f = FisherApprox::empirical(grads, damping).unwrap();
            let r = cg_solve(&f, &g, CgSettings::default()).unwrap();
            prop_assert!(dot(&r.x, &g) >= 0.0);
        }

        #[test]
        fn deterministic(grads in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..6),
                         g in proptest::collection::vec(-3.0f64..3.0, 4)) {
            let f = FisherApprox::empirical(grads, 1e-3).unwrap();
            let a = cg_solve(&f, &g, CgSettings::default()).unwrap();
            let b = cg_solve(&f, &g, CgSettings::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
