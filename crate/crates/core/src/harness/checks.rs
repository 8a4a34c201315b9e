//! Self-check suites behind the `gradcheck` and `oracle` commands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::ad::{finite_diff_grad, relative_error, Array, FdStep, ParamStore, Tape};
use crate::geometry::field::{Euclidean, PoincareHalfPlane, PolarFlat, SphereChart};
use crate::geometry::{christoffel, geodesic_integrate, ricci_scalar, MetricField, CURVATURE_STEP};
use crate::losses::{curvature_loss, task_loss, total_loss_on_tape, volume_loss, LossBreakdown, LossWeights, Targets};
use crate::Result;

use super::dataset::{make_dataset, Task};
use super::model::{layer_geometry, Architecture, GeometryOptions, NdmModel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

pub const GRADCHECK_TOL: f64 = 1e-4;
pub const GRADCHECK_DRAWS: usize = 100;
const FD_STEP: FdStep = FdStep::Relative(1e-5);
/// The loss components compared in a gradient check.
pub const GRADCHECK_LOSSES: [&str; 4] = ["l_task", "l_curv", "l_vol", "l_total"];

/// A small model and batch on which gradients are compared.
pub struct GradcheckProblem {
    pub model: NdmModel,
    pub x: Array,
    pub y: Targets,
    pub geometry: GeometryOptions,
    pub weights: LossWeights,
}

/// d = 2, two layers, hidden width 4, every parameter randomized.
pub fn gradcheck_problem(seed: u64) -> Result<GradcheckProblem> {
    let arch = Architecture { d: 2, n_layers: 2, hidden: 4, outputs: 2, epsilon: 1e-3 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = NdmModel::init(arch, &mut rng, 0.5)?;
    let noise = Normal::new(0.0, 0.3).expect("valid std");
    let flat: Vec<f64> = model.params().flatten().iter().map(|v| v + noise.sample(&mut rng)).collect();
    model.set_params(model.params().unflatten(&flat)?)?;
    let data = make_dataset(Task::TwoMoons, 6, seed)?;
    Ok(GradcheckProblem {
        model,
        x: data.padded_inputs(2)?,
        y: data.targets,
        // A coarser stencil keeps the finite-difference oracle well above
        // rounding noise.
        geometry: GeometryOptions { subsample: 3, h: 1e-2 },
        weights: LossWeights::default(),
    })
}

impl GradcheckProblem {
    fn record(&self, tape: &mut Tape, params: &ParamStore) -> Result<crate::losses::LossVars> {
        let bound = tape.bind(params);
        let x = tape.constant(self.x.clone());
        let trace = self.model.forward(tape, &bound, x, None)?;
        let l_task = task_loss(tape, trace.outputs, &self.y, Task::TwoMoons.loss())?;
        let geo = layer_geometry(&self.model, tape, &bound, &trace.charts, self.geometry)?;
        let ricci: Vec<_> = geo.iter().map(|g| g.ricci).collect();
        let volume: Vec<_> = geo.iter().map(|g| g.volume).collect();
        let l_curv = curvature_loss(tape, &ricci)?;
        let l_vol = volume_loss(tape, &volume)?;
        total_loss_on_tape(tape, l_task, l_curv, l_vol, self.weights)
    }

    pub fn losses(&self, params: &ParamStore) -> Result<LossBreakdown> {
        let mut tape = Tape::new();
        let vars = self.record(&mut tape, params)?;
        vars.values(&tape)
    }

    /// Reverse-mode gradients of the four checked losses, flattened.
    pub fn ad_gradients(&self) -> Result<[Vec<f64>; 4]> {
        let mut tape = Tape::new();
        let vars = self.record(&mut tape, self.model.params())?;
        let mut out: [Vec<f64>; 4] = Default::default();
        for (slot, root) in out.iter_mut().zip([vars.l_task, vars.l_curv, vars.l_vol, vars.l_total]) {
            *slot = tape.backward(root)?.params().flatten();
        }
        Ok(out)
    }

    /// Central-difference gradient of one checked loss.
    pub fn fd_gradient(&self, which: usize) -> Result<Vec<f64>> {
        let pick = |b: LossBreakdown| [b.l_task, b.l_curv, b.l_vol, b.l_total][which];
        let g = finite_diff_grad(|p: &ParamStore| self.losses(p).map(pick), self.model.params(), FD_STEP)?;
        Ok(g.flatten())
    }

    /// All four central-difference gradients from one sweep, with the same
    /// steps as [`finite_diff_grad`].
    pub fn fd_gradients(&self) -> Result<[Vec<f64>; 4]> {
        let theta = self.model.params();
        let base = theta.flatten();
        let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; base.len()]);
        let mut probe = base.clone();
        let FdStep::Relative(rel) = FD_STEP else { unreachable!() };
        for i in 0..base.len() {
            let h = rel * base[i].abs().max(1.0);
            probe[i] = base[i] + h;
            let plus = self.losses(&theta.unflatten(&probe)?)?;
            probe[i] = base[i] - h;
            let minus = self.losses(&theta.unflatten(&probe)?)?;
            probe[i] = base[i];
            let (p, m) = ([plus.l_task, plus.l_curv, plus.l_vol, plus.l_total], [minus.l_task, minus.l_curv, minus.l_vol, minus.l_total]);
            for k in 0..4 {
                out[k][i] = (p[k] - m[k]) / (2.0 * h);
            }
        }
        Ok(out)
    }

    /// Relative error per checked loss.
    pub fn errors(&self) -> Result<[f64; 4]> {
        let ad = self.ad_gradients()?;
        let fd = self.fd_gradients()?;
        Ok(std::array::from_fn(|i| relative_error(&ad[i], &fd[i], 1e-8)))
    }
}

/// Compares AD and finite-difference gradients over `draws` random models.
pub fn gradcheck_suite(seed: u64, draws: usize) -> Result<Vec<CheckResult>> {
    let mut worst = [0.0f64; 4];
    let mut failures = [0usize; 4];
    for draw in 0..draws {
        let problem = gradcheck_problem(seed.wrapping_mul(1_000_003).wrapping_add(draw as u64))?;
        for (i, e) in problem.errors()?.iter().enumerate() {
            worst[i] = worst[i].max(*e);
            if !(*e < GRADCHECK_TOL) {
                failures[i] += 1;
            }
        }
    }
    Ok(GRADCHECK_LOSSES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            CheckResult::new(
                format!("gradient/{name}"),
                failures[i] == 0,
                format!("{draws} draws, worst relative error {:e}, {} above {GRADCHECK_TOL:e}", worst[i], failures[i]),
            )
        })
        .collect())
}

fn curvature_check(name: &str, field: &dyn MetricField, points: &[[f64; 2]], expected: f64, tol: f64, relative: bool) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for p in points {
        let r = ricci_scalar(field, p, CURVATURE_STEP)?;
        let err = if relative { ((r - expected) / expected).abs() } else { (r - expected).abs() };
        worst = worst.max(err);
    }
    let kind = if relative { "relative" } else { "absolute" };
    Ok(CheckResult::new(
        format!("curvature/{name}"),
        worst < tol,
        format!("R = {expected} at {} points, worst {kind} error {worst:e} (limit {tol:e})", points.len()),
    ))
}

fn curvature_check3(name: &str, field: &dyn MetricField, point: &[f64]) -> Result<CheckResult> {
    let r = ricci_scalar(field, point, CURVATURE_STEP)?;
    Ok(CheckResult::new(format!("curvature/{name}"), r.abs() < 1e-8, format!("R = {r:e} (limit 1e-8)")))
}

/// Closed-form curvature values.
pub fn curvature_oracles() -> Result<Vec<CheckResult>> {
    Ok(vec![
        curvature_check("sphere", &SphereChart::default(), &[[0.7, 0.0], [1.2, 2.0], [2.0, -1.0]], 2.0, 1e-3, true)?,
        curvature_check("poincare", &PoincareHalfPlane, &[[0.0, 1.0], [0.5, 0.3], [-2.0, 2.5]], -2.0, 1e-3, true)?,
        curvature_check("polar", &PolarFlat, &[[1.0, 0.1], [1.5, 1.0], [2.5, -2.0]], 0.0, 1e-5, false)?,
        curvature_check("euclidean", &Euclidean { dim: 2 }, &[[0.0, 0.0], [3.0, -1.0]], 0.0, 1e-8, false)?,
        curvature_check3("euclidean-3d", &Euclidean { dim: 3 }, &[0.2, -0.1, 1.0])?,
    ])
}

/// Polar Christoffels `Γ^r_θθ = −r`, `Γ^θ_rθ = 1/r`.
pub fn christoffel_oracle() -> Result<CheckResult> {
    let r = 1.7;
    let g = christoffel(&PolarFlat, &[r, 0.4], 1e-4)?;
    let err = (g.get(0, 1, 1) + r).abs().max((g.get(1, 0, 1) - 1.0 / r).abs()).max((g.get(1, 1, 0) - 1.0 / r).abs());
    Ok(CheckResult::new("christoffel/polar", err < 1e-6, format!("worst absolute error {err:e}")))
}

pub const GEODESIC_DURATION: f64 = 1.0;
pub const GEODESIC_STEPS: usize = 1000;
pub const SPEED_DRIFT_TOL: f64 = 1e-4;

fn speed_drift(field: &dyn MetricField, x0: &[f64], v0: &[f64]) -> Result<f64> {
    let path = geodesic_integrate(field, x0, v0, GEODESIC_DURATION, GEODESIC_STEPS)?;
    let s0 = path[0].speed;
    Ok(path.iter().map(|s| ((s.speed - s0) / s0).abs()).fold(0.0, f64::max))
}

/// Speed conservation on every closed-form field and the Poincaré semicircle.
pub fn geodesic_oracles() -> Result<Vec<CheckResult>> {
    let cases: [(&str, Box<dyn MetricField>, [f64; 2], [f64; 2]); 4] = [
        ("euclidean", Box::new(Euclidean { dim: 2 }), [0.3, -0.2], [1.0, 0.5]),
        ("polar", Box::new(PolarFlat), [1.5, 0.3], [0.2, 0.4]),
        ("sphere", Box::new(SphereChart::default()), [1.0, 0.2], [0.3, 0.5]),
        ("poincare", Box::new(PoincareHalfPlane), [0.0, 1.0], [1.0, 0.0]),
    ];
    let mut out = Vec::new();
    for (name, field, x0, v0) in cases {
        let drift = speed_drift(field.as_ref(), &x0, &v0)?;
        out.push(CheckResult::new(
            format!("geodesic/speed/{name}"),
            drift < SPEED_DRIFT_TOL,
            format!("max relative speed drift {drift:e} over T = {GEODESIC_DURATION}, n = {GEODESIC_STEPS}"),
        ));
    }
    let mut worst: f64 = 0.0;
    for dir in [1.0, -1.0] {
        let path = geodesic_integrate(&PoincareHalfPlane, &[0.0, 1.0], &[dir, 0.0], GEODESIC_DURATION, GEODESIC_STEPS)?;
        for s in &path {
            worst = worst.max((s.x[0] * s.x[0] + s.x[1] * s.x[1] - 1.0).abs());
        }
    }
    out.push(CheckResult::new(
        "geodesic/poincare-circle",
        worst < 1e-4,
        format!("max |x² + y² − 1| = {worst:e} in both directions"),
    ));
    Ok(out)
}

/// Every closed-form geometry check.
pub fn oracle_suite() -> Result<Vec<CheckResult>> {
    let mut out = curvature_oracles()?;
    out.push(christoffel_oracle()?);
    out.extend(geodesic_oracles()?);
    Ok(out)
}
