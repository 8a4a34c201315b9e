use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::losses::LossWeights;
use crate::optim::{CgSettings, OptimizerKind, UpdateRule};
use crate::{Error, Result};

use super::dataset::Task;

/// Everything a training run depends on. Read from JSON with these exact
/// field names; missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Coordinate width.
    pub d: usize,
    pub n_layers: usize,
    /// Hidden width of the coupling and metric nets.
    pub hidden: usize,
    pub task: Task,
    /// Training set size.
    pub n_train: usize,
    pub lambda: f64,
    pub w_curv: f64,
    pub w_vol: f64,
    pub epsilon: f64,
    /// Output-weight std of the metric nets at initialization. Zero gives a
    /// flat metric everywhere.
    pub metric_init_std: f64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub damping: f64,
    pub cg_max_iters: usize,
    pub cg_tol: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Points per layer used for the geometric losses.
    pub geometry_subsample: usize,
    /// Geometry is evaluated on steps divisible by this.
    pub geometry_every: usize,
    /// Finite-difference step of the curvature stencil.
    pub curvature_h: f64,
    pub output_dir: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n_layers: 4,
            hidden: 16,
            task: Task::TwoMoons,
            n_train: 1000,
            lambda: 0.1,
            w_curv: 1.0,
            w_vol: 1.0,
            epsilon: 1e-3,
            metric_init_std: 0.3,
            optimizer: OptimizerKind::Sgd,
            lr: 0.05,
            damping: 1e-3,
            cg_max_iters: 50,
            cg_tol: 1e-8,
            batch_size: 64,
            steps: 2000,
            seed: 7,
            geometry_subsample: 16,
            geometry_every: 1,
            curvature_h: 1e-3,
            output_dir: "runs/default".into(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be finite and positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be finite and non-negative, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be at least {min}, got {v}")))
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        at_least("d", self.d, 2)?;
        at_least("hidden", self.hidden, 1)?;
        at_least("n_train", self.n_train, 1)?;
        at_least("batch_size", self.batch_size, 1)?;
        at_least("geometry_subsample", self.geometry_subsample, 1)?;
        at_least("geometry_every", self.geometry_every, 1)?;
        at_least("cg_max_iters", self.cg_max_iters, 1)?;
        if self.d < self.task.input_dim() {
            return Err(Error::Invalid(format!(
                "d = {} is narrower than the {}-dimensional task inputs",
                self.d,
                self.task.input_dim()
            )));
        }
        self.weights().validate()?;
        positive("epsilon", self.epsilon)?;
        non_negative("metric_init_std", self.metric_init_std)?;
        positive("lr", self.lr)?;
        non_negative("damping", self.damping)?;
        positive("cg_tol", self.cg_tol)?;
        positive("curvature_h", self.curvature_h)?;
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { lambda: self.lambda, w_curv: self.w_curv, w_vol: self.w_vol }
    }

    pub fn update_rule(&self) -> Result<UpdateRule> {
        UpdateRule::new(
            self.optimizer,
            self.lr,
            CgSettings { max_iters: self.cg_max_iters, tol: self.cg_tol },
        )
    }

    /// Whether step `step` evaluates the geometric losses.
    pub fn geometry_at(&self, step: usize) -> bool {
        step % self.geometry_every == 0
    }
}
