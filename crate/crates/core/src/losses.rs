//! Task losses, geometric regularizers and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::ad::{Array, Tape, Var};
use crate::{Error, Result};

/// Metrics-CSV column names of the loss components.
pub const LOSS_COLUMNS: [&str; 5] = ["l_task", "l_curv", "l_vol", "l_geo", "l_total"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    CrossEntropyWithLogits,
    MeanSquaredError,
}

/// Supervision for a batch.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// Class index per row.
    Labels(Vec<usize>),
    /// `[n, k]` regression targets.
    Values(Array),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Values(v) => v.shape().first().copied().unwrap_or(0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows `idx`, in order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Ok(match self {
            Targets::Labels(l) => Targets::Labels(
                idx.iter()
                    .map(|&i| l.get(i).copied().ok_or_else(|| Error::Invalid(format!("row {i} out of range"))))
                    .collect::<Result<_>>()?,
            ),
            Targets::Values(v) => Targets::Values(v.select_rows(idx)?),
        })
    }
}

/// Batch-mean task loss of `predictions` (`[n, outputs]`).
pub fn task_loss(tape: &mut Tape, predictions: Var, targets: &Targets, kind: TaskKind) -> Result<Var> {
    let (n, c) = tape.value(predictions).dims2()?;
    if n == 0 {
        return Err(Error::EmptyBatch("task loss"));
    }
    if targets.len() != n {
        return Err(Error::Dimension(format!("{n} predictions for {} targets", targets.len())));
    }
    match (kind, targets) {
        (TaskKind::CrossEntropyWithLogits, Targets::Labels(labels)) => {
            let mut onehot = vec![0.0; n * c];
            for (row, &label) in labels.iter().enumerate() {
                if label >= c {
                    return Err(Error::LabelOutOfRange { label, classes: c });
                }
                onehot[row * c + label] = 1.0;
            }
            // Subtracting the row max leaves the loss and its gradient unchanged.
            let logits = tape.value(predictions);
            let mut row_max = Vec::with_capacity(n * c);
            for i in 0..n {
                let m = logits.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row_max.extend(std::iter::repeat_n(m, c));
            }
            let row_max = tape.constant(Array::matrix(n, c, row_max)?);
            let shifted = tape.sub(predictions, row_max)?;
            let e = tape.exp(shifted)?;
            let s = tape.sum_axis(e, 1)?;
            let lse = tape.log(s)?;
            let onehot = tape.constant(Array::matrix(n, c, onehot)?);
            let picked = tape.mul(shifted, onehot)?;
            let picked = tape.sum_axis(picked, 1)?;
            let nll = tape.sub(lse, picked)?;
            Ok(tape.mean(nll)?)
        }
        (TaskKind::MeanSquaredError, Targets::Values(values)) => {
            if values.shape() != [n, c] {
                return Err(Error::Dimension(format!(
                    "targets of shape {:?} for predictions [{n}, {c}]",
                    values.shape()
                )));
            }
            let t = tape.constant(values.clone());
            let diff = tape.sub(predictions, t)?;
            let sq = tape.square(diff)?;
            Ok(tape.mean(sq)?)
        }
        (kind, _) => Err(Error::Invalid(format!("targets do not match task kind {kind:?}"))),
    }
}

/// Mean of `R²` over every (layer, sample) pair.
pub fn curvature_loss(tape: &mut Tape, ricci_per_layer: &[Var]) -> Result<Var> {
    if ricci_per_layer.is_empty() {
        return Err(Error::EmptyBatch("curvature loss"));
    }
    let all = flatten_columns(tape, ricci_per_layer)?;
    if tape.value(all).is_empty() {
        return Err(Error::EmptyBatch("curvature loss"));
    }
    let sq = tape.square(all)?;
    Ok(tape.mean(sq)?)
}

/// Population variance of `√det g` within each layer, averaged over layers.
pub fn volume_loss(tape: &mut Tape, volume_per_layer: &[Var]) -> Result<Var> {
    if volume_per_layer.is_empty() {
        return Err(Error::EmptyBatch("volume loss"));
    }
    let mut acc: Option<Var> = None;
    for &v in volume_per_layer {
        if tape.value(v).is_empty() {
            return Err(Error::EmptyBatch("volume loss"));
        }
        let var = tape.variance(v)?;
        acc = Some(match acc {
            None => var,
            Some(a) => tape.add(a, var)?,
        });
    }
    let total = acc.expect("at least one layer");
    Ok(tape.scale(total, 1.0 / volume_per_layer.len() as f64)?)
}

fn flatten_columns(tape: &mut Tape, parts: &[Var]) -> Result<Var> {
    let flat = parts
        .iter()
        .map(|&p| {
            let n = tape.value(p).len();
            tape.reshape(p, vec![n])
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(tape.concat(&flat, 0)?)
}

/// λ and the weights of the two geometric terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub w_curv: f64,
    pub w_vol: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda: 0.1, w_curv: 1.0, w_vol: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("w_curv", self.w_curv), ("w_vol", self.w_vol)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Values of every loss component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_task: f64,
    pub l_curv: f64,
    pub l_vol: f64,
    pub l_geo: f64,
    pub l_total: f64,
}

/// `l_geo = w_curv·l_curv + w_vol·l_vol`, `l_total = l_task + λ·l_geo`.
pub fn total_loss(l_task: f64, l_curv: f64, l_vol: f64, weights: LossWeights) -> Result<LossBreakdown> {
    weights.validate()?;
    let l_geo = weights.w_curv * l_curv + weights.w_vol * l_vol;
    let l_total = l_task + weights.lambda * l_geo;
    let b = LossBreakdown { l_task, l_curv, l_vol, l_geo, l_total };
    for (name, v) in LOSS_COLUMNS.iter().zip([l_task, l_curv, l_vol, l_geo, l_total]) {
        if !v.is_finite() {
            return Err(Error::Invalid(format!("{name} is not finite")));
        }
    }
    Ok(b)
}

/// Tape nodes of the combined objective.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub l_task: Var,
    pub l_curv: Var,
    pub l_vol: Var,
    pub l_geo: Var,
    pub l_total: Var,
}

impl LossVars {
    pub fn values(&self, tape: &Tape) -> Result<LossBreakdown> {
        Ok(LossBreakdown {
            l_task: tape.scalar(self.l_task)?,
            l_curv: tape.scalar(self.l_curv)?,
            l_vol: tape.scalar(self.l_vol)?,
            l_geo: tape.scalar(self.l_geo)?,
            l_total: tape.scalar(self.l_total)?,
        })
    }
}

/// Records the weighted combination on the tape, in the same order as [`total_loss`].
pub fn total_loss_on_tape(tape: &mut Tape, l_task: Var, l_curv: Var, l_vol: Var, weights: LossWeights) -> Result<LossVars> {
    weights.validate()?;
    let c = tape.scale(l_curv, weights.w_curv)?;
    let v = tape.scale(l_vol, weights.w_vol)?;
    let l_geo = tape.add(c, v)?;
    let reg = tape.scale(l_geo, weights.lambda)?;
    let l_total = tape.add(l_task, reg)?;
    Ok(LossVars { l_task, l_curv, l_vol, l_geo, l_total })
}
