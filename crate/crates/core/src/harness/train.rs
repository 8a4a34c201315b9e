use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ad::{AdError, Array, ParamStore, Tape};
use crate::losses::{curvature_loss, task_loss, total_loss_on_tape, volume_loss, Targets};
use crate::optim::{self, FisherApprox, OptimizerKind};
use crate::{Error, Result};

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::dataset::make_dataset;
use super::model::{is_metric_param, layer_geometry, Architecture, GeometryOptions, NdmModel};
use super::report::{geometry_report, GeometryReport};

pub const METRICS_HEADER: [&str; 9] = [
    "step",
    "l_task",
    "l_curv",
    "l_vol",
    "l_geo",
    "l_total",
    "accuracy",
    "grad_norm",
    "metricnet_grad_norm",
];

const INIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;

/// Losses and gradient norms of one step, measured before its update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub step: usize,
    pub l_task: f64,
    /// The geometric terms are `None` on steps that skip geometry.
    pub l_curv: Option<f64>,
    pub l_vol: Option<f64>,
    pub l_geo: Option<f64>,
    pub l_total: f64,
    /// Batch accuracy; `None` for regression.
    pub accuracy: Option<f64>,
    pub grad_norm: f64,
    pub metricnet_grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: NdmModel,
    pub history: Vec<MetricsRow>,
    /// Accuracy over the whole training set for classification.
    pub final_accuracy: Option<f64>,
    pub final_task_loss: f64,
    pub report: GeometryReport,
    /// Natural steps whose CG solve hit the iteration cap.
    pub cg_unconverged: usize,
    /// Warnings about the run that did not stop it.
    pub flags: Vec<String>,
}

fn fmt_float(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        out.push_str(ryu::Buffer::new().format(v));
    }
}

/// CSV text of a metrics history, header included.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = METRICS_HEADER.join(",");
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.step);
        for v in [
            Some(r.l_task),
            r.l_curv,
            r.l_vol,
            r.l_geo,
            Some(r.l_total),
            r.accuracy,
            Some(r.grad_norm),
            Some(r.metricnet_grad_norm),
        ] {
            out.push(',');
            fmt_float(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Cycles through seeded permutations of `0..n`.
struct Batcher {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl Batcher {
    fn new(n: usize, rng: ChaCha8Rng) -> Self {
        Self { rng, order: (0..n).collect(), pos: n }
    }

    fn next(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The freshly initialized model of a config.
pub fn initial_model(config: &TrainConfig) -> Result<NdmModel> {
    NdmModel::init(
        Architecture::from_config(config),
        &mut stream(config.seed, INIT_STREAM),
        config.metric_init_std,
    )
}

/// Tags numerical failures with the loss component being computed.
fn tag<T>(component: &'static str, step: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Ad(AdError::NonFinite { .. }) | Error::NotPositiveDefinite(_) | Error::Invalid(_) => {
            Error::NonFiniteLoss { component, step, source: Box::new(e) }
        }
        other => other,
    })
}

fn finite(component: &'static str, step: usize, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss {
            component,
            step,
            source: Box::new(Error::Invalid(format!("{component} = {v}"))),
        })
    }
}

/// Fraction of rows whose largest logit is the label; ties go to the
/// lower class index.
pub fn accuracy(logits: &Array, labels: &[usize]) -> Result<f64> {
    let (n, _) = logits.dims2()?;
    if n == 0 || n != labels.len() {
        return Err(Error::Dimension(format!("{n} rows for {} labels", labels.len())));
    }
    let hits = (0..n)
        .filter(|&i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best == labels[i]
        })
        .count();
    Ok(hits as f64 / n as f64)
}

/// Per-sample gradients of the task loss with respect to `task`.
fn per_sample_grads(model: &NdmModel, task: &ParamStore, x: &Array, y: &Targets, cfg: &TrainConfig) -> Result<Vec<Vec<f64>>> {
    let (n, _) = x.dims2()?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut tape = Tape::new();
        let bound = tape.bind(task);
        let xi = tape.constant(x.select_rows(&[i])?);
        let trace = model.forward(&mut tape, &bound, xi, None)?;
        let loss = task_loss(&mut tape, trace.outputs, &y.select(&[i])?, cfg.task.loss())?;
        out.push(tape.backward(loss)?.params().flatten());
    }
    Ok(out)
}

/// Runs the training loop in memory.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let data = make_dataset(config.task, config.n_train, config.seed)?;
    let inputs = data.padded_inputs(config.d)?;
    let rule = config.update_rule()?;
    let weights = config.weights();
    let geometry = GeometryOptions { subsample: config.geometry_subsample, h: config.curvature_h };

    let mut model = initial_model(config)?;
    let mut batcher = Batcher::new(data.len(), stream(config.seed, BATCH_STREAM));
    let mut history = Vec::with_capacity(config.steps);
    let mut cg_unconverged = 0;

    for step in 0..config.steps {
        let idx = batcher.next(config.batch_size);
        let x = inputs.select_rows(&idx)?;
        let y = data.targets.select(&idx)?;

        let mut tape = Tape::new();
        let bound = tape.bind(model.params());
        let xv = tape.constant(x.clone());
        let trace = tag("l_task", step, model.forward(&mut tape, &bound, xv, None))?;
        let l_task = tag("l_task", step, task_loss(&mut tape, trace.outputs, &y, config.task.loss()))?;

        let (l_total, geo_row) = if config.geometry_at(step) {
            let geo = tag("l_curv", step, layer_geometry(&model, &mut tape, &bound, &trace.charts, geometry))?;
            let ricci: Vec<_> = geo.iter().map(|g| g.ricci).collect();
            let volume: Vec<_> = geo.iter().map(|g| g.volume).collect();
            let l_curv = tag("l_curv", step, curvature_loss(&mut tape, &ricci))?;
            let l_vol = tag("l_vol", step, volume_loss(&mut tape, &volume))?;
            let vars = tag("l_total", step, total_loss_on_tape(&mut tape, l_task, l_curv, l_vol, weights))?;
            let b = vars.values(&tape)?;
            (vars.l_total, Some((b.l_curv, b.l_vol, b.l_geo)))
        } else {
            (l_task, None)
        };
        let l_task_v = finite("l_task", step, tape.scalar(l_task)?)?;
        if let Some((c, v, g)) = geo_row {
            finite("l_curv", step, c)?;
            finite("l_vol", step, v)?;
            finite("l_geo", step, g)?;
        }
        let l_total_v = finite("l_total", step, tape.scalar(l_total)?)?;
        let acc = match &y {
            Targets::Labels(l) => Some(accuracy(tape.value(trace.outputs), l)?),
            Targets::Values(_) => None,
        };

        let grads = tag("l_total", step, tape.backward(l_total).map_err(Error::from))?.params();
        let metric_grads = grads.subset(is_metric_param);
        history.push(MetricsRow {
            step,
            l_task: l_task_v,
            l_curv: geo_row.map(|g| g.0),
            l_vol: geo_row.map(|g| g.1),
            l_geo: geo_row.map(|g| g.2),
            l_total: l_total_v,
            accuracy: acc,
            grad_norm: grads.norm(),
            metricnet_grad_norm: metric_grads.norm(),
        });

        let params = model.params();
        let next = match rule.kind {
            OptimizerKind::Sgd => {
                let out = optim::step(&rule, &params.flatten(), &grads.flatten(), None)?;
                params.unflatten(&out.theta)?
            }
            OptimizerKind::Natural => {
                // The task Fisher is zero on metric parameters, so they take
                // plain gradient steps.
                let task = model.task_params();
                let fisher = FisherApprox::empirical(per_sample_grads(&model, &task, &x, &y, config)?, config.damping)?;
                let task_grad = grads.subset(|n| !is_metric_param(n));
                let out = optim::step(&rule, &task.flatten(), &task_grad.flatten(), Some(&fisher))?;
                if out.cg.as_ref().is_some_and(|r| !r.converged) {
                    cg_unconverged += 1;
                }
                let metric = params.subset(is_metric_param);
                let sgd = optim::UpdateRule { kind: OptimizerKind::Sgd, ..rule };
                let metric_out = optim::step(&sgd, &metric.flatten(), &metric_grads.flatten(), None)?;
                let mut next = params.clone();
                next.update_from(&task.unflatten(&out.theta)?)?;
                next.update_from(&metric.unflatten(&metric_out.theta)?)?;
                next
            }
        };
        model.set_params(next)?;
    }

    let outputs = model.predict(&inputs)?;
    let final_accuracy = match &data.targets {
        Targets::Labels(l) => Some(accuracy(&outputs, l)?),
        Targets::Values(_) => None,
    };
    let final_task_loss = {
        let mut tape = Tape::new();
        let o = tape.constant(outputs);
        let l = task_loss(&mut tape, o, &data.targets, config.task.loss())?;
        tape.scalar(l)?
    };
    let report = geometry_report(&model, &inputs, config.curvature_h)?;

    let mut flags = Vec::new();
    let geo: Vec<f64> = history.iter().filter_map(|r| r.l_geo).collect();
    if config.lambda > 0.0 {
        if let (Some(first), Some(last)) = (geo.first(), geo.last()) {
            if last > first {
                flags.push(format!("l_geo rose from {first} at the first geometry step to {last} at the last"));
            }
        }
    }
    if cg_unconverged > 0 {
        flags.push(format!("{cg_unconverged} natural steps stopped at the CG iteration cap"));
    }

    Ok(TrainOutcome { model, history, final_accuracy, final_task_loss, report, cg_unconverged, flags })
}

/// Summary written next to the metrics.
#[derive(Serialize)]
struct RunSummary<'a> {
    steps: usize,
    final_accuracy: Option<f64>,
    final_task_loss: f64,
    cg_unconverged: usize,
    flags: &'a [String],
}

/// Writes `metrics.csv`, `checkpoint.json`, `geometry_report.json` and
/// `summary.json` into `dir`.
pub fn write_run(outcome: &TrainOutcome, config: &TrainConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(&outcome.history))?;
    Checkpoint::new(config, &outcome.model, outcome.history.len()).save(&dir.join("checkpoint.json"))?;
    std::fs::write(dir.join("geometry_report.json"), serde_json::to_string_pretty(&outcome.report)?)?;
    let summary = RunSummary {
        steps: outcome.history.len(),
        final_accuracy: outcome.final_accuracy,
        final_task_loss: outcome.final_task_loss,
        cg_unconverged: outcome.cg_unconverged,
        flags: &outcome.flags,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
