use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ad::{Array, Bound, ParamStore, Tape, Var};
use crate::coupling::{CoordinateStack, CouplingLayer};
use crate::geometry::{point_geometry, MetricNet, PointGeometry};
use crate::{Error, Result};

use super::config::TrainConfig;

pub const HEAD_WEIGHT: &str = "head.w";
pub const HEAD_BIAS: &str = "head.b";

/// Shapes of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Architecture {
    pub d: usize,
    pub n_layers: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub epsilon: f64,
}

impl Architecture {
    pub fn from_config(c: &TrainConfig) -> Self {
        Self { d: c.d, n_layers: c.n_layers, hidden: c.hidden, outputs: c.task.outputs(), epsilon: c.epsilon }
    }
}

/// A coupling map and the metric net that reads the same input point.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldLayer {
    pub coupling: CouplingLayer,
    pub metric_net: MetricNet,
}

/// Rows of each layer's incoming chart that enter the geometric losses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryOptions {
    pub subsample: usize,
    pub h: f64,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `[n, outputs]`.
    pub outputs: Var,
    /// `charts[k]` is the input of layer `k`; the last entry feeds the head.
    pub charts: Vec<Var>,
    /// Per-layer curvature and volume; empty unless geometry was requested.
    pub geometry: Vec<PointGeometry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NdmModel {
    arch: Architecture,
    layers: Vec<ManifoldLayer>,
    stack: CoordinateStack,
    params: ParamStore,
}

pub fn is_metric_param(name: &str) -> bool {
    name.contains(".metric.")
}

fn skeleton(arch: &Architecture) -> Result<(Vec<ManifoldLayer>, CoordinateStack)> {
    if arch.outputs == 0 {
        return Err(Error::Invalid("model needs at least one output".into()));
    }
    let layers = (0..arch.n_layers)
        .map(|k| {
            Ok(ManifoldLayer {
                coupling: CouplingLayer::new(&format!("layer{k}.coupling"), arch.d, k, arch.hidden)?,
                metric_net: MetricNet::new(format!("layer{k}.metric"), arch.d, arch.hidden, arch.epsilon)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stack = CoordinateStack::new(arch.d, layers.iter().map(|l| l.coupling.clone()).collect())?;
    Ok((layers, stack))
}

impl NdmModel {
    /// Identity couplings, metric nets with output-weight std
    /// `metric_init_std`, and a head with `N(0, 1/d)` weights and zero bias.
    pub fn init(arch: Architecture, rng: &mut impl Rng, metric_init_std: f64) -> Result<Self> {
        let (layers, stack) = skeleton(&arch)?;
        let mut params = ParamStore::new();
        for l in &layers {
            l.coupling.init(&mut params, rng)?;
            l.metric_net.init(&mut params, rng, metric_init_std)?;
        }
        let std = (1.0 / arch.d as f64).sqrt();
        let w: Vec<f64> = (0..arch.d * arch.outputs)
            .map(|_| std * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect();
        params.insert(HEAD_WEIGHT, Array::matrix(arch.d, arch.outputs, w)?)?;
        params.insert(HEAD_BIAS, Array::zeros(&[1, arch.outputs]))?;
        Ok(Self { arch, layers, stack, params })
    }

    /// A model with the given parameters, which must match the architecture
    /// name for name and shape for shape.
    pub fn from_params(arch: Architecture, params: ParamStore) -> Result<Self> {
        let (layers, stack) = skeleton(&arch)?;
        // Only the names and shapes of the reference are used.
        let reference = Self::init(arch, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0), 0.0)?.params;
        if reference.len() != params.len() {
            return Err(Error::Invalid(format!(
                "expected {} parameter arrays, found {}",
                reference.len(),
                params.len()
            )));
        }
        for (name, a) in reference.iter() {
            let b = params
                .get(name)
                .map_err(|_| Error::Invalid(format!("missing parameter {name}")))?;
            if a.shape() != b.shape() {
                return Err(Error::Dimension(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    b.shape(),
                    a.shape()
                )));
            }
        }
        Ok(Self { arch, layers, stack, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[ManifoldLayer] {
        &self.layers
    }

    pub fn stack(&self) -> &CoordinateStack {
        &self.stack
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Replaces the parameters, keeping names and shapes.
    pub fn set_params(&mut self, params: ParamStore) -> Result<()> {
        *self = Self::from_params(self.arch, params)?;
        Ok(())
    }

    /// Coupling and head parameters: everything the task output depends on.
    pub fn task_params(&self) -> ParamStore {
        self.params.subset(|n| !is_metric_param(n))
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var, geometry: Option<GeometryOptions>) -> Result<ForwardTrace> {
        ndm_forward(self, tape, bound, x, geometry)
    }

    /// Outputs for a batch under fixed parameters.
    pub fn predict(&self, x: &Array) -> Result<Array> {
        let mut tape = Tape::new();
        let bound = tape.bind_constants(&self.params);
        let xv = tape.constant(x.clone());
        let trace = self.forward(&mut tape, &bound, xv, None)?;
        Ok(tape.value(trace.outputs).clone())
    }
}

/// Threads `x` through every coupling, applies the head to the final chart,
/// and optionally evaluates each layer's metric at the first
/// `geometry.subsample` rows of that layer's incoming chart.
pub fn ndm_forward(
    model: &NdmModel,
    tape: &mut Tape,
    bound: &Bound,
    x: Var,
    geometry: Option<GeometryOptions>,
) -> Result<ForwardTrace> {
    let value = tape.value(x);
    let (n, _) = value.dims2()?;
    if n == 0 {
        return Err(Error::EmptyBatch("forward pass needs at least one row"));
    }
    if value.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("batch contains non-finite entries".into()));
    }
    let trace = model.stack.forward(tape, bound, x)?;
    let w = bound.get(HEAD_WEIGHT)?;
    let b = bound.get(HEAD_BIAS)?;
    let ones = tape.constant(Array::full(&[n, 1], 1.0));
    let lin = tape.matmul(trace.output, w)?;
    let bias = tape.matmul(ones, b)?;
    let outputs = tape.add(lin, bias)?;

    let geometry = match geometry {
        Some(opts) => layer_geometry(model, tape, bound, &trace.charts, opts)?,
        None => Vec::new(),
    };
    Ok(ForwardTrace { outputs, charts: trace.charts, geometry })
}

/// Curvature and volume of layer `k`'s metric at the first
/// `opts.subsample` rows of `charts[k]`, for every layer.
pub fn layer_geometry(
    model: &NdmModel,
    tape: &mut Tape,
    bound: &Bound,
    charts: &[Var],
    opts: GeometryOptions,
) -> Result<Vec<PointGeometry>> {
    if opts.subsample == 0 {
        return Err(Error::Invalid("geometry subsample must be positive".into()));
    }
    if charts.len() < model.layers.len() {
        return Err(Error::Dimension(format!("{} charts for {} layers", charts.len(), model.layers.len())));
    }
    let mut geo = Vec::with_capacity(model.layers.len());
    for (layer, chart) in model.layers.iter().zip(charts) {
        let (n, _) = tape.value(*chart).dims2()?;
        let m = opts.subsample.min(n);
        let points = if m == n { *chart } else { tape.slice(*chart, 0, 0, m)? };
        geo.push(point_geometry(tape, &layer.metric_net, bound, points, opts.h)?);
    }
    Ok(geo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arch() -> Architecture {
        Architecture { d: 2, n_layers: 3, hidden: 6, outputs: 2, epsilon: 1e-3 }
    }

    fn model(std: f64) -> NdmModel {
        NdmModel::init(arch(), &mut ChaCha8Rng::seed_from_u64(4), std).unwrap()
    }

    fn batch() -> Array {
        Array::matrix(5, 2, vec![0.1, -0.4, 1.2, 0.3, -0.7, 0.9, 0.0, 0.0, 2.0, -1.5]).unwrap()
    }

    #[test]
    fn identity_model_with_zero_head() {
        let mut m = model(0.0);
        let mut p = m.params().clone();
        p.set(HEAD_WEIGHT, Array::zeros(&[2, 2])).unwrap();
        m.set_params(p).unwrap();
        let mut tape = Tape::new();
        let bound = tape.bind_constants(m.params());
        let x = tape.constant(batch());
        let t = m.forward(&mut tape, &bound, x, None).unwrap();
        assert!(tape.value(t.outputs).data().iter().all(|v| *v == 0.0));
        assert_eq!(t.charts.len(), 4);
        for c in &t.charts {
            assert_eq!(tape.value(*c), &batch());
        }
    }

    #[test]
    fn flat_geometry() {
        let m = model(0.0);
        let mut tape = Tape::new();
        let bound = tape.bind_constants(m.params());
        let x = tape.constant(batch());
        let t = m.forward(&mut tape, &bound, x, Some(GeometryOptions { subsample: 3, h: 1e-3 })).unwrap();
        assert_eq!(t.geometry.len(), 3);
        for g in &t.geometry {
            assert_eq!(tape.value(g.ricci).shape(), &[3, 1]);
            assert!(tape.value(g.ricci).data().iter().all(|r| r.abs() < 1e-5));
            assert!(tape.value(g.volume).data().iter().all(|v| (v - 1.001).abs() < 1e-12));
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let m = model(0.1);
        assert!(matches!(m.predict(&Array::zeros(&[0, 2])), Err(Error::EmptyBatch(_))));
    }

    #[test]
    fn param_names_and_validation() {
        let m = model(0.1);
        assert!(m.params().contains("layer2.metric.w2"));
        assert!(m.params().contains("layer0.coupling.scale.w0"));
        assert!(m.task_params().names().all(|n| !is_metric_param(n)));
        let mut p = m.params().clone();
        assert!(NdmModel::from_params(arch(), p.clone()).is_ok());
        p = p.subset(|n| n != HEAD_BIAS);
        assert!(NdmModel::from_params(arch(), p).is_err());
        let wider = Architecture { hidden: 7, ..arch() };
        assert!(NdmModel::from_params(wider, m.params().clone()).is_err());
    }

    #[test]
    fn seeded_init() {
        assert_eq!(model(0.2), model(0.2));
    }
}
