//! Affine coupling layers: smooth bijections with closed-form inverse and
//! log-determinant, composed into the primary forward path.

use rand::Rng;

use crate::ad::{Array, Bound, ParamStore, Tape, Var};
use crate::mlp::{Mlp, OutputInit};
use crate::{Error, Result};

/// Scale logits are clamped to `[-SCALE_CLAMP, SCALE_CLAMP]` before exponentiation.
pub const SCALE_CLAMP: f64 = 5.0;

/// Partition of the coordinates into passive (conditioning) and active
/// (transformed) sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    dim: usize,
    passive: Vec<usize>,
    active: Vec<usize>,
}

impl Mask {
    /// Mask of layer `layer` in a stack of width `dim`.
    ///
    /// The passive set is `⌈d/2⌉` consecutive coordinates (cyclically)
    /// starting at `layer·⌊d/2⌋`. For even `d` this alternates between the
    /// two halves; for odd `d` it rotates so every coordinate gets transformed.
    pub fn alternating(dim: usize, layer: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Invalid(format!("coupling needs at least 2 coordinates, got {dim}")));
        }
        let passive_len = dim.div_ceil(2);
        let start = (layer * (dim / 2)) % dim;
        let mut passive: Vec<usize> = (0..passive_len).map(|j| (start + j) % dim).collect();
        passive.sort_unstable();
        let active = (0..dim).filter(|i| !passive.contains(i)).collect();
        Ok(Self { dim, passive, active })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn passive(&self) -> &[usize] {
        &self.passive
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// `[d, |idx|]` 0/1 matrix selecting the columns `idx`.
    fn selector(&self, idx: &[usize]) -> Array {
        let mut m = Array::zeros(&[self.dim, idx.len()]);
        for (j, &i) in idx.iter().enumerate() {
            m.data_mut()[i * idx.len() + j] = 1.0;
        }
        m
    }
}

/// One affine coupling transform.
///
/// `z_p = x_p`, `z_a = x_a · exp(s(x_p)) + t(x_p)` with `s` clamped, and
/// `log|det J| = Σ s(x_p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingLayer {
    mask: Mask,
    scale_net: Mlp,
    shift_net: Mlp,
}

/// Recorded pieces of a coupling evaluation.
struct Conditioner {
    passive: Var,
    scale: Var,
    shift: Var,
}

impl CouplingLayer {
    /// Scale and shift nets with two tanh hidden layers of width `hidden`.
    pub fn new(prefix: &str, dim: usize, layer: usize, hidden: usize) -> Result<Self> {
        let mask = Mask::alternating(dim, layer)?;
        let (p, a) = (mask.passive.len(), mask.active.len());
        Ok(Self {
            scale_net: Mlp::new(format!("{prefix}.scale"), vec![p, hidden, hidden, a]),
            shift_net: Mlp::new(format!("{prefix}.shift"), vec![p, hidden, hidden, a]),
            mask,
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn scale_net(&self) -> &Mlp {
        &self.scale_net
    }

    pub fn shift_net(&self) -> &Mlp {
        &self.shift_net
    }

    pub fn dim(&self) -> usize {
        self.mask.dim
    }

    /// Identity initialization: zero output layers for both nets.
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let a = self.mask.active.len();
        self.scale_net.init(store, rng, &OutputInit::zeros(a))?;
        self.shift_net.init(store, rng, &OutputInit::zeros(a))?;
        Ok(())
    }

    fn check_width(&self, tape: &Tape, x: Var) -> Result<usize> {
        let (n, d) = tape.value(x).dims2()?;
        if d != self.mask.dim {
            return Err(Error::Dimension(format!("coupling of width {} applied to width {d}", self.mask.dim)));
        }
        Ok(n)
    }

    fn conditioner(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<Conditioner> {
        let sel_p = tape.constant(self.mask.selector(&self.mask.passive));
        let passive = tape.matmul(x, sel_p)?;
        let logits = self.scale_net.forward(tape, params, passive)?;
        let scale = tape.clamp(logits, -SCALE_CLAMP, SCALE_CLAMP)?;
        let shift = self.shift_net.forward(tape, params, passive)?;
        Ok(Conditioner { passive, scale, shift })
    }

    fn assemble(&self, tape: &mut Tape, passive: Var, active: Var) -> Result<Var> {
        let sel_p = self.mask.selector(&self.mask.passive);
        let sel_a = self.mask.selector(&self.mask.active);
        let put_p = tape.constant(transpose(&sel_p));
        let put_a = tape.constant(transpose(&sel_a));
        let zp = tape.matmul(passive, put_p)?;
        let za = tape.matmul(active, put_a)?;
        Ok(tape.add(zp, za)?)
    }

    /// Rows of `x` (`[n, d]`) to `(z, logdet)` with `logdet` of shape `[n, 1]`.
    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<(Var, Var)> {
        self.check_width(tape, x)?;
        let c = self.conditioner(tape, params, x)?;
        let sel_a = tape.constant(self.mask.selector(&self.mask.active));
        let xa = tape.matmul(x, sel_a)?;
        let growth = tape.exp(c.scale)?;
        let scaled = tape.mul(xa, growth)?;
        let za = tape.add(scaled, c.shift)?;
        let z = self.assemble(tape, c.passive, za)?;
        let logdet = tape.sum_axis(c.scale, 1)?;
        Ok((z, logdet))
    }

    /// Exact inverse `x_a = (z_a − t(z_p)) · exp(−s(z_p))`.
    pub fn inverse(&self, tape: &mut Tape, params: &Bound, z: Var) -> Result<Var> {
        self.check_width(tape, z)?;
        let c = self.conditioner(tape, params, z)?;
        let sel_a = tape.constant(self.mask.selector(&self.mask.active));
        let za = tape.matmul(z, sel_a)?;
        let centered = tape.sub(za, c.shift)?;
        let neg = tape.scale(c.scale, -1.0)?;
        let shrink = tape.exp(neg)?;
        let xa = tape.mul(centered, shrink)?;
        self.assemble(tape, c.passive, xa)
    }

    /// Forward map of a single point under fixed parameters.
    pub fn forward_point(&self, params: &ParamStore, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut tape = Tape::new();
        let bound = tape.bind_constants(params);
        let xv = tape.constant(Array::matrix(1, x.len(), x.to_vec())?);
        let (z, logdet) = self.forward(&mut tape, &bound, xv)?;
        Ok((tape.value(z).data().to_vec(), tape.value(logdet).data()[0]))
    }

    /// Inverse map of a single point under fixed parameters.
    pub fn inverse_point(&self, params: &ParamStore, z: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = tape.bind_constants(params);
        let zv = tape.constant(Array::matrix(1, z.len(), z.to_vec())?);
        let x = self.inverse(&mut tape, &bound, zv)?;
        Ok(tape.value(x).data().to_vec())
    }
}

fn transpose(a: &Array) -> Array {
    let (r, c) = (a.shape()[0], a.shape()[1]);
    let mut t = Array::zeros(&[c, r]);
    for i in 0..r {
        for j in 0..c {
            t.data_mut()[j * r + i] = a.at(i, j);
        }
    }
    t
}

/// Coordinates of every chart visited by a stack evaluation.
#[derive(Clone, Debug)]
pub struct StackTrace {
    /// Output coordinates.
    pub output: Var,
    /// `charts[0]` is the input; `charts[i + 1]` is the output of layer `i`.
    pub charts: Vec<Var>,
    /// Per-layer log-determinants, each `[n, 1]`.
    pub layer_logdets: Vec<Var>,
    /// Their sum, `[n, 1]`.
    pub logdet: Var,
}

/// Ordered couplings of a common width.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateStack {
    dim: usize,
    layers: Vec<CouplingLayer>,
}

impl CoordinateStack {
    pub fn new(dim: usize, layers: Vec<CouplingLayer>) -> Result<Self> {
        if let Some(bad) = layers.iter().find(|l| l.dim() != dim) {
            return Err(Error::Dimension(format!("layer of width {} in a stack of width {dim}", bad.dim())));
        }
        Ok(Self { dim, layers })
    }

    pub fn layers(&self) -> &[CouplingLayer] {
        &self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Applies the layers in order `1..L`.
    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<StackTrace> {
        let (n, d) = tape.value(x).dims2()?;
        if d != self.dim {
            return Err(Error::Dimension(format!("stack of width {} applied to width {d}", self.dim)));
        }
        let mut charts = vec![x];
        let mut layer_logdets = Vec::with_capacity(self.layers.len());
        let mut logdet = tape.constant(Array::zeros(&[n, 1]));
        let mut cur = x;
        for layer in &self.layers {
            let (z, ld) = layer.forward(tape, params, cur)?;
            logdet = tape.add(logdet, ld)?;
            layer_logdets.push(ld);
            charts.push(z);
            cur = z;
        }
        Ok(StackTrace { output: cur, charts, layer_logdets, logdet })
    }

    /// Applies the inverses in reverse order.
    pub fn inverse(&self, tape: &mut Tape, params: &Bound, y: Var) -> Result<Var> {
        let mut cur = y;
        for layer in self.layers.iter().rev() {
            cur = layer.inverse(tape, params, cur)?;
        }
        Ok(cur)
    }

    /// `(y, charts, logdet)` for a single point under fixed parameters.
    pub fn forward_point(&self, params: &ParamStore, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64)> {
        let mut tape = Tape::new();
        let bound = tape.bind_constants(params);
        let xv = tape.constant(Array::matrix(1, x.len(), x.to_vec())?);
        let trace = self.forward(&mut tape, &bound, xv)?;
        let charts = trace.charts.iter().map(|c| tape.value(*c).data().to_vec()).collect();
        Ok((tape.value(trace.output).data().to_vec(), charts, tape.value(trace.logdet).data()[0]))
    }

    pub fn inverse_point(&self, params: &ParamStore, y: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = tape.bind_constants(params);
        let yv = tape.constant(Array::matrix(1, y.len(), y.to_vec())?);
        let x = self.inverse(&mut tape, &bound, yv)?;
        Ok(tape.value(x).data().to_vec())
    }
}
