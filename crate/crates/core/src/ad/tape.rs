//! Reverse-mode tape.
//!
//! Every primitive appends one node holding its value and the input
//! references needed to replay partials. Inputs always precede the node
//! that consumes them, so the backward pass is a single reverse sweep.

use indexmap::IndexMap;

use super::{AdError, Array, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operation kinds.
#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Square(Var),
    Softplus(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Sum(Var),
    SumAxis { x: Var, axis: usize },
    Mean(Var),
    Variance(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { x: Var, axis: usize, start: usize },
    Reshape(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Tanh(..) => "tanh",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Sqrt(..) => "sqrt",
            Op::Square(..) => "square",
            Op::Softplus(..) => "softplus",
            Op::Clamp { .. } => "clamp",
            Op::Sum(..) => "sum",
            Op::SumAxis { .. } => "sum_axis",
            Op::Mean(..) => "mean",
            Op::Variance(..) => "variance",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape(..) => "reshape",
        }
    }
}

struct Node {
    op: Op,
    value: Array,
    requires_grad: bool,
}

/// Ordered record of primitive operations.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
}

/// Name-to-node map produced by [`Tape::bind`].
#[derive(Clone, Debug, Default)]
pub struct Bound {
    vars: IndexMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var, AdError> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

fn binary_shape(a: &Array, b: &Array, op: &str) -> Result<Vec<usize>, AdError> {
    if a.shape() == b.shape() {
        Ok(a.shape().to_vec())
    } else if a.is_scalar() {
        Ok(b.shape().to_vec())
    } else if b.is_scalar() {
        Ok(a.shape().to_vec())
    } else {
        Err(AdError::Shape(format!(
            "{op}: shapes {:?} and {:?} do not conform",
            a.shape(),
            b.shape()
        )))
    }
}

fn zip_broadcast(a: &Array, b: &Array, shape: Vec<usize>, f: impl Fn(f64, f64) -> f64) -> Array {
    let n: usize = shape.iter().product();
    let (ad, bd) = (a.data(), b.data());
    let data = match (a.is_scalar() && n != 1, b.is_scalar() && n != 1) {
        (true, _) => bd.iter().map(|&y| f(ad[0], y)).collect(),
        (_, true) => ad.iter().map(|&x| f(x, bd[0])).collect(),
        _ => ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect(),
    };
    Array::from_parts(shape, data)
}

fn map(a: &Array, f: impl Fn(f64) -> f64) -> Array {
    Array::from_parts(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect())
}

fn zip_map(a: &Array, b: &Array, f: impl Fn(f64, f64) -> f64) -> Array {
    debug_assert_eq!(a.len(), b.len());
    Array::from_parts(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

fn matmul_raw(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Splits `shape` around `axis` into (outer, extent, inner) element counts.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Reduces a broadcast gradient back to the operand's shape.
fn unbroadcast(grad: Array, target: &Array) -> Array {
    if target.is_scalar() && grad.len() != 1 {
        Array::from_parts(Vec::new(), vec![grad.data().iter().sum()])
    } else if grad.shape() != target.shape() {
        Array::from_parts(target.shape().to_vec(), grad.into_data())
    } else {
        grad
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    /// Scalar value of a single-element node.
    pub fn scalar(&self, v: Var) -> Result<f64, AdError> {
        self.value(v).item()
    }

    fn push(&mut self, op: Op, value: Array, requires_grad: bool) -> Result<Var, AdError> {
        if let Some(pos) = value.data().iter().position(|x| !x.is_finite()) {
            return Err(AdError::NonFinite {
                op: op.name().into(),
                detail: format!("element {pos} of result is {}", value.data()[pos]),
            });
        }
        self.nodes.push(Node { op, value, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A value that does not receive gradients.
    pub fn constant(&mut self, value: Array) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// A named differentiable leaf.
    pub fn param(&mut self, name: &str, value: Array) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value, requires_grad: true });
        let v = Var(self.nodes.len() - 1);
        self.params.push((name.to_string(), v));
        v
    }

    /// Registers every entry of `store` as a differentiable leaf.
    pub fn bind(&mut self, store: &ParamStore) -> Bound {
        let vars = store
            .iter()
            .map(|(name, a)| (name.to_string(), self.param(name, a.clone())))
            .collect();
        Bound { vars }
    }

    /// Registers every entry of `store` as a constant; used for plain evaluation.
    pub fn bind_constants(&mut self, store: &ParamStore) -> Bound {
        let vars = store
            .iter()
            .map(|(name, a)| (name.to_string(), self.constant(a.clone())))
            .collect();
        Bound { vars }
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var, AdError> {
        let (av, bv) = (self.value(a), self.value(b));
        let shape = binary_shape(av, bv, op.name())?;
        let value = zip_broadcast(av, bv, shape, f);
        let rg = self.rg(a) || self.rg(b);
        self.push(op, value, rg)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var, AdError> {
        let value = map(self.value(x), f);
        let rg = self.rg(x);
        self.push(op, value, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var, AdError> {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    /// Adds a constant.
    pub fn offset(&mut self, x: Var, c: f64) -> Result<Var, AdError> {
        self.unary(x, Op::Offset(x), |v| v + c)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (n, k) = self.value(a).dims2()?;
        let (k2, m) = self.value(b).dims2()?;
        if k != k2 {
            return Err(AdError::Shape(format!(
                "matmul: [{n}, {k}] x [{k2}, {m}]"
            )));
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), n, k, m);
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::MatMul(a, b), Array::from_parts(vec![n, m], data), rg)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, AdError> {
        let (r, c) = self.value(x).dims2()?;
        let data = transpose_raw(self.value(x).data(), r, c);
        let rg = self.rg(x);
        self.push(Op::Transpose(x), Array::from_parts(vec![c, r], data), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, AdError> {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, AdError> {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    pub fn log(&mut self, x: Var) -> Result<Var, AdError> {
        self.unary(x, Op::Log(x), f64::ln)
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var, AdError> {
        self.unary(x, Op::Sqrt(x), f64::sqrt)?;
        // sqrt'(0) is unbounded; treat a zero argument as a domain error.
        let v = Var(self.nodes.len() - 1);
        if self.value(v).data().iter().any(|&y| y == 0.0) {
            self.nodes.pop();
            return Err(AdError::NonFinite {
                op: "sqrt".into(),
                detail: "derivative at zero is unbounded".into(),
            });
        }
        Ok(v)
    }

    pub fn square(&mut self, x: Var) -> Result<Var, AdError> {
        self.unary(x, Op::Square(x), |v| v * v)
    }

    /// `log(1 + exp(x))`, evaluated without overflow.
    pub fn softplus(&mut self, x: Var) -> Result<Var, AdError> {
        self.unary(x, Op::Softplus(x), softplus)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var, AdError> {
        self.unary(x, Op::Clamp { x, lo, hi }, |v| v.clamp(lo, hi))
    }

    /// Sum of all elements to a scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var, AdError> {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Op::Sum(x), Array::from_parts(Vec::new(), vec![s]), rg)
    }

    /// Sum of a matrix along `axis`, keeping the reduced axis with extent 1.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var, AdError> {
        let (r, c) = self.value(x).dims2()?;
        let d = self.value(x).data();
        let value = match axis {
            0 => {
                let mut out = vec![0.0; c];
                for i in 0..r {
                    for (o, v) in out.iter_mut().zip(&d[i * c..(i + 1) * c]) {
                        *o += v;
                    }
                }
                Array::from_parts(vec![1, c], out)
            }
            1 => Array::from_parts(
                vec![r, 1],
                (0..r).map(|i| d[i * c..(i + 1) * c].iter().sum()).collect(),
            ),
            _ => return Err(AdError::Shape(format!("sum_axis: axis {axis} of a matrix"))),
        };
        let rg = self.rg(x);
        self.push(Op::SumAxis { x, axis }, value, rg)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, AdError> {
        let a = self.value(x);
        if a.is_empty() {
            return Err(AdError::Shape("mean of an empty array".into()));
        }
        let m = a.data().iter().sum::<f64>() / a.len() as f64;
        let rg = self.rg(x);
        self.push(Op::Mean(x), Array::from_parts(Vec::new(), vec![m]), rg)
    }

    /// Population variance (divide by N) over all elements.
    pub fn variance(&mut self, x: Var) -> Result<Var, AdError> {
        let a = self.value(x);
        if a.is_empty() {
            return Err(AdError::Shape("variance of an empty array".into()));
        }
        let n = a.len() as f64;
        let m = a.data().iter().sum::<f64>() / n;
        let v = a.data().iter().map(|&y| (y - m) * (y - m)).sum::<f64>() / n;
        let rg = self.rg(x);
        self.push(Op::Variance(x), Array::from_parts(Vec::new(), vec![v]), rg)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, AdError> {
        let first = inputs
            .first()
            .ok_or_else(|| AdError::Shape("concat of zero arrays".into()))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(AdError::Shape(format!("concat: axis {axis} for rank {}", base.len())));
        }
        let mut extent = 0;
        for &v in inputs {
            let s = self.value(v).shape();
            let conforms = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !conforms {
                return Err(AdError::Shape(format!("concat: {s:?} vs {base:?} on axis {axis}")));
            }
            extent += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = extent;
        let (outer, _, inner) = axis_split(&shape, axis);
        let mut data = Vec::with_capacity(outer * extent * inner);
        for o in 0..outer {
            for &v in inputs {
                let a = self.value(v);
                let chunk = a.shape()[axis] * inner;
                data.extend_from_slice(&a.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        self.push(
            Op::Concat { inputs: inputs.to_vec(), axis },
            Array::from_parts(shape, data),
            rg,
        )
    }

    /// Indices `start..end` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var, AdError> {
        let shape = self.value(x).shape().to_vec();
        if axis >= shape.len() || start > end || end > shape[axis] {
            return Err(AdError::Shape(format!(
                "slice {start}..{end} on axis {axis} of {shape:?}"
            )));
        }
        let (outer, ext, inner) = axis_split(&shape, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * ext * inner;
            data.extend_from_slice(&src[base + start * inner..base + end * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = end - start;
        let rg = self.rg(x);
        self.push(Op::Slice { x, axis, start }, Array::from_parts(out_shape, data), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, AdError> {
        let value = self.value(x).reshaped(shape)?;
        let rg = self.rg(x);
        self.push(Op::Reshape(x), value, rg)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients, AdError> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(AdError::NotScalar(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Array>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Array::from_parts(root_value.shape().to_vec(), vec![1.0]));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let contributions = self.partials(&node.op, &node.value, &g);
            grads[idx] = Some(g);
            for (input, partial) in contributions {
                if !self.rg(input) {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => {
                        for (a, p) in acc.data_mut().iter_mut().zip(partial.data()) {
                            *a += p;
                        }
                    }
                    slot @ None => *slot = Some(partial),
                }
            }
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
            shapes: self.params.iter().map(|(_, v)| self.value(*v).shape().to_vec()).collect(),
        })
    }

    /// Vector-Jacobian products of one node with respect to its inputs.
    fn partials(&self, op: &Op, out: &Array, g: &Array) -> Vec<(Var, Array)> {
        let val = |v: Var| self.value(v);
        match op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => vec![
                (*a, unbroadcast(g.clone(), val(*a))),
                (*b, unbroadcast(g.clone(), val(*b))),
            ],
            Op::Sub(a, b) => vec![
                (*a, unbroadcast(g.clone(), val(*a))),
                (*b, unbroadcast(map(g, |x| -x), val(*b))),
            ],
            Op::Mul(a, b) => {
                let shape = g.shape().to_vec();
                let ga = zip_broadcast(g, val(*b), shape.clone(), |x, y| x * y);
                let gb = zip_broadcast(g, val(*a), shape, |x, y| x * y);
                vec![(*a, unbroadcast(ga, val(*a))), (*b, unbroadcast(gb, val(*b)))]
            }
            Op::Div(a, b) => {
                let shape = g.shape().to_vec();
                let ga = zip_broadcast(g, val(*b), shape.clone(), |x, y| x / y);
                let q = zip_broadcast(out, val(*b), shape.clone(), |o, y| o / y);
                let gb = zip_broadcast(g, &q, shape, |x, y| -x * y);
                vec![(*a, unbroadcast(ga, val(*a))), (*b, unbroadcast(gb, val(*b)))]
            }
            Op::Scale(x, c) => vec![(*x, map(g, |v| v * c))],
            Op::Offset(x) | Op::Reshape(x) => {
                vec![(*x, Array::from_parts(val(*x).shape().to_vec(), g.data().to_vec()))]
            }
            Op::MatMul(a, b) => {
                let (n, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                let m = val(*b).shape()[1];
                let bt = transpose_raw(val(*b).data(), k, m);
                let ga = matmul_raw(g.data(), &bt, n, m, k);
                let at = transpose_raw(val(*a).data(), n, k);
                let gb = matmul_raw(&at, g.data(), k, n, m);
                vec![
                    (*a, Array::from_parts(vec![n, k], ga)),
                    (*b, Array::from_parts(vec![k, m], gb)),
                ]
            }
            Op::Transpose(x) => {
                let (r, c) = (g.shape()[0], g.shape()[1]);
                vec![(*x, Array::from_parts(vec![c, r], transpose_raw(g.data(), r, c)))]
            }
            Op::Tanh(x) => vec![(*x, zip_map(g, out, |gv, t| gv * (1.0 - t * t)))],
            Op::Exp(x) => vec![(*x, zip_map(g, out, |gv, e| gv * e))],
            Op::Log(x) => vec![(*x, zip_map(g, val(*x), |gv, v| gv / v))],
            Op::Sqrt(x) => vec![(*x, zip_map(g, out, |gv, s| gv * 0.5 / s))],
            Op::Square(x) => vec![(*x, zip_map(g, val(*x), |gv, v| 2.0 * gv * v))],
            Op::Softplus(x) => vec![(*x, zip_map(g, val(*x), |gv, v| gv * sigmoid(v)))],
            Op::Clamp { x, lo, hi } => vec![(
                *x,
                zip_map(g, val(*x), |gv, v| if v < *lo || v > *hi { 0.0 } else { gv }),
            )],
            Op::Sum(x) => vec![(*x, Array::full(val(*x).shape(), g.data()[0]))],
            Op::SumAxis { x, axis } => {
                let (r, c) = (val(*x).shape()[0], val(*x).shape()[1]);
                let data = (0..r * c)
                    .map(|i| if *axis == 0 { g.data()[i % c] } else { g.data()[i / c] })
                    .collect();
                vec![(*x, Array::from_parts(vec![r, c], data))]
            }
            Op::Mean(x) => {
                let n = val(*x).len() as f64;
                vec![(*x, Array::full(val(*x).shape(), g.data()[0] / n))]
            }
            Op::Variance(x) => {
                let a = val(*x);
                let n = a.len() as f64;
                let m = a.data().iter().sum::<f64>() / n;
                let s = 2.0 * g.data()[0] / n;
                vec![(*x, map(a, |v| s * (v - m)))]
            }
            Op::Concat { inputs, axis } => {
                let (outer, ext, inner) = axis_split(g.shape(), *axis);
                let mut offset = 0;
                inputs
                    .iter()
                    .map(|&v| {
                        let shape = val(v).shape();
                        let e = shape[*axis];
                        let mut data = Vec::with_capacity(val(v).len());
                        for o in 0..outer {
                            let base = o * ext * inner + offset * inner;
                            data.extend_from_slice(&g.data()[base..base + e * inner]);
                        }
                        offset += e;
                        (v, Array::from_parts(shape.to_vec(), data))
                    })
                    .collect()
            }
            Op::Slice { x, axis, start } => {
                let shape = val(*x).shape();
                let (outer, ext, inner) = axis_split(shape, *axis);
                let width = g.shape()[*axis];
                let mut data = vec![0.0; val(*x).len()];
                for o in 0..outer {
                    let dst = o * ext * inner + start * inner;
                    let src = o * width * inner;
                    data[dst..dst + width * inner]
                        .copy_from_slice(&g.data()[src..src + width * inner]);
                }
                vec![(*x, Array::from_parts(shape.to_vec(), data))]
            }
        }
    }
}

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Array>>,
    params: Vec<(String, Var)>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`; exact zeros when `v` does not reach the root.
    pub fn wrt(&self, v: Var, tape: &Tape) -> Array {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => Array::zeros(tape.value(v).shape()),
        }
    }

    /// Gradients of every named parameter, in binding order.
    pub fn params(&self) -> ParamStore {
        let mut store = ParamStore::new();
        for ((name, v), shape) in self.params.iter().zip(&self.shapes) {
            let g = match self.grads.get(v.0) {
                Some(Some(g)) => g.clone(),
                _ => Array::zeros(shape),
            };
            store
                .insert(name, g)
                .expect("tape parameter names are unique");
        }
        store
    }
}
