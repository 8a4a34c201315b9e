//! Tanh multilayer perceptrons whose weights live in a [`ParamStore`].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ad::{AdError, Array, Bound, ParamStore, Tape, Var};

/// How the final dense layer is initialized.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputInit {
    /// Standard deviation of the output weights; zero gives a constant net.
    pub weight_std: f64,
    /// Output bias, one entry per output.
    pub bias: Vec<f64>,
}

impl OutputInit {
    pub fn zeros(outputs: usize) -> Self {
        Self { weight_std: 0.0, bias: vec![0.0; outputs] }
    }
}

/// Layer sizes and the parameter-name prefix of one MLP.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    prefix: String,
    sizes: Vec<usize>,
}

impl Mlp {
    /// `sizes = [inputs, hidden..., outputs]`.
    pub fn new(prefix: impl Into<String>, sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self { prefix: prefix.into(), sizes }
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.prefix)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.prefix)
    }

    /// Adds freshly initialized parameters to `store`.
    ///
    /// Hidden weights are `N(0, 1/fan_in)` and hidden biases zero. Every draw
    /// is made regardless of `out`, so the random stream consumed does not
    /// depend on the output initialization.
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng, out: &OutputInit) -> Result<(), AdError> {
        assert_eq!(out.bias.len(), self.outputs());
        for l in 0..self.depth() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let last = l + 1 == self.depth();
            let std = if last { out.weight_std } else { (1.0 / fan_in as f64).sqrt() };
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * std
                })
                .collect();
            let b = if last { out.bias.clone() } else { vec![0.0; fan_out] };
            store.insert(&self.weight_name(l), Array::matrix(fan_in, fan_out, w)?)?;
            store.insert(&self.bias_name(l), Array::matrix(1, fan_out, b)?)?;
        }
        Ok(())
    }

    /// Applies the net to the rows of `x` (`[n, inputs]` to `[n, outputs]`).
    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<Var, AdError> {
        let n = tape.value(x).dims2()?.0;
        let ones = tape.constant(Array::full(&[n, 1], 1.0));
        let mut h = x;
        for l in 0..self.depth() {
            let w = params.get(&self.weight_name(l))?;
            let b = params.get(&self.bias_name(l))?;
            let lin = tape.matmul(h, w)?;
            let bias = tape.matmul(ones, b)?;
            h = tape.add(lin, bias)?;
            if l + 1 < self.depth() {
                h = tape.tanh(h)?;
            }
        }
        Ok(h)
    }
}
