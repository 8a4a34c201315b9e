use rand::Rng;

use super::algebra::{packed_len, SymMat};
use super::{MetricField, MetricTensor};
use crate::ad::{Array, Bound, ParamStore, Tape, Var};
use crate::mlp::{Mlp, OutputInit};
use crate::{Error, Result};

/// Input shift applied before the softplus on diagonal factor entries, chosen
/// so that a raw output of exactly 1 gives `L_ii = 1`.
pub fn diagonal_shift() -> f64 {
    (std::f64::consts::E - 1.0).ln() - 1.0
}

/// Auxiliary net mapping a point to the lower-triangular factor `L` of
/// `g = L Lᵀ + εI`.
///
/// The output has `d(d+1)/2` entries in packed row order. Diagonal entries
/// pass through a shifted softplus so they stay positive.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricNet {
    mlp: Mlp,
    dim: usize,
    epsilon: f64,
}

impl MetricNet {
    pub fn new(prefix: impl Into<String>, dim: usize, hidden: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Invalid(format!("metric floor must be positive, got {epsilon}")));
        }
        if dim == 0 || hidden == 0 {
            return Err(Error::Invalid("metric net needs positive dimension and width".into()));
        }
        Ok(Self {
            mlp: Mlp::new(prefix, vec![dim, hidden, hidden, packed_len(dim)]),
            dim,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn prefix(&self) -> &str {
        self.mlp.prefix()
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Output bias 1 on diagonal entries and 0 elsewhere; output weights
    /// `N(0, weight_std²)`. With `weight_std = 0` the metric is `(1+ε)I`
    /// everywhere.
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng, weight_std: f64) -> Result<()> {
        let mut bias = Vec::with_capacity(packed_len(self.dim));
        for i in 0..self.dim {
            for j in 0..=i {
                bias.push(if i == j { 1.0 } else { 0.0 });
            }
        }
        self.mlp.init(store, rng, &OutputInit { weight_std, bias })?;
        Ok(())
    }

    /// Packed columns of `L`, one `[n, 1]` column per entry.
    pub fn factor_columns(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<Vec<Var>> {
        let raw = self.mlp.forward(tape, params, x)?;
        let mut cols = Vec::with_capacity(packed_len(self.dim));
        let mut p = 0;
        for i in 0..self.dim {
            for j in 0..=i {
                let c = tape.slice(raw, 1, p, p + 1)?;
                cols.push(if i == j {
                    let shifted = tape.offset(c, diagonal_shift())?;
                    tape.softplus(shifted)?
                } else {
                    c
                });
                p += 1;
            }
        }
        Ok(cols)
    }

    /// Packed columns of `g = L Lᵀ + εI` for every row of `x`.
    pub fn metric_columns(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<SymMat<Var>> {
        let l = self.factor_columns(tape, params, x)?;
        let at = |i: usize, j: usize| l[i * (i + 1) / 2 + j];
        let mut packed = Vec::with_capacity(packed_len(self.dim));
        for a in 0..self.dim {
            for b in 0..=a {
                let mut acc = tape.mul(at(a, 0), at(b, 0))?;
                for k in 1..=b {
                    let p = tape.mul(at(a, k), at(b, k))?;
                    acc = tape.add(acc, p)?;
                }
                if a == b {
                    acc = tape.offset(acc, self.epsilon)?;
                }
                packed.push(acc);
            }
        }
        Ok(SymMat::from_packed(self.dim, packed))
    }

    /// Metric at a single point.
    pub fn metric_at(&self, params: &ParamStore, x: &[f64]) -> Result<MetricTensor> {
        self.field(params).metric(x)
    }

    /// View of this net under fixed parameters as a metric field.
    pub fn field(&self, params: &ParamStore) -> LearnedField {
        let prefix = format!("{}.", self.prefix());
        LearnedField {
            net: self.clone(),
            params: params.subset(|n| n.starts_with(&prefix)),
        }
    }
}

/// A [`MetricNet`] with frozen parameters.
#[derive(Clone, Debug)]
pub struct LearnedField {
    net: MetricNet,
    params: ParamStore,
}

impl MetricField for LearnedField {
    fn dim(&self) -> usize {
        self.net.dim
    }

    fn metric(&self, x: &[f64]) -> Result<MetricTensor> {
        if x.len() != self.net.dim {
            return Err(Error::Dimension(format!(
                "point of length {} for a {}-dimensional metric net",
                x.len(),
                self.net.dim
            )));
        }
        let mut tape = Tape::new();
        let bound = tape.bind_constants(&self.params);
        let xv = tape.constant(Array::matrix(1, x.len(), x.to_vec())?);
        let cols = self.net.metric_columns(&mut tape, &bound, xv)?;
        let packed = cols.packed().iter().map(|v| tape.value(*v).data()[0]).collect();
        MetricTensor::from_packed(&SymMat::from_packed(self.net.dim, packed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn flat_initialization() {
        let net = MetricNet::new("m", 2, 8, 1e-3).unwrap();
        let mut store = ParamStore::new();
        net.init(&mut store, &mut rand_chacha::ChaCha8Rng::seed_from_u64(3), 0.0).unwrap();
        for x in [[0.0, 0.0], [3.0, -2.0]] {
            let g = net.metric_at(&store, &x).unwrap();
            assert!((g.get(0, 0) - 1.001).abs() < 1e-12);
            assert!((g.get(1, 1) - 1.001).abs() < 1e-12);
            assert_eq!(g.get(0, 1), 0.0);
        }
    }

    #[test]
    fn rejects_non_positive_floor() {
        assert!(MetricNet::new("m", 2, 8, 0.0).is_err());
    }
}
