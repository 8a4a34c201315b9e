use super::algebra::{self, Plain, SymMat};
use crate::{Error, Result};

/// Symmetric positive-definite `d × d` matrix at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    dim: usize,
    entries: Vec<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl MetricTensor {
    /// Builds from row-major entries, checking symmetry and positive-definiteness.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(Error::Dimension(format!(
                "{} entries for a {dim}x{dim} metric",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry".into()));
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (entries[i * dim + j], entries[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Invalid(format!("metric not symmetric at ({i},{j}): {a} vs {b}")));
                }
            }
        }
        let m = Self { dim, entries };
        algebra::cholesky(&mut Plain, &m.packed())?;
        Ok(m)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        let mut e = vec![0.0; d * d];
        for (i, v) in diag.iter().enumerate() {
            e[i * d + i] = *v;
        }
        Self::new(d, e)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is positive-definite")
    }

    pub fn from_packed(sym: &SymMat<f64>) -> Result<Self> {
        let d = sym.dim();
        let mut e = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                e[i * d + j] = *sym.get(i, j);
            }
        }
        Self::new(d, e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Lower triangle packed row by row; the upper triangle is mirrored from it.
    pub fn packed(&self) -> SymMat<f64> {
        let d = self.dim;
        let mut p = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in 0..=i {
                p.push(self.entries[i * d + j]);
            }
        }
        SymMat::from_packed(d, p)
    }

    /// Pullback `Aᵀ g A` under a linear map with `dim × n` matrix `a` (row-major).
    pub fn pullback(&self, a: &[f64], n: usize) -> Result<Self> {
        let d = self.dim;
        if a.len() != d * n {
            return Err(Error::Dimension(format!("pullback map has {} entries, need {}", a.len(), d * n)));
        }
        let mut out = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += a[i * n + p] * self.get(i, j) * a[j * n + q];
                    }
                }
                out[p * n + q] = s;
            }
        }
        // symmetrize against rounding in the double sum
        for p in 0..n {
            for q in 0..p {
                let m = 0.5 * (out[p * n + q] + out[q * n + p]);
                out[p * n + q] = m;
                out[q * n + p] = m;
            }
        }
        Self::new(n, out)
    }
}

/// `g = L Lᵀ + εI` from a lower-triangular factor given in packed order.
pub fn metric_from_factor(dim: usize, factor: &[f64], epsilon: f64) -> Result<MetricTensor> {
    if factor.len() != dim * (dim + 1) / 2 {
        return Err(Error::Dimension(format!(
            "factor has {} entries, a {dim}x{dim} triangle needs {}",
            factor.len(),
            dim * (dim + 1) / 2
        )));
    }
    let l = |i: usize, j: usize| if j <= i { factor[i * (i + 1) / 2 + j] } else { 0.0 };
    let mut e = vec![0.0; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            let mut s = 0.0;
            for k in 0..=a.min(b) {
                s += l(a, k) * l(b, k);
            }
            if a == b {
                s += epsilon;
            }
            e[a * dim + b] = s;
        }
    }
    MetricTensor::new(dim, e)
}

/// `Vᵀ g W`.
pub fn inner_product(g: &MetricTensor, v: &[f64], w: &[f64]) -> Result<f64> {
    let d = g.dim();
    if v.len() != d || w.len() != d {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {} against a {d}-dimensional metric",
            v.len(),
            w.len()
        )));
    }
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += g.get(i, j) * v[i] * w[j];
        }
    }
    Ok(s)
}

/// `√det g` as the product of the Cholesky diagonal.
pub fn volume_element(g: &MetricTensor) -> Result<f64> {
    let c = algebra::cholesky(&mut Plain, &g.packed())?;
    algebra::volume_from_factor(&mut Plain, &c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn factor_identity_with_floor() {
        let g = metric_from_factor(2, &[1.0, 0.0, 1.0], 0.01).unwrap();
        assert_eq!(g.entries(), &[1.01, 0.0, 0.0, 1.01]);
    }

    #[test]
    fn factor_product() {
        let g = metric_from_factor(2, &[2.0, 1.0, 1.0], 0.0).unwrap();
        assert_eq!(g.entries(), &[4.0, 2.0, 2.0, 2.0]);
        assert_eq!(volume_element(&g).unwrap(), 2.0);
    }

    #[test]
    fn zero_factor_leaves_floor() {
        let g = metric_from_factor(3, &[0.0; 6], 1e-3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), if i == j { 1e-3 } else { 0.0 });
            }
        }
        assert!(metric_from_factor(2, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn inner_products() {
        let i2 = MetricTensor::identity(2);
        assert_eq!(inner_product(&i2, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        let d = MetricTensor::diagonal(&[2.0, 3.0]).unwrap();
        assert_eq!(inner_product(&d, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 5.0);
        assert!(matches!(inner_product(&d, &[1.0], &[1.0, 1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn volumes() {
        assert_eq!(volume_element(&MetricTensor::identity(2)).unwrap(), 1.0);
        assert_eq!(volume_element(&MetricTensor::diagonal(&[4.0, 9.0]).unwrap()).unwrap(), 6.0);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        assert!(MetricTensor::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(matches!(
            MetricTensor::new(2, vec![1.0, 2.0, 2.0, 1.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    proptest! {
        #[test]
        fn inner_product_symmetric(
            l in proptest::collection::vec(-3.0f64..3.0, 6),
            v in proptest::collection::vec(-5.0f64..5.0, 3),
            w in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let g = metric_from_factor(3, &l, 1e-3).unwrap();
            let a = inner_product(&g, &v, &w).unwrap();
            let b = inner_product(&g, &w, &v).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            prop_assert!(volume_element(&g).unwrap() > 0.0);
        }
    }
}
