//! Metric algebra written once over an abstract element type.
//!
//! [`Plain`] evaluates on `f64`; [`OnTape`] records every operation on a
//! [`Tape`] so that curvature and volume are differentiable. Both run the
//! same Cholesky factorization, Christoffel contraction and Ricci stencil,
//! so the two routes produce identical values.

use std::collections::BTreeMap;

use crate::ad::{Tape, Var};
use crate::{Error, Result};

/// Arithmetic needed by the geometry formulas.
pub trait Algebra {
    type Elem: Clone;

    fn add(&mut self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn sub(&mut self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn mul(&mut self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn div(&mut self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn recip(&mut self, a: &Self::Elem) -> Result<Self::Elem>;
    fn scale(&mut self, a: &Self::Elem, c: f64) -> Result<Self::Elem>;
    fn offset(&mut self, a: &Self::Elem, c: f64) -> Result<Self::Elem>;
    /// Square root of a quantity that must be strictly positive; anything
    /// else means the matrix being factored is not positive-definite.
    fn sqrt_pos(&mut self, a: &Self::Elem, what: &str) -> Result<Self::Elem>;

    /// Sum of a non-empty list of terms, accumulated left to right.
    fn sum(&mut self, terms: &[Self::Elem]) -> Result<Self::Elem> {
        let (first, rest) = terms
            .split_first()
            .ok_or(Error::EmptyBatch("sum of no terms"))?;
        let mut acc = first.clone();
        for t in rest {
            acc = self.add(&acc, t)?;
        }
        Ok(acc)
    }
}

/// Plain double-precision evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

impl Algebra for Plain {
    type Elem = f64;

    fn add(&mut self, a: &f64, b: &f64) -> Result<f64> {
        Ok(a + b)
    }
    fn sub(&mut self, a: &f64, b: &f64) -> Result<f64> {
        Ok(a - b)
    }
    fn mul(&mut self, a: &f64, b: &f64) -> Result<f64> {
        Ok(a * b)
    }
    fn div(&mut self, a: &f64, b: &f64) -> Result<f64> {
        finite(a / b, "division")
    }
    fn recip(&mut self, a: &f64) -> Result<f64> {
        finite(1.0 / a, "reciprocal")
    }
    fn scale(&mut self, a: &f64, c: f64) -> Result<f64> {
        Ok(a * c)
    }
    fn offset(&mut self, a: &f64, c: f64) -> Result<f64> {
        Ok(a + c)
    }
    fn sqrt_pos(&mut self, a: &f64, what: &str) -> Result<f64> {
        if *a > 0.0 && a.is_finite() {
            Ok(a.sqrt())
        } else {
            Err(Error::NotPositiveDefinite(format!("{what} = {a}")))
        }
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NotPositiveDefinite(format!("{what} produced {v}")))
    }
}

/// Evaluation recorded on a tape; each element is a column of values.
pub struct OnTape<'t> {
    pub tape: &'t mut Tape,
}

impl Algebra for OnTape<'_> {
    type Elem = Var;

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Ok(self.tape.add(*a, *b)?)
    }
    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Ok(self.tape.sub(*a, *b)?)
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Ok(self.tape.mul(*a, *b)?)
    }
    fn div(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Ok(self.tape.div(*a, *b)?)
    }
    fn recip(&mut self, a: &Var) -> Result<Var> {
        let one = self.tape.constant(crate::ad::Array::full(&[], 1.0));
        Ok(self.tape.div(one, *a)?)
    }
    fn scale(&mut self, a: &Var, c: f64) -> Result<Var> {
        Ok(self.tape.scale(*a, c)?)
    }
    fn offset(&mut self, a: &Var, c: f64) -> Result<Var> {
        Ok(self.tape.offset(*a, c)?)
    }
    fn sqrt_pos(&mut self, a: &Var, what: &str) -> Result<Var> {
        if let Some(bad) = self.tape.value(*a).data().iter().find(|v| **v <= 0.0) {
            return Err(Error::NotPositiveDefinite(format!("{what} = {bad}")));
        }
        Ok(self.tape.sqrt(*a)?)
    }
}

/// Symmetric `d × d` matrix stored as its packed lower triangle, row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat<E> {
    dim: usize,
    packed: Vec<E>,
}

/// Position of `(i, j)` (`j ≤ i`) in a packed lower triangle.
pub fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if j <= i { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl<E: Clone> SymMat<E> {
    pub fn from_packed(dim: usize, packed: Vec<E>) -> Self {
        assert_eq!(packed.len(), packed_len(dim));
        Self { dim, packed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &E {
        &self.packed[packed_index(i, j)]
    }

    pub fn packed(&self) -> &[E] {
        &self.packed
    }
}

/// Lower-triangular factor, packed like [`SymMat`] but not symmetric.
#[derive(Clone, Debug)]
pub struct LowerTri<E> {
    dim: usize,
    packed: Vec<E>,
}

impl<E: Clone> LowerTri<E> {
    /// Entry `(i, j)` with `j ≤ i`.
    pub fn get(&self, i: usize, j: usize) -> &E {
        debug_assert!(j <= i);
        &self.packed[i * (i + 1) / 2 + j]
    }

    pub fn diagonal(&self) -> Vec<E> {
        (0..self.dim).map(|i| self.get(i, i).clone()).collect()
    }
}

/// Cholesky factor `C` with `g = C Cᵀ`.
pub fn cholesky<A: Algebra>(alg: &mut A, g: &SymMat<A::Elem>) -> Result<LowerTri<A::Elem>> {
    let d = g.dim();
    let mut c: Vec<A::Elem> = Vec::with_capacity(packed_len(d));
    let at = |c: &[A::Elem], i: usize, j: usize| c[i * (i + 1) / 2 + j].clone();
    for i in 0..d {
        for j in 0..=i {
            let mut acc = g.get(i, j).clone();
            for k in 0..j {
                let p = alg.mul(&at(&c, i, k), &at(&c, j, k))?;
                acc = alg.sub(&acc, &p)?;
            }
            let entry = if i == j {
                alg.sqrt_pos(&acc, &format!("Cholesky pivot {i}"))?
            } else {
                let diag = at(&c, j, j);
                alg.div(&acc, &diag)?
            };
            c.push(entry);
        }
    }
    Ok(LowerTri { dim: d, packed: c })
}

/// Inverse of a symmetric positive-definite matrix with its Cholesky factor.
pub fn inverse_spd<A: Algebra>(
    alg: &mut A,
    g: &SymMat<A::Elem>,
) -> Result<(SymMat<A::Elem>, LowerTri<A::Elem>)> {
    let d = g.dim();
    let c = cholesky(alg, g)?;
    // m = C⁻¹, lower triangular, by forward substitution.
    let mut m: Vec<Vec<Option<A::Elem>>> = vec![vec![None; d]; d];
    for i in 0..d {
        let inv_diag = alg.recip(c.get(i, i))?;
        for j in 0..i {
            let mut terms = Vec::with_capacity(i - j);
            for k in j..i {
                let mkj = m[k][j].clone().expect("filled in earlier rows");
                terms.push(alg.mul(c.get(i, k), &mkj)?);
            }
            let s = alg.sum(&terms)?;
            let q = alg.mul(&s, &inv_diag)?;
            m[i][j] = Some(alg.scale(&q, -1.0)?);
        }
        m[i][i] = Some(inv_diag);
    }
    // g⁻¹ = mᵀ m.
    let mut packed = Vec::with_capacity(packed_len(d));
    for a in 0..d {
        for b in 0..=a {
            let mut terms = Vec::with_capacity(d - a);
            for k in a..d {
                let mka = m[k][a].clone().expect("lower triangle");
                let mkb = m[k][b].clone().expect("lower triangle");
                terms.push(alg.mul(&mka, &mkb)?);
            }
            packed.push(alg.sum(&terms)?);
        }
    }
    Ok((SymMat::from_packed(d, packed), c))
}

/// `√det g` as the product of the Cholesky diagonal.
pub fn volume_from_factor<A: Algebra>(alg: &mut A, c: &LowerTri<A::Elem>) -> Result<A::Elem> {
    let diag = c.diagonal();
    let mut acc = diag[0].clone();
    for v in &diag[1..] {
        acc = alg.mul(&acc, v)?;
    }
    Ok(acc)
}

/// Christoffel symbols of the second kind, `Γᵏ_ij`, symmetric in `(i, j)`.
#[derive(Clone, Debug)]
pub struct Christoffel<E> {
    dim: usize,
    // [k][packed(i, j)]
    entries: Vec<Vec<E>>,
}

impl<E: Clone> Christoffel<E> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γᵏ_ij`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> &E {
        &self.entries[k][packed_index(i, j)]
    }
}

/// Integer offsets (in units of the step `h`) at which a metric is sampled.
#[derive(Clone, Debug)]
pub struct Stencil {
    dim: usize,
    offsets: Vec<Vec<i32>>,
    index: BTreeMap<Vec<i32>, usize>,
}

fn unit(dim: usize, axis: usize, sign: i32) -> Vec<i32> {
    let mut e = vec![0; dim];
    e[axis] = sign;
    e
}

fn add_offsets(a: &[i32], b: &[i32]) -> Vec<i32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl Stencil {
    fn build(dim: usize, centers: &[Vec<i32>]) -> Self {
        let mut offsets = Vec::new();
        let mut index = BTreeMap::new();
        let mut push = |o: Vec<i32>| {
            if !index.contains_key(&o) {
                index.insert(o.clone(), offsets.len());
                offsets.push(o);
            }
        };
        for c in centers {
            push(c.clone());
            for i in 0..dim {
                push(add_offsets(c, &unit(dim, i, 1)));
                push(add_offsets(c, &unit(dim, i, -1)));
            }
        }
        Self { dim, offsets, index }
    }

    /// Offsets for first derivatives at the origin: `0, ±eᵢ`.
    pub fn christoffel(dim: usize) -> Self {
        Self::build(dim, &[vec![0; dim]])
    }

    /// Offsets for nested central differences of Christoffel symbols:
    /// every `c + {0, ±eᵢ}` with `c ∈ {0, ±eₘ}`.
    pub fn ricci(dim: usize) -> Self {
        let mut centers = vec![vec![0; dim]];
        for m in 0..dim {
            centers.push(unit(dim, m, 1));
            centers.push(unit(dim, m, -1));
        }
        Self::build(dim, &centers)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[Vec<i32>] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    fn position(&self, o: &[i32]) -> usize {
        self.index[o]
    }

    /// The sample point `x + h·o` for every offset, in stencil order.
    pub fn points(&self, x: &[f64], h: f64) -> Vec<Vec<f64>> {
        self.offsets
            .iter()
            .map(|o| x.iter().zip(o).map(|(xi, oi)| xi + h * f64::from(*oi)).collect())
            .collect()
    }
}

/// Metric samples laid out on a [`Stencil`].
pub struct Samples<'a, E> {
    pub stencil: &'a Stencil,
    pub metrics: &'a [SymMat<E>],
    pub h: f64,
}

impl<E: Clone> Samples<'_, E> {
    fn at(&self, o: &[i32]) -> &SymMat<E> {
        &self.metrics[self.stencil.position(o)]
    }
}

/// `Γ` at stencil offset `center`, from central differences of the samples
/// at `center ± eᵢ`. Also returns `g⁻¹` and the Cholesky factor at `center`.
pub fn christoffel_at<A: Algebra>(
    alg: &mut A,
    samples: &Samples<'_, A::Elem>,
    center: &[i32],
) -> Result<(Christoffel<A::Elem>, SymMat<A::Elem>, LowerTri<A::Elem>)> {
    let d = samples.stencil.dim();
    let inv_2h = 1.0 / (2.0 * samples.h);
    let (ginv, factor) = inverse_spd(alg, samples.at(center))?;

    // dg[i] = ∂ᵢ g, packed.
    let mut dg: Vec<Vec<A::Elem>> = Vec::with_capacity(d);
    for i in 0..d {
        let plus = samples.at(&add_offsets(center, &unit(d, i, 1)));
        let minus = samples.at(&add_offsets(center, &unit(d, i, -1)));
        let mut comps = Vec::with_capacity(packed_len(d));
        for (p, m) in plus.packed().iter().zip(minus.packed()) {
            let diff = alg.sub(p, m)?;
            comps.push(alg.scale(&diff, inv_2h)?);
        }
        dg.push(comps);
    }
    let dgi = |i: usize, a: usize, b: usize| dg[i][packed_index(a, b)].clone();

    // First kind: Γ_l,ij = ½(∂ᵢ g_jl + ∂ⱼ g_il − ∂ₗ g_ij).
    let mut first: Vec<Vec<A::Elem>> = Vec::with_capacity(d);
    for l in 0..d {
        let mut row = Vec::with_capacity(packed_len(d));
        for i in 0..d {
            for j in 0..=i {
                let s = alg.add(&dgi(i, j, l), &dgi(j, i, l))?;
                let s = alg.sub(&s, &dgi(l, i, j))?;
                row.push(alg.scale(&s, 0.5)?);
            }
        }
        first.push(row);
    }

    // Second kind: Γᵏ_ij = gᵏˡ Γ_l,ij.
    let mut entries = Vec::with_capacity(d);
    for k in 0..d {
        let mut row = Vec::with_capacity(packed_len(d));
        for p in 0..packed_len(d) {
            let mut terms = Vec::with_capacity(d);
            for (l, f) in first.iter().enumerate() {
                terms.push(alg.mul(ginv.get(k, l), &f[p])?);
            }
            row.push(alg.sum(&terms)?);
        }
        entries.push(row);
    }
    Ok((Christoffel { dim: d, entries }, ginv, factor))
}

/// Ricci scalar at the stencil origin.
///
/// `Rⱼₖ = ∂ᵢΓⁱ_kj − ∂ₖΓⁱ_ij + Γⁱ_im Γᵐ_kj − Γⁱ_km Γᵐ_ij` and `R = gʲᵏ Rⱼₖ`,
/// with the derivatives of `Γ` taken by central differences over `±eₘ`.
/// Requires a stencil built by [`Stencil::ricci`].
pub fn ricci_scalar_at<A: Algebra>(alg: &mut A, samples: &Samples<'_, A::Elem>) -> Result<A::Elem> {
    let d = samples.stencil.dim();
    let inv_2h = 1.0 / (2.0 * samples.h);
    let origin = vec![0; d];
    let (gamma, ginv, _) = christoffel_at(alg, samples, &origin)?;

    // dgamma[m] = ∂ₘ Γ, laid out like Christoffel entries.
    let mut dgamma: Vec<Christoffel<A::Elem>> = Vec::with_capacity(d);
    for m in 0..d {
        let (plus, _, _) = christoffel_at(alg, samples, &unit(d, m, 1))?;
        let (minus, _, _) = christoffel_at(alg, samples, &unit(d, m, -1))?;
        let mut entries = Vec::with_capacity(d);
        for (pk, mk) in plus.entries.iter().zip(&minus.entries) {
            let mut row = Vec::with_capacity(pk.len());
            for (p, q) in pk.iter().zip(mk) {
                let diff = alg.sub(p, q)?;
                row.push(alg.scale(&diff, inv_2h)?);
            }
            entries.push(row);
        }
        dgamma.push(Christoffel { dim: d, entries });
    }

    let mut contracted = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for i in 0..d {
                pos.push(dgamma[i].get(i, k, j).clone());
                neg.push(dgamma[k].get(i, i, j).clone());
                for m in 0..d {
                    pos.push(alg.mul(gamma.get(i, i, m), gamma.get(m, k, j))?);
                    neg.push(alg.mul(gamma.get(i, k, m), gamma.get(m, i, j))?);
                }
            }
            let p = alg.sum(&pos)?;
            let n = alg.sum(&neg)?;
            let ricci_jk = alg.sub(&p, &n)?;
            contracted.push(alg.mul(ginv.get(j, k), &ricci_jk)?);
        }
    }
    alg.sum(&contracted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(d: usize, full: &[f64]) -> SymMat<f64> {
        let mut p = Vec::new();
        for i in 0..d {
            for j in 0..=i {
                p.push(full[i * d + j]);
            }
        }
        SymMat::from_packed(d, p)
    }

    #[test]
    fn inverse_of_known_matrix() {
        let g = sym(2, &[4.0, 2.0, 2.0, 2.0]);
        let (inv, c) = inverse_spd(&mut Plain, &g).unwrap();
        // [[4,2],[2,2]]⁻¹ = [[0.5,-0.5],[-0.5,1]]
        assert!((inv.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((inv.get(1, 0) + 0.5).abs() < 1e-15);
        assert!((inv.get(1, 1) - 1.0).abs() < 1e-15);
        assert!((volume_from_factor(&mut Plain, &c).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_fails_cholesky() {
        let g = sym(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&mut Plain, &g), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(Stencil::christoffel(2).len(), 5);
        assert_eq!(Stencil::ricci(2).len(), 13);
        assert_eq!(Stencil::ricci(3).len(), 25);
        assert_eq!(Stencil::ricci(2).offsets()[0], vec![0, 0]);
    }

    #[test]
    fn tape_and_plain_inverse_agree() {
        let g = sym(3, &[5.0, 1.0, 0.5, 1.0, 4.0, -0.3, 0.5, -0.3, 3.0]);
        let (plain, _) = inverse_spd(&mut Plain, &g).unwrap();
        let mut tape = Tape::new();
        let vars: Vec<Var> = g
            .packed()
            .iter()
            .map(|v| tape.constant(crate::ad::Array::vector(vec![*v]).unwrap()))
            .collect();
        let gv = SymMat::from_packed(3, vars);
        let (inv, _) = inverse_spd(&mut OnTape { tape: &mut tape }, &gv).unwrap();
        for (a, b) in plain.packed().iter().zip(inv.packed()) {
            assert_eq!(*a, tape.value(*b).data()[0]);
        }
    }
}
