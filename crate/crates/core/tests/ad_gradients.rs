//! Every tape primitive against central finite differences.

use ndm::ad::{finite_diff_grad, relative_error, AdError, Array, FdStep, ParamStore, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Build = fn(&mut Tape, Var, Var) -> Result<Var, AdError>;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Array {
    let n = shape.iter().product();
    Array::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// `Σ w ⊙ op(a, b)` with a fixed random `w`, so every output entry matters.
fn probe(build: Build, params: &ParamStore, w: &Array) -> Result<(f64, ParamStore), AdError> {
    let mut tape = Tape::new();
    let bound = tape.bind(params);
    let out = build(&mut tape, bound.get("a")?, bound.get("b")?)?;
    let shape = tape.value(out).shape().to_vec();
    let wv = tape.constant(w.reshaped(shape)?);
    let weighted = tape.mul(out, wv)?;
    let root = tape.sum(weighted)?;
    let g = tape.backward(root)?.params();
    Ok((tape.scalar(root)?, g))
}

fn check(name: &str, build: Build, a_shape: &[usize], b_shape: &[usize], range: (f64, f64), tol: f64) {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        p.insert("a", random(&mut rng, a_shape, range.0, range.1)).unwrap();
        p.insert("b", random(&mut rng, b_shape, range.0, range.1)).unwrap();
        let out_len = {
            let mut t = Tape::new();
            let bd = t.bind_constants(&p);
            let o = build(&mut t, bd.get("a").unwrap(), bd.get("b").unwrap()).unwrap();
            t.value(o).len()
        };
        let w = random(&mut rng, &[out_len], -1.0, 1.0);
        let (_, ad) = probe(build, &p, &w).unwrap();
        let fd = finite_diff_grad(|q: &ParamStore| probe(build, q, &w).map(|r| r.0), &p, FdStep::default()).unwrap();
        let err = relative_error(&ad.flatten(), &fd.flatten(), 1e-10);
        assert!(err < tol, "{name}, seed {seed}: relative error {err:e}");
    }
}

const TOL: f64 = 1e-6;
const WIDE: (f64, f64) = (-2.0, 2.0);
const POSITIVE: (f64, f64) = (0.3, 3.0);

#[test]
fn elementwise_binary() {
    check("add", |t, a, b| t.add(a, b), &[3, 4], &[3, 4], WIDE, TOL);
    check("sub", |t, a, b| t.sub(a, b), &[3, 4], &[3, 4], WIDE, TOL);
    check("mul", |t, a, b| t.mul(a, b), &[3, 4], &[3, 4], WIDE, TOL);
    check("div", |t, a, b| t.div(a, b), &[3, 4], &[3, 4], POSITIVE, TOL);
}

#[test]
fn scalar_broadcast() {
    check("add scalar", |t, a, b| t.add(a, b), &[3, 2], &[], WIDE, TOL);
    check("mul scalar", |t, a, b| t.mul(b, a), &[3, 2], &[], WIDE, TOL);
    check("div by scalar", |t, a, b| t.div(a, b), &[2, 2], &[], POSITIVE, TOL);
    check("scalar over", |t, a, b| t.div(b, a), &[2, 2], &[], POSITIVE, TOL);
}

#[test]
fn linear_algebra() {
    check("matmul", |t, a, b| t.matmul(a, b), &[3, 4], &[4, 2], WIDE, TOL);
    check("transpose", |t, a, b| {
        let at = t.transpose(a)?;
        t.matmul(at, b)
    }, &[4, 3], &[4, 2], WIDE, TOL);
}

#[test]
fn elementwise_unary() {
    check("tanh", |t, a, _| t.tanh(a), &[3, 3], &[], WIDE, TOL);
    check("exp", |t, a, _| t.exp(a), &[3, 3], &[], WIDE, TOL);
    check("log", |t, a, _| t.log(a), &[3, 3], &[], POSITIVE, TOL);
    check("sqrt", |t, a, _| t.sqrt(a), &[3, 3], &[], POSITIVE, TOL);
    check("square", |t, a, _| t.square(a), &[3, 3], &[], WIDE, TOL);
    check("softplus", |t, a, _| t.softplus(a), &[3, 3], &[], (-30.0, 30.0), TOL);
    check("scale", |t, a, _| t.scale(a, -2.5), &[3, 3], &[], WIDE, TOL);
    check("offset", |t, a, _| t.offset(a, 0.7), &[3, 3], &[], WIDE, TOL);
    // Values strictly inside or outside the band keep clamp differentiable.
    check("clamp", |t, a, _| t.clamp(a, -0.5, 0.5), &[4, 4], &[], WIDE, TOL);
}

#[test]
fn reductions() {
    check("sum", |t, a, _| t.sum(a), &[3, 4], &[], WIDE, TOL);
    check("sum axis 0", |t, a, _| t.sum_axis(a, 0), &[3, 4], &[], WIDE, TOL);
    check("sum axis 1", |t, a, _| t.sum_axis(a, 1), &[3, 4], &[], WIDE, TOL);
    check("mean", |t, a, _| t.mean(a), &[3, 4], &[], WIDE, TOL);
    check("variance", |t, a, _| t.variance(a), &[7], &[], WIDE, TOL);
}

#[test]
fn structural() {
    check("concat 0", |t, a, b| t.concat(&[a, b, a], 0), &[2, 3], &[4, 3], WIDE, TOL);
    check("concat 1", |t, a, b| t.concat(&[b, a], 1), &[2, 3], &[2, 1], WIDE, TOL);
    check("slice 0", |t, a, _| t.slice(a, 0, 1, 3), &[4, 3], &[], WIDE, TOL);
    check("slice 1", |t, a, _| t.slice(a, 1, 2, 3), &[4, 3], &[], WIDE, TOL);
    check("reshape", |t, a, b| {
        let r = t.reshape(a, vec![2, 6])?;
        t.matmul(b, r)
    }, &[3, 4], &[1, 2], WIDE, TOL);
}

#[test]
fn composite_expression() {
    check("mlp-like", |t, a, b| {
        let h = t.matmul(a, b)?;
        let h = t.tanh(h)?;
        let s = t.softplus(h)?;
        let q = t.div(s, h)?;
        let m = t.mul(q, h)?;
        t.variance(m)
    }, &[3, 4], &[4, 2], WIDE, 1e-5);
}

#[test]
fn quadratic_form_gradient() {
    // θᵀMθ with symmetric M has gradient 2Mθ.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = random(&mut rng, &[4, 4], -1.0, 1.0);
        let m: Vec<f64> = (0..16).map(|k| (raw.data()[k] + raw.data()[(k % 4) * 4 + k / 4]) / 2.0).collect();
        let m = Array::matrix(4, 4, m).unwrap();
        let theta = random(&mut rng, &[4, 1], -1.0, 1.0);
        let mut tape = Tape::new();
        let th = tape.param("theta", theta.clone());
        let mv = tape.constant(m.clone());
        let mt = tape.matmul(mv, th).unwrap();
        let tt = tape.transpose(th).unwrap();
        let q = tape.matmul(tt, mt).unwrap();
        let g = tape.backward(q).unwrap().wrt(th, &tape);
        for i in 0..4 {
            let expect: f64 = 2.0 * (0..4).map(|j| m.at(i, j) * theta.data()[j]).sum::<f64>();
            assert!((g.data()[i] - expect).abs() < 1e-12);
        }
    }
}
