use super::algebra::{self, OnTape, Samples, Stencil, SymMat};
use super::MetricNet;
use crate::ad::{Array, Bound, Tape, Var};
use crate::Result;

/// Ricci scalar and volume element per point, as `[k, 1]` tape columns.
#[derive(Clone, Copy, Debug)]
pub struct PointGeometry {
    pub ricci: Var,
    pub volume: Var,
}

/// Curvature and volume of a metric net's field at each row of `points`.
///
/// All stencil points for all rows go through the metric net in one batched
/// pass; the Ricci stencil is then evaluated column-wise on the tape, so the
/// result is differentiable with respect to both the net parameters and the
/// points.
pub fn point_geometry(
    tape: &mut Tape,
    net: &MetricNet,
    params: &Bound,
    points: Var,
    h: f64,
) -> Result<PointGeometry> {
    let (k, d) = tape.value(points).dims2()?;
    let stencil = Stencil::ricci(d);
    let s = stencil.len();

    // Row (o * k + n) holds point n shifted by offset o.
    let mut shift = Vec::with_capacity(s * k * d);
    for offset in stencil.offsets() {
        for _ in 0..k {
            shift.extend(offset.iter().map(|c| h * f64::from(*c)));
        }
    }
    let shift = tape.constant(Array::matrix(s * k, d, shift)?);
    let repeated = tape.concat(&vec![points; s], 0)?;
    let shifted = tape.add(repeated, shift)?;

    let columns = net.metric_columns(tape, params, shifted)?;
    let mut metrics = Vec::with_capacity(s);
    for o in 0..s {
        let packed = columns
            .packed()
            .iter()
            .map(|c| tape.slice(*c, 0, o * k, (o + 1) * k))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        metrics.push(SymMat::from_packed(d, packed));
    }

    let mut alg = OnTape { tape };
    let samples = Samples { stencil: &stencil, metrics: &metrics, h };
    let ricci = algebra::ricci_scalar_at(&mut alg, &samples)?;
    let factor = algebra::cholesky(&mut alg, &metrics[0])?;
    let volume = algebra::volume_from_factor(&mut alg, &factor)?;
    Ok(PointGeometry { ricci, volume })
}
