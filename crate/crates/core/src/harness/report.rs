use serde::{Deserialize, Serialize};

use crate::ad::{Array, Tape};
use crate::{Error, Result};

use super::model::{layer_geometry, GeometryOptions, NdmModel};

/// Points per tape when building a report.
const REPORT_CHUNK: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub layer: usize,
    pub count: usize,
    pub ricci_mean: f64,
    pub ricci_min: f64,
    pub ricci_max: f64,
    pub volume_mean: f64,
    /// Population variance of `√det g`.
    pub volume_variance: f64,
}

/// Curvature and volume statistics of every layer over one point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub points: usize,
    pub curvature_h: f64,
    pub layers: Vec<LayerStats>,
}

fn stats(layer: usize, ricci: &[f64], volume: &[f64]) -> LayerStats {
    let n = ricci.len() as f64;
    let ricci_mean = ricci.iter().sum::<f64>() / n;
    let volume_mean = volume.iter().sum::<f64>() / n;
    LayerStats {
        layer,
        count: ricci.len(),
        ricci_mean,
        ricci_min: ricci.iter().copied().fold(f64::INFINITY, f64::min),
        ricci_max: ricci.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        volume_mean,
        volume_variance: volume.iter().map(|v| (v - volume_mean).powi(2)).sum::<f64>() / n,
    }
}

/// Evaluates every layer's metric at that layer's incoming coordinates for
/// each row of `points`.
pub fn geometry_report(model: &NdmModel, points: &Array, h: f64) -> Result<GeometryReport> {
    let (n, _) = points.dims2()?;
    if n == 0 {
        return Err(Error::EmptyBatch("geometry report needs at least one point"));
    }
    let layers = model.layers().len();
    let mut ricci = vec![Vec::with_capacity(n); layers];
    let mut volume = vec![Vec::with_capacity(n); layers];
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(REPORT_CHUNK) {
        let mut tape = Tape::new();
        let bound = tape.bind_constants(model.params());
        let x = tape.constant(points.select_rows(chunk)?);
        let trace = model.forward(&mut tape, &bound, x, None)?;
        let opts = GeometryOptions { subsample: chunk.len(), h };
        for (k, g) in layer_geometry(model, &mut tape, &bound, &trace.charts, opts)?.iter().enumerate() {
            ricci[k].extend_from_slice(tape.value(g.ricci).data());
            volume[k].extend_from_slice(tape.value(g.volume).data());
        }
    }
    Ok(GeometryReport {
        points: n,
        curvature_h: h,
        layers: (0..layers).map(|k| stats(k, &ricci[k], &volume[k])).collect(),
    })
}
