use alloc::vec::Vec;

use super::{fit_local_poly, LocalPolyOptions, PropensityKind};
use crate::error::{config, Result};
use crate::model::Sample;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvResult {
    pub bandwidth: f64,
    /// `(bandwidth, mean leave-one-out squared error)` for every candidate.
    pub scores: Vec<(f64, f64)>,
}

/// Leave-one-out choice of the local polynomial bandwidth. Ties go to the
/// larger bandwidth.
pub fn cv_bandwidth(sample: &Sample, opts: &LocalPolyOptions, grid: &[f64]) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(config("bandwidth grid is empty"));
    }
    if grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(config("bandwidth candidates must be positive"));
    }
    let model = fit_local_poly(sample, &LocalPolyOptions { bandwidth: grid[0], ..opts.clone() })?;
    let PropensityKind::LocalPoly(base) = &model.fit else { unreachable!() };
    let n = sample.n();
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &h in grid {
        let fit = base.with_bandwidth(h);
        let mut sse = 0.0;
        for i in 0..n {
            let p = fit.predict_scaled(fit.training_point(i), Some(i));
            let p = p.clamp(model.trim_eps, 1.0 - model.trim_eps);
            let e = fit.training_d()[i] - p;
            sse += e * e;
        }
        let score = sse / n as f64;
        scores.push((h, score));
        best = match best {
            Some((bh, bs)) if bs < score || (bs == score && bh >= h) => Some((bh, bs)),
            _ => Some((h, score)),
        };
    }
    Ok(CvResult { bandwidth: best.map(|b| b.0).unwrap_or(grid[0]), scores })
}
