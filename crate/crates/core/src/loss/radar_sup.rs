//! Radar-derived weak supervision: pseudo-ground-truth construction and the
//! masked absolute-difference loss it drives.

use std::collections::BTreeMap;

use crate::assoc::BinaryAssociation;
use crate::config::RadarNormalization;
use crate::radar::ProjectedRadar;
use crate::raster::{DepthRaster, Grid};
use crate::util::pairwise_sum;

/// Supervision targets for one frame: a pseudo-ground-truth depth valid
/// exactly on the supervised pixels, the per-pixel region id, and the
/// per-region depth offsets.
///
/// The pseudo ground truth preserves predicted depth gradients: within region
/// j it is the prediction shifted by the constant
/// `Δ_j = depth_radar(r_j) - prediction(r_j)`, so only the region's overall
/// placement is corrected, never its shape. The offsets are frozen at build
/// time; consumers treat the pack as constant when differentiating.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionPack {
    pseudo_gt: DepthRaster,
    region_id: Grid<Option<u32>>,
    deltas: BTreeMap<u32, f64>,
    dropped_regions: Vec<u32>,
}

impl SupervisionPack {
    pub fn width(&self) -> u32 {
        self.pseudo_gt.width()
    }

    pub fn height(&self) -> u32 {
        self.pseudo_gt.height()
    }

    /// The supervision mask: true where a pseudo-ground-truth value exists.
    pub fn is_supervised(&self, x: u32, y: u32) -> bool {
        self.pseudo_gt.is_valid(x, y)
    }

    pub fn pseudo_gt(&self) -> &DepthRaster {
        &self.pseudo_gt
    }

    pub fn region(&self, x: u32, y: u32) -> Option<u32> {
        self.region_id.at(x, y)
    }

    pub fn deltas(&self) -> &BTreeMap<u32, f64> {
        &self.deltas
    }

    /// Regions whose seed pixel had no valid prediction, skipped with a
    /// warning by callers.
    pub fn dropped_regions(&self) -> &[u32] {
        &self.dropped_regions
    }

    pub fn supervised_count(&self) -> usize {
        self.pseudo_gt.valid_count()
    }

    /// Supervised pixel count per region id.
    pub fn region_sizes(&self) -> BTreeMap<u32, usize> {
        let mut sizes = BTreeMap::new();
        for y in 0..self.height() {
            for x in 0..self.width() {
                if self.pseudo_gt.is_valid(x, y) {
                    if let Some(j) = self.region_id.at(x, y) {
                        *sizes.entry(j).or_insert(0) += 1;
                    }
                }
            }
        }
        sizes
    }
}

/// Builds the supervision pack from a prediction, the filtered radar entries,
/// and their binary association regions.
///
/// Region ids index into `radar.entries`; each region's seed is its entry's
/// pixel. Regions whose seed lacks a valid prediction are dropped (reported
/// in the pack). Supervised pixels additionally require a valid prediction
/// and a positive shifted value; the rare failures are cleared from the mask.
pub fn build_pseudo_gt(
    prediction: &DepthRaster,
    radar: &ProjectedRadar,
    assoc: &BinaryAssociation,
) -> SupervisionPack {
    assert!(
        prediction.width() == assoc.width() && prediction.height() == assoc.height(),
        "prediction raster and association mask shapes differ"
    );
    let mut deltas = BTreeMap::new();
    let mut dropped_regions = Vec::new();
    for j in assoc.region_ids() {
        let seed = &radar.entries[j as usize];
        if prediction.is_valid(seed.u, seed.v) {
            deltas.insert(j, seed.depth - prediction.at(seed.u, seed.v));
        } else {
            dropped_regions.push(j);
        }
    }
    let (w, h) = (assoc.width(), assoc.height());
    let mut pseudo_gt = DepthRaster::new_invalid(w, h).expect("non-empty raster");
    let mut region_id = Grid::new_fill(w, h, None).expect("non-empty raster");
    for y in 0..h {
        for x in 0..w {
            let Some(j) = assoc.region(x, y) else {
                continue;
            };
            let Some(delta) = deltas.get(&j) else {
                continue;
            };
            if !prediction.is_valid(x, y) {
                continue;
            }
            let shifted = prediction.at(x, y) + delta;
            if shifted > 0.0 && shifted.is_finite() {
                pseudo_gt.set(x, y, shifted);
                region_id.set(x, y, Some(j));
            }
        }
    }
    SupervisionPack {
        pseudo_gt,
        region_id,
        deltas,
        dropped_regions,
    }
}

/// Masked mean absolute difference against the pseudo ground truth.
///
/// With [`RadarNormalization::Masked`] the sum is divided by the supervised
/// pixel count; with [`RadarNormalization::All`] by the full raster size. An
/// empty mask yields 0.
pub fn radar_loss(
    prediction: &DepthRaster,
    pack: &SupervisionPack,
    normalization: RadarNormalization,
) -> f64 {
    assert!(
        prediction.width() == pack.width() && prediction.height() == pack.height(),
        "prediction and supervision shapes differ"
    );
    let mut residuals = Vec::new();
    for y in 0..pack.height() {
        for x in 0..pack.width() {
            if pack.is_supervised(x, y) && prediction.is_valid(x, y) {
                residuals.push((prediction.at(x, y) - pack.pseudo_gt.at(x, y)).abs());
            }
        }
    }
    let n = match normalization {
        RadarNormalization::Masked => residuals.len(),
        RadarNormalization::All => (pack.width() as usize) * (pack.height() as usize),
    };
    if n == 0 {
        return 0.0;
    }
    pairwise_sum(&residuals) / n as f64
}

/// Gradient of [`radar_loss`] with respect to the prediction, the pack held
/// constant: `sign(prediction - pseudo_gt) / N` on supervised pixels, zero
/// elsewhere.
pub fn radar_loss_gradient(
    prediction: &DepthRaster,
    pack: &SupervisionPack,
    normalization: RadarNormalization,
) -> Grid<f64> {
    let mut supervised = 0usize;
    for y in 0..pack.height() {
        for x in 0..pack.width() {
            if pack.is_supervised(x, y) && prediction.is_valid(x, y) {
                supervised += 1;
            }
        }
    }
    let n = match normalization {
        RadarNormalization::Masked => supervised,
        RadarNormalization::All => (pack.width() as usize) * (pack.height() as usize),
    };
    Grid::from_fn(pack.width(), pack.height(), |x, y| {
        if n == 0 || !(pack.is_supervised(x, y) && prediction.is_valid(x, y)) {
            return 0.0;
        }
        let r = prediction.at(x, y) - pack.pseudo_gt.at(x, y);
        if r > 0.0 {
            1.0 / n as f64
        } else if r < 0.0 {
            -1.0 / n as f64
        } else {
            0.0
        }
    })
    .expect("non-empty raster")
}

/// One explicit gradient-descent sweep on the prediction along
/// `-∂L_r/∂prediction`, with an exact line search.
///
/// Along the negative gradient every supervised pixel moves by `t/N` toward
/// its target, so the loss as a function of the step is
/// `φ(t) = (1/N)·Σ | |r_p| - t/N |`, a convex piecewise-linear function
/// minimized at `t* = N · median(|r_p|)` over the moving pixels. Unsupervised
/// pixels have zero gradient and are untouched. Updated values are floored at
/// a small positive depth to respect raster validity.
pub fn descend_radar_loss(
    prediction: &DepthRaster,
    pack: &SupervisionPack,
    normalization: RadarNormalization,
) -> DepthRaster {
    const MIN_DEPTH: f64 = 1e-6;
    let grad = radar_loss_gradient(prediction, pack, normalization);
    let mut moving_residuals = Vec::new();
    for y in 0..pack.height() {
        for x in 0..pack.width() {
            if grad.at(x, y) != 0.0 {
                moving_residuals.push((prediction.at(x, y) - pack.pseudo_gt.at(x, y)).abs());
            }
        }
    }
    let Some(step_over_n) = crate::util::median(&moving_residuals) else {
        return prediction.clone();
    };
    // t* = N * median, applied as prediction - t* * grad where |grad| = 1/N.
    let mut out = prediction.clone();
    for y in 0..pack.height() {
        for x in 0..pack.width() {
            let g = grad.at(x, y);
            if g != 0.0 {
                let n = 1.0 / g.abs();
                let updated = prediction.at(x, y) - step_over_n * n * g;
                out.set(x, y, updated.max(MIN_DEPTH));
            }
        }
    }
    out
}
