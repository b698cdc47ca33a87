//! Expansion of filtered radar returns into dense weak-supervision regions.
//!
//! Each surviving radar entry spreads a bilateral weight over its bounding
//! box: a spatial Gaussian whose widths adapt to where the return sits inside
//! the box, times a range kernel on RGB difference. Per pixel the maximum
//! weight and its source entry are kept; thresholding yields a binary mask
//! partitioned into per-entry regions.

use crate::config::AssociationConfig;
use crate::radar::{BoundingBox2D, ProjectedRadar};
use crate::raster::{Grid, ImageRaster, PixelMask};

/// Spatial kernel widths for one radar entry, pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSigma {
    pub sigma_dx: f64,
    pub sigma_dy: f64,
}

/// Adapts the spatial kernel to the entry's position in its box.
///
/// The shrink factor `s = (δ_side / (w/2)) · (δ_top / h)` contracts the
/// kernel for returns near the box edge (likely grazing the background) and
/// near the box top, where `δ_side` is the distance to the nearer vertical
/// edge and `δ_top` the distance below the top edge. The final widths are
/// `σ_dx = c·s·w/2` and `σ_dy = c·s·h/2`, with `s` clamped away from zero so
/// the kernel never degenerates.
pub fn adaptive_sigma(u: f64, v: f64, b: &BoundingBox2D, cfg: &AssociationConfig) -> AdaptiveSigma {
    let half_w = 0.5 * b.width();
    let h = b.height();
    let delta_side = (u - b.u_min).min(b.u_max - u);
    let delta_top = v - b.v_min;
    let s = ((delta_side / half_w) * (delta_top / h)).max(cfg.min_shrink_s);
    AdaptiveSigma {
        sigma_dx: cfg.sigma_scale_c * s * half_w,
        sigma_dy: cfg.sigma_scale_c * s * 0.5 * h,
    }
}

/// Scalar bilateral weight between a pixel and a radar entry.
///
/// `delta_i_sq` is the squared Euclidean RGB difference on [0,1] intensities.
pub fn bilateral_weight(
    du: f64,
    dv: f64,
    sigma: AdaptiveSigma,
    delta_i_sq: f64,
    sigma_r: f64,
) -> f64 {
    (-du * du / (2.0 * sigma.sigma_dx * sigma.sigma_dx)
        - dv * dv / (2.0 * sigma.sigma_dy * sigma.sigma_dy)
        - delta_i_sq / (2.0 * sigma_r * sigma_r))
        .exp()
}

/// Per-pixel peak bilateral weight and the entry that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRaster {
    values: Grid<f64>,
    source: Grid<Option<u32>>,
}

impl WeightRaster {
    pub fn width(&self) -> u32 {
        self.values.width()
    }

    pub fn height(&self) -> u32 {
        self.values.height()
    }

    pub fn value(&self, x: u32, y: u32) -> f64 {
        self.values.at(x, y)
    }

    pub fn source(&self, x: u32, y: u32) -> Option<u32> {
        self.source.at(x, y)
    }
}

/// Spreads every boxed radar entry over its box and keeps the per-pixel
/// maximum weight. Pixels outside an entry's box receive no contribution from
/// it; ties on the maximum keep the lower entry index (entries are visited in
/// index order and replaced only on strictly greater weight).
pub fn bilateral_weights(
    image: &ImageRaster,
    radar: &ProjectedRadar,
    boxes: &[BoundingBox2D],
    cfg: &AssociationConfig,
) -> WeightRaster {
    assert!(
        image.width() == radar.width && image.height() == radar.height,
        "image raster {}x{} does not match radar raster {}x{}",
        image.width(),
        image.height(),
        radar.width,
        radar.height
    );
    let mut values = Grid::new_fill(image.width(), image.height(), 0.0).expect("non-empty image");
    let mut source: Grid<Option<u32>> =
        Grid::new_fill(image.width(), image.height(), None).expect("non-empty image");
    for (j, entry) in radar.entries.iter().enumerate() {
        let b = match entry.box_index {
            Some(i) => &boxes[i],
            None => continue,
        };
        let sigma = adaptive_sigma(entry.u as f64, entry.v as f64, b, cfg);
        let reference = image.at(entry.u, entry.v);
        let x_lo = b.u_min.ceil().max(0.0) as u32;
        let x_hi = b.u_max.floor().min((image.width() - 1) as f64) as u32;
        let y_lo = b.v_min.ceil().max(0.0) as u32;
        let y_hi = b.v_max.floor().min((image.height() - 1) as f64) as u32;
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let pixel = image.at(x, y);
                let delta_i_sq = (0..3)
                    .map(|c| {
                        let d = pixel[c] - reference[c];
                        d * d
                    })
                    .sum();
                let w = bilateral_weight(
                    x as f64 - entry.u as f64,
                    y as f64 - entry.v as f64,
                    sigma,
                    delta_i_sq,
                    cfg.sigma_r,
                );
                if w > values.at(x, y) {
                    values.set(x, y, w);
                    source.set(x, y, Some(j as u32));
                }
            }
        }
    }
    WeightRaster { values, source }
}

/// Binary supervision mask with per-pixel region ids (the index of the radar
/// entry whose weight won the pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAssociation {
    mask: PixelMask,
    region_id: Grid<Option<u32>>,
    pub gamma: f64,
}

impl BinaryAssociation {
    pub fn width(&self) -> u32 {
        self.mask.width()
    }

    pub fn height(&self) -> u32 {
        self.mask.height()
    }

    pub fn is_masked(&self, x: u32, y: u32) -> bool {
        self.mask.at(x, y)
    }

    pub fn region(&self, x: u32, y: u32) -> Option<u32> {
        self.region_id.at(x, y)
    }

    pub fn mask(&self) -> &PixelMask {
        &self.mask
    }

    pub fn masked_count(&self) -> usize {
        self.mask.data().iter().filter(|m| **m).count()
    }

    /// Region ids present in the mask, ascending.
    pub fn region_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.region_id.data().iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Pixel count per region id.
    pub fn region_sizes(&self) -> std::collections::BTreeMap<u32, usize> {
        let mut sizes = std::collections::BTreeMap::new();
        for id in self.region_id.data().iter().flatten() {
            *sizes.entry(*id).or_insert(0) += 1;
        }
        sizes
    }
}

/// Thresholds the peak weights: a pixel is supervised iff its weight exceeds
/// `gamma` strictly. Region ids exist exactly where the mask is set, so the
/// regions partition the masked pixels.
pub fn binarize(weights: &WeightRaster, gamma: f64) -> BinaryAssociation {
    let mask = Grid::from_fn(weights.width(), weights.height(), |x, y| {
        weights.value(x, y) > gamma
    })
    .expect("non-empty weight raster");
    let region_id = Grid::from_fn(weights.width(), weights.height(), |x, y| {
        if mask.at(x, y) {
            weights.source(x, y)
        } else {
            None
        }
    })
    .expect("non-empty weight raster");
    BinaryAssociation {
        mask,
        region_id,
        gamma,
    }
}
