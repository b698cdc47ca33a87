//! Edge-aware smoothness of the mean-normalized inverse depth.

use crate::raster::{DepthRaster, Grid, ImageRaster};
use crate::util::pairwise_mean;

/// Mean-normalized inverse depth `d* = (1/d) / mean(1/d)`; the normalization
/// makes the loss invariant to global depth scale.
fn normalized_inverse(depth: &DepthRaster) -> Grid<f64> {
    let (w, h) = (depth.width(), depth.height());
    let mut inv = Vec::with_capacity((w as usize) * (h as usize));
    for y in 0..h {
        for x in 0..w {
            assert!(
                depth.is_valid(x, y),
                "smoothness needs dense depth, invalid at ({x},{y})"
            );
            inv.push(1.0 / depth.at(x, y));
        }
    }
    let mean = pairwise_mean(&inv);
    Grid::from_vec(w, h, inv.iter().map(|v| v / mean).collect()).expect("non-empty raster")
}

/// Mean absolute channel difference between neighboring pixels.
fn image_gradient(image: &ImageRaster, x0: u32, y0: u32, x1: u32, y1: u32) -> f64 {
    let (a, b) = (image.at(x0, y0), image.at(x1, y1));
    (0..3).map(|c| (a[c] - b[c]).abs()).sum::<f64>() / 3.0
}

/// Edge-aware smoothness loss: forward differences of the normalized inverse
/// depth, each attenuated by `exp(-|∂I|)`, averaged per direction over the
/// pixels where the difference exists, then summed over the two directions.
pub fn smoothness_loss(image: &ImageRaster, depth: &DepthRaster) -> f64 {
    assert!(
        image.width() == depth.width() && image.height() == depth.height(),
        "image and depth shapes differ"
    );
    let d = normalized_inverse(depth);
    let (w, h) = (d.width(), d.height());
    let mut terms_x = Vec::new();
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            let grad = (d.at(x + 1, y) - d.at(x, y)).abs();
            terms_x.push(grad * (-image_gradient(image, x, y, x + 1, y)).exp());
        }
    }
    let mut terms_y = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            let grad = (d.at(x, y + 1) - d.at(x, y)).abs();
            terms_y.push(grad * (-image_gradient(image, x, y, x, y + 1)).exp());
        }
    }
    pairwise_mean(&terms_x) + pairwise_mean(&terms_y)
}

/// Analytic gradient of [`smoothness_loss`] with respect to the depth values.
///
/// Writing q = 1/d, m = mean(q), d* = q/m, each term is
/// `coeff·|d*_a - d*_b|` with image-dependent constant coeff. The partial
/// with respect to q_i splits into a local part (terms touching pixel i) and
/// a global part through the normalizing mean, which sums to -L/(n·m); the
/// chain rule through q = 1/d contributes -1/d_i².
pub fn smoothness_gradient(image: &ImageRaster, depth: &DepthRaster) -> Grid<f64> {
    let d = normalized_inverse(depth);
    let (w, h) = (d.width(), d.height());
    let n = (w as usize * h as usize) as f64;
    // Recover m = mean(1/d) from any pixel: d*(p) = (1/d_p)/m.
    let m = (1.0 / depth.at(0, 0)) / d.at(0, 0);
    let count_x = (h as usize) * (w as usize - 1).max(0);
    let count_y = (w as usize) * (h as usize - 1).max(0);
    let mut local = Grid::new_fill(w, h, 0.0).expect("non-empty raster");
    let mut loss = 0.0;
    let mut accumulate = |a: (u32, u32), b: (u32, u32), coeff: f64| {
        let diff = d.at(a.0, a.1) - d.at(b.0, b.1);
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        loss += coeff * diff.abs();
        local.set(a.0, a.1, local.at(a.0, a.1) + coeff * sign);
        local.set(b.0, b.1, local.at(b.0, b.1) - coeff * sign);
    };
    if count_x > 0 {
        for y in 0..h {
            for x in 0..w - 1 {
                let coeff = (-image_gradient(image, x, y, x + 1, y)).exp() / count_x as f64;
                accumulate((x + 1, y), (x, y), coeff);
            }
        }
    }
    if count_y > 0 {
        for y in 0..h - 1 {
            for x in 0..w {
                let coeff = (-image_gradient(image, x, y, x, y + 1)).exp() / count_y as f64;
                accumulate((x, y + 1), (x, y), coeff);
            }
        }
    }
    Grid::from_fn(w, h, |x, y| {
        let d_q = (local.at(x, y) - loss / n) / m;
        let depth_value = depth.at(x, y);
        d_q * (-1.0 / (depth_value * depth_value))
    })
    .expect("non-empty raster")
}
