//! Photometric reconstruction error: L1 + structural similarity blend,
//! per-pixel minimum over sources, and the moving-pixel automask.

use crate::raster::{Grid, ImageRaster, PixelMask};

use super::warp::Reconstruction;
use super::LossError;

/// Stabilizing constants of the structural similarity term, on [0,1]
/// intensities.
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Mirror index without repeating the edge sample (…, 1, 0 | 1, 2, …).
pub(crate) fn reflect(i: i64, n: u32) -> u32 {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * n - 2 - i
    } else {
        i
    };
    r as u32
}

/// 3x3 mean pooling with reflected borders, applied per channel.
pub(crate) fn mean_pool(f: impl Fn(u32, u32) -> f64, width: u32, height: u32) -> Grid<f64> {
    Grid::from_fn(width, height, |x, y| {
        let mut acc = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                acc += f(
                    reflect(x as i64 + dx, width),
                    reflect(y as i64 + dy, height),
                );
            }
        }
        acc / 9.0
    })
    .expect("non-empty raster")
}

/// Per-pixel structural similarity between two images, averaged over
/// channels. Local statistics come from 3x3 mean pooling with reflected
/// borders; values lie in [-1, 1] and reach 1 only for locally identical
/// content.
pub fn ssim_map(a: &ImageRaster, b: &ImageRaster) -> Grid<f64> {
    assert!(
        a.pixels().same_shape(b.pixels()),
        "ssim inputs must share a shape"
    );
    let (w, h) = (a.width(), a.height());
    let mut total = Grid::new_fill(w, h, 0.0).expect("non-empty raster");
    for c in 0..3 {
        let mu_a = mean_pool(|x, y| a.at(x, y)[c], w, h);
        let mu_b = mean_pool(|x, y| b.at(x, y)[c], w, h);
        let p_aa = mean_pool(|x, y| a.at(x, y)[c] * a.at(x, y)[c], w, h);
        let p_bb = mean_pool(|x, y| b.at(x, y)[c] * b.at(x, y)[c], w, h);
        let p_ab = mean_pool(|x, y| a.at(x, y)[c] * b.at(x, y)[c], w, h);
        for y in 0..h {
            for x in 0..w {
                let (ma, mb) = (mu_a.at(x, y), mu_b.at(x, y));
                let var_a = p_aa.at(x, y) - ma * ma;
                let var_b = p_bb.at(x, y) - mb * mb;
                let cov = p_ab.at(x, y) - ma * mb;
                let s = ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
                total.set(x, y, total.at(x, y) + s / 3.0);
            }
        }
    }
    total
}

/// Per-pixel photometric error
/// `pe = (1 - alpha) * L1 + (alpha / 2) * (1 - SSIM)` with the L1 term
/// averaged over channels.
pub fn photometric_error(target: &ImageRaster, other: &ImageRaster, alpha: f64) -> Grid<f64> {
    assert!(
        target.pixels().same_shape(other.pixels()),
        "photometric error inputs must share a shape"
    );
    let ssim = ssim_map(target, other);
    Grid::from_fn(target.width(), target.height(), |x, y| {
        let (t, o) = (target.at(x, y), other.at(x, y));
        let l1 = (0..3).map(|c| (t[c] - o[c]).abs()).sum::<f64>() / 3.0;
        // Identical patches can push the pooled similarity a rounding step
        // past 1; the error is mathematically non-negative, so pin it there.
        ((1.0 - alpha) * l1 + 0.5 * alpha * (1.0 - ssim.at(x, y))).max(0.0)
    })
    .expect("non-empty raster")
}

/// Per-pixel minimum photometric error over several reconstructions. A pixel
/// is valid when at least one source contributes; pixels invalid everywhere
/// are excluded downstream.
pub fn min_reprojection(
    errors: &[Grid<f64>],
    valids: &[&PixelMask],
) -> Result<(Grid<f64>, PixelMask), LossError> {
    if errors.is_empty() {
        return Err(LossError::NoReconstructions);
    }
    assert_eq!(
        errors.len(),
        valids.len(),
        "one validity mask per error map"
    );
    let (w, h) = (errors[0].width(), errors[0].height());
    let mut min_map = Grid::new_fill(w, h, f64::INFINITY).expect("non-empty raster");
    let mut any_valid = Grid::new_fill(w, h, false).expect("non-empty raster");
    for (err, valid) in errors.iter().zip(valids) {
        assert!(
            err.same_shape(&min_map) && valid.same_shape(&min_map),
            "shape mismatch"
        );
        for y in 0..h {
            for x in 0..w {
                if valid.at(x, y) && err.at(x, y) < min_map.at(x, y) {
                    min_map.set(x, y, err.at(x, y));
                    any_valid.set(x, y, true);
                }
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if !any_valid.at(x, y) {
                min_map.set(x, y, 0.0);
            }
        }
    }
    Ok((min_map, any_valid))
}

/// Moving-pixel automask: a pixel stays supervised only where the
/// reconstruction beats the still-scene hypothesis, i.e. where
/// `min_s pe(target, source_s) > min_s pe(target, recon_s)` strictly. Pixels
/// with no valid reconstruction are unmasked.
pub fn automask(
    target: &ImageRaster,
    sources: &[&ImageRaster],
    recons: &[Reconstruction],
    alpha: f64,
) -> PixelMask {
    assert_eq!(sources.len(), recons.len(), "one reconstruction per source");
    let (w, h) = (target.width(), target.height());
    let identity_errors: Vec<Grid<f64>> = sources
        .iter()
        .map(|s| photometric_error(target, s, alpha))
        .collect();
    let recon_errors: Vec<Grid<f64>> = recons
        .iter()
        .map(|r| photometric_error(target, &r.image, alpha))
        .collect();
    Grid::from_fn(w, h, |x, y| {
        let id_min = identity_errors
            .iter()
            .map(|e| e.at(x, y))
            .fold(f64::INFINITY, f64::min);
        let mut recon_min = f64::INFINITY;
        let mut any = false;
        for (e, r) in recon_errors.iter().zip(recons) {
            if r.valid.at(x, y) {
                recon_min = recon_min.min(e.at(x, y));
                any = true;
            }
        }
        any && id_min > recon_min
    })
    .expect("non-empty raster")
}
