//! Finite-difference verification of the analytic loss gradients.
//!
//! Each loss family is wrapped as an [`Objective`] over a flat parameter
//! vector; instances are built deterministically from a seed and placed away
//! from absolute-value kinks so central differences are trustworthy.

use nalgebra::Vector3;

use crate::assoc::{bilateral_weights, binarize};
use crate::config::{AssociationConfig, RadarNormalization};
use crate::loss::photometric::{mean_pool, reflect, SSIM_C1, SSIM_C2};
use crate::loss::{
    build_pseudo_gt, photometric_error, radar_loss, radar_loss_gradient, smoothness_gradient,
    smoothness_loss, velocity_gradient, velocity_loss, SupervisionPack,
};
use crate::radar::{BoundingBox2D, ObjectClass, ProjectedRadar, RadarEntry};
use crate::raster::{DepthRaster, Grid, ImageRaster};
use crate::rng::{range, unit};
use crate::util::pairwise_mean;

/// A scalar function of a flat parameter vector together with its hand-built
/// gradient, used to cross-check the latter against central differences.
pub trait Objective {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// The evaluation point, chosen so no coordinate sits within reach of a
    /// kink of the underlying loss.
    fn point(&self) -> Vec<f64>;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Checkable objective families, in registry order.
pub const OBJECTIVE_NAMES: [&str; 4] = ["photometric", "smoothness", "velocity", "radar"];

#[derive(Debug, thiserror::Error)]
#[error("unknown objective '{0}'; known: photometric, smoothness, velocity, radar")]
pub struct UnknownObjective(pub String);

/// Builds a seeded instance of the named objective. The hidden
/// "self-test-broken" name returns a velocity objective with a deliberately
/// wrong gradient, used to prove the checker rejects bad derivatives.
pub fn build_objective(name: &str, seed: u64) -> Result<Box<dyn Objective>, UnknownObjective> {
    match name {
        "photometric" => Ok(Box::new(PhotometricObjective::new(seed))),
        "smoothness" => Ok(Box::new(SmoothnessObjective::new(seed))),
        "velocity" => Ok(Box::new(VelocityObjective::new(seed))),
        "radar" => Ok(Box::new(RadarObjective::new(seed))),
        "self-test-broken" => Ok(Box::new(BrokenObjective(VelocityObjective::new(seed)))),
        other => Err(UnknownObjective(other.to_string())),
    }
}

/// The coordinate where analytic and numeric derivatives agree worst.
#[derive(Debug, Clone, Copy)]
pub struct CoordCheck {
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckReport {
    pub objective: &'static str,
    pub coords: usize,
    pub worst: CoordCheck,
    pub pass: bool,
}

/// Compares the analytic gradient against central differences with step `h`
/// at every coordinate of the objective's evaluation point. Relative error is
/// measured against the larger magnitude, floored at 1e-6 so near-zero pairs
/// compare absolutely.
pub fn check_objective(obj: &dyn Objective, h: f64, tol: f64) -> CheckReport {
    let x0 = obj.point();
    assert_eq!(x0.len(), obj.dim(), "point length must equal dim");
    let analytic = obj.gradient(&x0);
    assert_eq!(analytic.len(), obj.dim(), "gradient length must equal dim");
    let mut worst = CoordCheck {
        coord: 0,
        analytic: 0.0,
        numeric: 0.0,
        rel: 0.0,
    };
    let mut x = x0.clone();
    for i in 0..x0.len() {
        x[i] = x0[i] + h;
        let up = obj.value(&x);
        x[i] = x0[i] - h;
        let down = obj.value(&x);
        x[i] = x0[i];
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        if rel > worst.rel {
            worst = CoordCheck {
                coord: i,
                analytic: a,
                numeric,
                rel,
            };
        }
    }
    CheckReport {
        objective: obj.name(),
        coords: x0.len(),
        worst,
        pass: worst.rel <= tol,
    }
}

// --- velocity ---

/// `|‖t‖ - gt|` over the translation coordinates.
struct VelocityObjective {
    base: Vec<f64>,
    gt_norm: f64,
}

impl VelocityObjective {
    fn new(seed: u64) -> Self {
        // A direction away from the origin with its norm separated from the
        // ground truth, so neither the norm kink at 0 nor the |·| kink at
        // equality is in reach.
        let dir = Vector3::new(
            range(seed, &[0, 0], -1.0, 1.0),
            range(seed, &[0, 1], -1.0, 1.0),
            range(seed, &[0, 2], -1.0, 1.0),
        );
        let dir = if dir.norm() < 1e-3 {
            Vector3::new(1.0, 0.0, 0.0)
        } else {
            dir.normalize()
        };
        let norm = range(seed, &[1], 1.0, 6.0);
        let margin = range(seed, &[2], 0.3, 1.0);
        let sign = if unit(seed, &[3]) < 0.5 { -1.0 } else { 1.0 };
        let gt_norm = (norm + sign * margin).max(0.1);
        let t = dir * norm;
        VelocityObjective {
            base: vec![t.x, t.y, t.z],
            gt_norm,
        }
    }

    fn vec(x: &[f64]) -> Vector3<f64> {
        Vector3::new(x[0], x[1], x[2])
    }
}

impl Objective for VelocityObjective {
    fn name(&self) -> &'static str {
        "velocity"
    }

    fn dim(&self) -> usize {
        3
    }

    fn point(&self) -> Vec<f64> {
        self.base.clone()
    }

    fn value(&self, x: &[f64]) -> f64 {
        velocity_loss(&Self::vec(x), self.gt_norm)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = velocity_gradient(&Self::vec(x), self.gt_norm);
        vec![g.x, g.y, g.z]
    }
}

/// Velocity objective with the gradient sign flipped; must fail the check.
struct BrokenObjective(VelocityObjective);

impl Objective for BrokenObjective {
    fn name(&self) -> &'static str {
        "self-test-broken"
    }

    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn point(&self) -> Vec<f64> {
        self.0.point()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.0.gradient(x).into_iter().map(|g| -g).collect()
    }
}

// --- smoothness ---

/// Edge-aware smoothness over the flattened depth raster.
struct SmoothnessObjective {
    image: ImageRaster,
    base: Vec<f64>,
    width: u32,
    height: u32,
}

impl SmoothnessObjective {
    const W: u32 = 6;
    const H: u32 = 5;

    fn new(seed: u64) -> Self {
        let image = ImageRaster::from_fn(Self::W, Self::H, |x, y| {
            let p = (y * Self::W + x) as u64;
            [
                range(seed, &[10, p, 0], 0.2, 0.8),
                range(seed, &[10, p, 1], 0.2, 0.8),
                range(seed, &[10, p, 2], 0.2, 0.8),
            ]
        })
        .expect("non-empty raster");
        // Inverse depth rises monotonically with jittered slopes, keeping
        // every forward difference at least 0.003 away from zero: a 1e-4
        // depth step moves inverse depth by about 1e-6, far from any kink.
        let mut base = Vec::with_capacity((Self::W * Self::H) as usize);
        for y in 0..Self::H {
            for x in 0..Self::W {
                let p = (y * Self::W + x) as u64;
                let d_inv =
                    0.05 + 0.01 * (x as f64 + 0.7 * y as f64) + 0.002 * unit(seed, &[11, p]);
                base.push(1.0 / d_inv);
            }
        }
        SmoothnessObjective {
            image,
            base,
            width: Self::W,
            height: Self::H,
        }
    }

    fn raster(&self, x: &[f64]) -> DepthRaster {
        let grid = Grid::from_vec(self.width, self.height, x.to_vec()).expect("sized to raster");
        DepthRaster::from_values(grid)
    }
}

impl Objective for SmoothnessObjective {
    fn name(&self) -> &'static str {
        "smoothness"
    }

    fn dim(&self) -> usize {
        (self.width * self.height) as usize
    }

    fn point(&self) -> Vec<f64> {
        self.base.clone()
    }

    fn value(&self, x: &[f64]) -> f64 {
        smoothness_loss(&self.image, &self.raster(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        smoothness_gradient(&self.image, &self.raster(x))
            .data()
            .to_vec()
    }
}

// --- radar ---

/// Masked radar loss over the flattened prediction, the supervision pack
/// frozen at construction.
struct RadarObjective {
    pack: SupervisionPack,
    base: Vec<f64>,
    width: u32,
    height: u32,
}

impl RadarObjective {
    const W: u32 = 16;
    const H: u32 = 12;

    fn new(seed: u64) -> Self {
        let (w, h) = (Self::W, Self::H);
        let image = ImageRaster::new_fill(w, h, [0.5; 3]).expect("non-empty raster");
        let boxes = vec![
            BoundingBox2D {
                u_min: 1.0,
                v_min: 1.0,
                u_max: 9.0,
                v_max: 10.0,
                class_label: ObjectClass::Car,
            },
            BoundingBox2D {
                u_min: 10.0,
                v_min: 2.0,
                u_max: 15.0,
                v_max: 11.0,
                class_label: ObjectClass::Truck,
            },
        ];
        let prediction = DepthRaster::from_values(
            Grid::from_fn(w, h, |x, y| 8.0 + 0.05 * x as f64 + 0.03 * y as f64)
                .expect("non-empty raster"),
        );
        let entries = vec![
            RadarEntry {
                u: 5,
                v: 6,
                depth: prediction.at(5, 6) + range(seed, &[20], 0.8, 2.5),
                source: 0,
                box_index: Some(0),
            },
            RadarEntry {
                u: 12,
                v: 7,
                depth: prediction.at(12, 7) - range(seed, &[21], 0.8, 2.5),
                source: 0,
                box_index: Some(1),
            },
        ];
        let radar = ProjectedRadar {
            width: w,
            height: h,
            entries,
        };
        let assoc = binarize(
            &bilateral_weights(&image, &radar, &boxes, &AssociationConfig::default()),
            0.5,
        );
        let pack = build_pseudo_gt(&prediction, &radar, &assoc);
        assert!(
            pack.supervised_count() > 0,
            "radar objective needs supervised pixels"
        );
        // Evaluate away from the pseudo ground truth: each supervised pixel
        // sits 0.1..0.6 to one side of its target, so |residual| stays far
        // from the kink at zero under a 1e-4 step.
        let mut base = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                let p = (y * w + x) as u64;
                if pack.is_supervised(x, y) {
                    let offset = range(seed, &[22, p], 0.1, 0.6);
                    let sign = if unit(seed, &[23, p]) < 0.5 {
                        -1.0
                    } else {
                        1.0
                    };
                    base.push((pack.pseudo_gt().at(x, y) + sign * offset).max(0.05));
                } else {
                    base.push(prediction.at(x, y));
                }
            }
        }
        RadarObjective {
            pack,
            base,
            width: w,
            height: h,
        }
    }

    fn raster(&self, x: &[f64]) -> DepthRaster {
        let grid = Grid::from_vec(self.width, self.height, x.to_vec()).expect("sized to raster");
        DepthRaster::from_values(grid)
    }
}

impl Objective for RadarObjective {
    fn name(&self) -> &'static str {
        "radar"
    }

    fn dim(&self) -> usize {
        (self.width * self.height) as usize
    }

    fn point(&self) -> Vec<f64> {
        self.base.clone()
    }

    fn value(&self, x: &[f64]) -> f64 {
        radar_loss(&self.raster(x), &self.pack, RadarNormalization::Masked)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        radar_loss_gradient(&self.raster(x), &self.pack, RadarNormalization::Masked)
            .data()
            .to_vec()
    }
}

// --- photometric ---

/// Mean photometric error over all pixels as a function of the flattened
/// reconstruction image (target fixed), with a hand-derived backward pass
/// through the structural similarity statistics.
struct PhotometricObjective {
    target: ImageRaster,
    base: Vec<f64>,
    alpha: f64,
    width: u32,
    height: u32,
}

impl PhotometricObjective {
    const W: u32 = 10;
    const H: u32 = 8;

    fn new(seed: u64) -> Self {
        let (w, h) = (Self::W, Self::H);
        let target = ImageRaster::from_fn(w, h, |x, y| {
            let p = (y * w + x) as u64;
            [
                range(seed, &[30, p, 0], 0.2, 0.8),
                range(seed, &[30, p, 1], 0.2, 0.8),
                range(seed, &[30, p, 2], 0.2, 0.8),
            ]
        })
        .expect("non-empty raster");
        // Each reconstruction channel is offset 0.05..0.15 from the target,
        // so the per-channel L1 sign cannot flip under a 1e-4 step.
        let mut base = Vec::with_capacity((w * h * 3) as usize);
        for y in 0..h {
            for x in 0..w {
                let p = (y * w + x) as u64;
                for c in 0..3u64 {
                    let offset = range(seed, &[31, p, c], 0.05, 0.15);
                    let sign = if unit(seed, &[32, p, c]) < 0.5 {
                        -1.0
                    } else {
                        1.0
                    };
                    base.push(target.at(x, y)[c as usize] + sign * offset);
                }
            }
        }
        PhotometricObjective {
            target,
            base,
            alpha: 0.85,
            width: w,
            height: h,
        }
    }

    fn image(&self, x: &[f64]) -> ImageRaster {
        let w = self.width;
        ImageRaster::from_fn(w, self.height, |px, py| {
            let i = ((py * w + px) * 3) as usize;
            [x[i], x[i + 1], x[i + 2]]
        })
        .expect("non-empty raster")
    }
}

impl Objective for PhotometricObjective {
    fn name(&self) -> &'static str {
        "photometric"
    }

    fn dim(&self) -> usize {
        (self.width * self.height * 3) as usize
    }

    fn point(&self) -> Vec<f64> {
        self.base.clone()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let recon = self.image(x);
        pairwise_mean(photometric_error(&self.target, &recon, self.alpha).data())
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let recon = self.image(x);
        let (w, h) = (self.width, self.height);
        let n = (w as usize * h as usize) as f64;
        let mut grad = vec![0.0; self.dim()];
        let idx = |px: u32, py: u32, c: usize| ((py * w + px) * 3) as usize + c;
        for c in 0..3 {
            let t = |px: u32, py: u32| self.target.at(px, py)[c];
            let r = |px: u32, py: u32| recon.at(px, py)[c];
            // L1 part: each channel contributes (1-alpha)/3 of its sign.
            for py in 0..h {
                for px in 0..w {
                    let diff = r(px, py) - t(px, py);
                    let sign = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    grad[idx(px, py, c)] += (1.0 - self.alpha) / 3.0 * sign / n;
                }
            }
            // Structural-similarity part: differentiate S through the five
            // pooled statistics, then push each pixel's sensitivity back
            // through the 3x3 reflected mean pool (a tap hit twice by
            // reflection accumulates twice).
            let mu_t = mean_pool(|px, py| t(px, py), w, h);
            let mu_r = mean_pool(|px, py| r(px, py), w, h);
            let p_tt = mean_pool(|px, py| t(px, py) * t(px, py), w, h);
            let p_rr = mean_pool(|px, py| r(px, py) * r(px, py), w, h);
            let p_tr = mean_pool(|px, py| t(px, py) * r(px, py), w, h);
            let ds_coeff = -self.alpha / (6.0 * n);
            for py in 0..h {
                for px in 0..w {
                    let (mt, mr) = (mu_t.at(px, py), mu_r.at(px, py));
                    let var_t = p_tt.at(px, py) - mt * mt;
                    let var_r = p_rr.at(px, py) - mr * mr;
                    let cov = p_tr.at(px, py) - mt * mr;
                    let a = 2.0 * mt * mr + SSIM_C1;
                    let b = 2.0 * cov + SSIM_C2;
                    let cc = mt * mt + mr * mr + SSIM_C1;
                    let dd = var_t + var_r + SSIM_C2;
                    let s = a * b / (cc * dd);
                    let ds_dmu_r =
                        2.0 * mt * (b - a) / (cc * dd) - 2.0 * mr * s * (1.0 / cc - 1.0 / dd);
                    let ds_dp_rr = -s / dd;
                    let ds_dp_tr = 2.0 * a / (cc * dd);
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let qx = reflect(px as i64 + dx, w);
                            let qy = reflect(py as i64 + dy, h);
                            let tap =
                                (ds_dmu_r + ds_dp_rr * 2.0 * r(qx, qy) + ds_dp_tr * t(qx, qy))
                                    / 9.0;
                            grad[idx(qx, qy, c)] += ds_coeff * tap;
                        }
                    }
                }
            }
        }
        grad
    }
}
