//! Training objectives over caller-supplied rasters and poses: view
//! reconstruction, photometric error with minimum-reprojection and automask,
//! edge-aware smoothness, weak velocity supervision, radar-derived weak
//! supervision, and the weighted total.

pub mod photometric;
pub mod radar_sup;
pub mod smoothness;
pub mod velocity;
pub mod warp;

pub use photometric::{automask, min_reprojection, photometric_error, ssim_map};
pub use radar_sup::{
    build_pseudo_gt, descend_radar_loss, radar_loss, radar_loss_gradient, SupervisionPack,
};
pub use smoothness::{smoothness_gradient, smoothness_loss};
pub use velocity::{velocity_gradient, velocity_loss};
pub use warp::{reconstruct_view, Reconstruction};

use serde::Serialize;

use crate::config::LossConfig;
use crate::geometry::{CameraModel, PoseSE3};
use crate::raster::{DepthRaster, Grid, ImageRaster, PixelMask};
use crate::util::pairwise_mean;

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("minimum reprojection needs at least one reconstruction")]
    NoReconstructions,
    #[error("loss stack needs at least one scale depth raster")]
    NoScales,
    #[error("scale {scale} depth raster must be valid at every pixel")]
    SparseDepth { scale: usize },
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("loss component {name} is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("loss component {name} is negative ({value})")]
    Negative { name: &'static str, value: f64 },
}

/// Unweighted loss components, each a nonnegative scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossComponents {
    pub photometric: f64,
    pub smoothness: f64,
    pub velocity: f64,
    pub radar: f64,
}

/// Components, weights, and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub photometric: f64,
    pub smoothness: f64,
    pub velocity: f64,
    pub radar: f64,
    pub lambda_smoothness: f64,
    pub lambda_velocity: f64,
    pub lambda_radar: f64,
    pub total: f64,
}

/// Weighted total
/// `photometric + λ_s·smoothness + λ_v·velocity + λ_r·radar`.
/// Non-finite or negative components are rejected rather than propagated.
pub fn total_loss(
    components: &LossComponents,
    lambda_smoothness: f64,
    lambda_velocity: f64,
    lambda_radar: f64,
) -> Result<LossReport, LossError> {
    let named = [
        ("photometric", components.photometric),
        ("smoothness", components.smoothness),
        ("velocity", components.velocity),
        ("radar", components.radar),
    ];
    for (name, value) in named {
        if !value.is_finite() {
            return Err(LossError::NonFinite { name, value });
        }
        if value < 0.0 {
            return Err(LossError::Negative { name, value });
        }
    }
    let total = components.photometric
        + lambda_smoothness * components.smoothness
        + lambda_velocity * components.velocity
        + lambda_radar * components.radar;
    Ok(LossReport {
        photometric: components.photometric,
        smoothness: components.smoothness,
        velocity: components.velocity,
        radar: components.radar,
        lambda_smoothness,
        lambda_velocity,
        lambda_radar,
        total,
    })
}

/// One temporally adjacent view: its image, the camera-frame pose mapping
/// target coordinates into it, and (when known) the ground-truth translation
/// norm in meters for weak velocity supervision.
pub struct SourceView<'a> {
    pub image: &'a ImageRaster,
    pub source_from_target: PoseSE3,
    pub gt_translation_norm: Option<f64>,
}

/// Everything the full loss stack consumes for one target frame.
pub struct StackInputs<'a> {
    pub camera: &'a CameraModel,
    pub target: &'a ImageRaster,
    pub sources: &'a [SourceView<'a>],
    /// Decoder outputs, finest first; each is bilinearly upsampled to the
    /// target resolution before any loss touches it.
    pub scale_depths: &'a [DepthRaster],
    pub supervision: Option<&'a SupervisionPack>,
}

/// Finest-scale diagnostic maps produced alongside the report.
#[derive(Debug, Clone)]
pub struct StackMaps {
    /// Per-pixel minimum reprojection error.
    pub min_error: Grid<f64>,
    /// Pixels with at least one valid reconstruction.
    pub error_valid: PixelMask,
    /// Moving-pixel mask, present when automasking was enabled.
    pub automask: Option<PixelMask>,
    /// Signed prediction-minus-pseudo-ground-truth residual on supervised
    /// pixels, zero elsewhere; present when supervision was supplied.
    pub radar_residual: Option<Grid<f64>>,
}

/// Evaluates the full stack: per scale, the depth is upsampled to the target
/// resolution, every source is warped into the target view, and the
/// photometric term averages the per-pixel minimum reprojection error over
/// pixels that are covered (and, when enabled, automasked); the smoothness
/// term is computed on the same upsampled raster. Both are averaged over
/// scales. Velocity supervision averages over sources with a known
/// ground-truth translation norm, and the radar term applies once at the
/// finest scale.
pub fn evaluate_stack(
    inputs: &StackInputs,
    cfg: &LossConfig,
) -> Result<(LossReport, StackMaps), LossError> {
    let cam = inputs.camera;
    let (w, h) = (cam.width, cam.height);
    if inputs.scale_depths.is_empty() {
        return Err(LossError::NoScales);
    }
    if inputs.target.width() != w || inputs.target.height() != h {
        return Err(LossError::ShapeMismatch(format!(
            "target image {}x{} does not match camera {}x{}",
            inputs.target.width(),
            inputs.target.height(),
            w,
            h
        )));
    }
    for (i, s) in inputs.sources.iter().enumerate() {
        if s.image.width() != w || s.image.height() != h {
            return Err(LossError::ShapeMismatch(format!(
                "source image {i} shape differs from the target"
            )));
        }
    }
    if let Some(pack) = inputs.supervision {
        if pack.width() != w || pack.height() != h {
            return Err(LossError::ShapeMismatch(format!(
                "supervision pack {}x{} does not match camera {}x{}",
                pack.width(),
                pack.height(),
                w,
                h
            )));
        }
    }

    let source_images: Vec<&ImageRaster> = inputs.sources.iter().map(|s| s.image).collect();
    let mut per_scale_photometric = Vec::with_capacity(inputs.scale_depths.len());
    let mut per_scale_smoothness = Vec::with_capacity(inputs.scale_depths.len());
    let mut finest_depth = None;
    let mut maps = None;
    for (scale, depth) in inputs.scale_depths.iter().enumerate() {
        if depth.valid_count() != (depth.width() as usize) * (depth.height() as usize) {
            return Err(LossError::SparseDepth { scale });
        }
        let up = depth
            .resize_bilinear(w, h)
            .expect("camera dimensions are nonzero");
        per_scale_smoothness.push(smoothness_loss(inputs.target, &up));

        if inputs.sources.is_empty() {
            per_scale_photometric.push(0.0);
            if scale == 0 {
                maps = Some(StackMaps {
                    min_error: Grid::new_fill(w, h, 0.0).expect("non-empty"),
                    error_valid: Grid::new_fill(w, h, false).expect("non-empty"),
                    automask: None,
                    radar_residual: None,
                });
                finest_depth = Some(up);
            }
            continue;
        }

        let recons: Vec<Reconstruction> = inputs
            .sources
            .iter()
            .map(|s| reconstruct_view(s.image, inputs.target, &up, &s.source_from_target, cam))
            .collect();
        let errors: Vec<Grid<f64>> = recons
            .iter()
            .map(|r| photometric_error(inputs.target, &r.image, cfg.alpha))
            .collect();
        let valids: Vec<&PixelMask> = recons.iter().map(|r| &r.valid).collect();
        let (min_error, error_valid) = min_reprojection(&errors, &valids)?;
        let moving = cfg
            .automask
            .then(|| automask(inputs.target, &source_images, &recons, cfg.alpha));
        let mut kept = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let masked_in = moving.as_ref().map_or(true, |m| m.at(x, y));
                if error_valid.at(x, y) && masked_in {
                    kept.push(min_error.at(x, y));
                }
            }
        }
        per_scale_photometric.push(pairwise_mean(&kept));
        if scale == 0 {
            maps = Some(StackMaps {
                min_error,
                error_valid,
                automask: moving,
                radar_residual: None,
            });
            finest_depth = Some(up);
        }
    }
    let mut maps = maps.expect("at least one scale");
    let finest_depth = finest_depth.expect("at least one scale");

    let velocity_terms: Vec<f64> = inputs
        .sources
        .iter()
        .filter_map(|s| {
            s.gt_translation_norm
                .map(|gt| velocity_loss(&s.source_from_target.translation, gt))
        })
        .collect();
    let velocity = pairwise_mean(&velocity_terms);

    let radar = match inputs.supervision {
        Some(pack) => {
            maps.radar_residual = Some(
                Grid::from_fn(w, h, |x, y| {
                    if pack.is_supervised(x, y) && finest_depth.is_valid(x, y) {
                        finest_depth.at(x, y) - pack.pseudo_gt().at(x, y)
                    } else {
                        0.0
                    }
                })
                .expect("non-empty"),
            );
            radar_loss(&finest_depth, pack, cfg.radar_normalization)
        }
        None => 0.0,
    };

    let components = LossComponents {
        photometric: pairwise_mean(&per_scale_photometric),
        smoothness: pairwise_mean(&per_scale_smoothness),
        velocity,
        radar,
    };
    let report = total_loss(
        &components,
        cfg.lambda_smoothness,
        cfg.lambda_velocity,
        cfg.lambda_radar,
    )?;
    Ok((report, maps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assoc::{bilateral_weights, binarize};
    use crate::config::AssociationConfig;
    use crate::radar::{BoundingBox2D, ObjectClass, ProjectedRadar, RadarEntry};
    use nalgebra::Vector3;

    #[test]
    fn total_is_the_weighted_sum() {
        let zero = LossComponents {
            photometric: 0.0,
            smoothness: 0.0,
            velocity: 0.0,
            radar: 0.0,
        };
        assert_eq!(total_loss(&zero, 1e-3, 0.02, 0.2).unwrap().total, 0.0);

        let p = LossComponents {
            photometric: 1.0,
            ..zero
        };
        assert_eq!(total_loss(&p, 1e-3, 0.02, 0.2).unwrap().total, 1.0);

        let r = LossComponents { radar: 1.0, ..zero };
        assert!((total_loss(&r, 1e-3, 0.02, 0.2).unwrap().total - 0.2).abs() < 1e-15);

        let all = LossComponents {
            photometric: 0.5,
            smoothness: 2.0,
            velocity: 3.0,
            radar: 1.5,
        };
        let report = total_loss(&all, 1e-3, 0.02, 0.2).unwrap();
        let expect = 0.5 + 1e-3 * 2.0 + 0.02 * 3.0 + 0.2 * 1.5;
        assert!((report.total - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn total_is_linear_in_each_component() {
        let base = LossComponents {
            photometric: 0.3,
            smoothness: 1.1,
            velocity: 0.7,
            radar: 0.9,
        };
        let t0 = total_loss(&base, 1e-3, 0.02, 0.2).unwrap().total;
        let bumped = LossComponents {
            smoothness: base.smoothness + 10.0,
            ..base
        };
        let t1 = total_loss(&bumped, 1e-3, 0.02, 0.2).unwrap().total;
        assert!((t1 - t0 - 1e-3 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn nan_and_negative_components_are_rejected() {
        let zero = LossComponents {
            photometric: 0.0,
            smoothness: 0.0,
            velocity: 0.0,
            radar: 0.0,
        };
        let nan = LossComponents {
            velocity: f64::NAN,
            ..zero
        };
        assert!(matches!(
            total_loss(&nan, 1e-3, 0.02, 0.2),
            Err(LossError::NonFinite {
                name: "velocity",
                ..
            })
        ));
        let neg = LossComponents {
            radar: -0.1,
            ..zero
        };
        assert!(matches!(
            total_loss(&neg, 1e-3, 0.02, 0.2),
            Err(LossError::Negative { name: "radar", .. })
        ));
    }

    fn test_camera(width: u32, height: u32) -> CameraModel {
        CameraModel::new(
            40.0,
            40.0,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
        .unwrap()
    }

    #[test]
    fn static_identical_views_produce_zero_total() {
        let cam = test_camera(16, 12);
        let target = ImageRaster::new_fill(16, 12, [0.4; 3]).unwrap();
        let source = target.clone();
        let sources = [SourceView {
            image: &source,
            source_from_target: PoseSE3::identity(),
            gt_translation_norm: Some(0.0),
        }];
        let depths = [DepthRaster::constant(16, 12, 8.0).unwrap()];
        let inputs = StackInputs {
            camera: &cam,
            target: &target,
            sources: &sources,
            scale_depths: &depths,
            supervision: None,
        };
        let (report, maps) = evaluate_stack(&inputs, &LossConfig::default()).unwrap();
        // The reconstruction matches the unwarped source exactly, so the
        // strict automask removes everything and every component vanishes.
        assert_eq!(report.total, 0.0);
        assert!(maps.automask.unwrap().data().iter().all(|m| !m));
    }

    #[test]
    fn constant_mismatch_matches_the_closed_form() {
        let cam = test_camera(16, 12);
        let target = ImageRaster::new_fill(16, 12, [0.3; 3]).unwrap();
        let source = ImageRaster::new_fill(16, 12, [0.9; 3]).unwrap();
        let sources = [SourceView {
            image: &source,
            source_from_target: PoseSE3::identity(),
            gt_translation_norm: None,
        }];
        // Two scales of the same constant depth: the multi-scale average must
        // equal the single-scale value.
        let depths = [
            DepthRaster::constant(16, 12, 8.0).unwrap(),
            DepthRaster::constant(8, 6, 8.0).unwrap(),
        ];
        let inputs = StackInputs {
            camera: &cam,
            target: &target,
            sources: &sources,
            scale_depths: &depths,
            supervision: None,
        };
        let cfg = LossConfig {
            automask: false,
            ..LossConfig::default()
        };
        let (report, _) = evaluate_stack(&inputs, &cfg).unwrap();
        let c1 = 0.01f64.powi(2);
        let (mu_t, mu_r) = (0.3, 0.9);
        let ssim = (2.0 * mu_t * mu_r + c1) / (mu_t * mu_t + mu_r * mu_r + c1);
        let expect = 0.15 * 0.6 + 0.425 * (1.0 - ssim);
        assert!(
            (report.photometric - expect).abs() < 1e-12,
            "got {}",
            report.photometric
        );
        assert_eq!(report.smoothness, 0.0);
        assert_eq!(report.velocity, 0.0);
        assert!((report.total - expect).abs() < 1e-12);
    }

    #[test]
    fn velocity_component_averages_over_known_sources() {
        let cam = test_camera(16, 12);
        let target = ImageRaster::new_fill(16, 12, [0.4; 3]).unwrap();
        let source = target.clone();
        let sources = [
            SourceView {
                image: &source,
                source_from_target: PoseSE3::from_translation(Vector3::new(3.0, 4.0, 0.0)),
                gt_translation_norm: Some(5.0),
            },
            SourceView {
                image: &source,
                source_from_target: PoseSE3::from_translation(Vector3::new(0.0, 0.0, 5.0)),
                gt_translation_norm: Some(4.0),
            },
            SourceView {
                image: &source,
                source_from_target: PoseSE3::identity(),
                gt_translation_norm: None,
            },
        ];
        let depths = [DepthRaster::constant(16, 12, 8.0).unwrap()];
        let inputs = StackInputs {
            camera: &cam,
            target: &target,
            sources: &sources,
            scale_depths: &depths,
            supervision: None,
        };
        let (report, _) = evaluate_stack(&inputs, &LossConfig::default()).unwrap();
        // |5-5| = 0 and |5-4| = 1 over two supervised sources.
        assert!((report.velocity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn radar_component_matches_the_direct_loss() {
        let cam = test_camera(9, 5);
        let target = ImageRaster::new_fill(9, 5, [0.5; 3]).unwrap();
        let prediction = DepthRaster::constant(9, 5, 10.0).unwrap();
        let boxes = vec![BoundingBox2D {
            u_min: 1.0,
            v_min: 0.0,
            u_max: 7.0,
            v_max: 4.0,
            class_label: ObjectClass::Car,
        }];
        let radar = ProjectedRadar {
            width: 9,
            height: 5,
            entries: vec![RadarEntry {
                u: 4,
                v: 4,
                depth: 12.0,
                source: 0,
                box_index: Some(0),
            }],
        };
        let assoc = binarize(
            &bilateral_weights(&target, &radar, &boxes, &AssociationConfig::default()),
            0.5,
        );
        let pack = build_pseudo_gt(&prediction, &radar, &assoc);
        assert!(pack.supervised_count() > 0);
        let depths = [prediction.clone()];
        let inputs = StackInputs {
            camera: &cam,
            target: &target,
            sources: &[],
            scale_depths: &depths,
            supervision: Some(&pack),
        };
        let cfg = LossConfig::default();
        let (report, maps) = evaluate_stack(&inputs, &cfg).unwrap();
        let direct = radar_loss(&prediction, &pack, cfg.radar_normalization);
        assert!((report.radar - direct).abs() < 1e-15);
        assert!((report.radar - 2.0).abs() < 1e-12);
        let residual = maps.radar_residual.unwrap();
        for y in 0..5 {
            for x in 0..9 {
                if pack.is_supervised(x, y) {
                    assert!((residual.at(x, y) + 2.0).abs() < 1e-12);
                } else {
                    assert_eq!(residual.at(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn sparse_scale_depth_is_rejected() {
        let cam = test_camera(16, 12);
        let target = ImageRaster::new_fill(16, 12, [0.4; 3]).unwrap();
        let mut depth = DepthRaster::constant(16, 12, 8.0).unwrap();
        depth.clear(3, 3);
        let depths = [depth];
        let inputs = StackInputs {
            camera: &cam,
            target: &target,
            sources: &[],
            scale_depths: &depths,
            supervision: None,
        };
        assert!(matches!(
            evaluate_stack(&inputs, &LossConfig::default()),
            Err(LossError::SparseDepth { scale: 0 })
        ));
    }

    #[test]
    fn missing_scales_are_rejected() {
        let cam = test_camera(16, 12);
        let target = ImageRaster::new_fill(16, 12, [0.4; 3]).unwrap();
        let inputs = StackInputs {
            camera: &cam,
            target: &target,
            sources: &[],
            scale_depths: &[],
            supervision: None,
        };
        assert!(matches!(
            evaluate_stack(&inputs, &LossConfig::default()),
            Err(LossError::NoScales)
        ));
    }
}
