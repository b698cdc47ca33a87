//! Scene assembly and the end-to-end flows: radar supervision preparation,
//! full loss evaluation, and inference-input filtering. Everything here is
//! pure in-memory computation; file formats live in [`crate::io`].

use nalgebra::Vector3;

use crate::assoc::{self, BinaryAssociation};
use crate::config::Config;
use crate::geometry::{CameraModel, PoseSE3};
use crate::loss::{
    self, LossError, LossReport, SourceView, StackInputs, StackMaps, SupervisionPack,
};
use crate::metrics::GroundTruthSample;
use crate::radar::stages::{build_chain, run_chain, StageContext, StageRecord};
use crate::radar::{
    accumulate, project_sweep, rasterize_min_depth, BoundingBox2D, ProjectedRadar, RadarError,
    RadarSweep,
};
use crate::raster::{DepthRaster, ImageRaster};
use crate::synth::SyntheticScene;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Radar(#[from] RadarError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// One auxiliary camera frame used as a reconstruction source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceFrame {
    pub timestamp: f64,
    /// Ego-to-reference pose at capture time.
    pub ego_pose: PoseSE3,
    pub image: ImageRaster,
}

/// A fully loaded frame bundle: target view, source views, object boxes,
/// radar sweeps, and optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub camera: CameraModel,
    /// Fixed camera mount, mapping ego coordinates into camera coordinates.
    pub cam_from_ego: PoseSE3,
    pub target_time: f64,
    pub target_pose: PoseSE3,
    pub target_image: ImageRaster,
    pub sources: Vec<SourceFrame>,
    pub boxes: Vec<BoundingBox2D>,
    pub sweeps: Vec<RadarSweep>,
    pub true_depth: Option<DepthRaster>,
    pub gt_samples: Vec<GroundTruthSample>,
}

impl Scene {
    pub fn from_synthetic(s: &SyntheticScene) -> Scene {
        Scene {
            camera: s.camera,
            cam_from_ego: s.cam_from_ego,
            target_time: s.target_time,
            target_pose: s.target_pose,
            target_image: s.target_image.clone(),
            sources: s
                .sources
                .iter()
                .map(|src| SourceFrame {
                    timestamp: src.timestamp,
                    ego_pose: src.ego_pose,
                    image: src.image.clone(),
                })
                .collect(),
            boxes: s.boxes_2d.clone(),
            sweeps: s.sweeps.clone(),
            true_depth: Some(s.true_depth.clone()),
            gt_samples: s.gt_samples.clone(),
        }
    }

    /// Structural checks; the returned message names the offending field.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let (w, h) = (self.camera.width, self.camera.height);
        let invalid = |msg: String| Err(PipelineError::Invalid(msg));
        if self.target_image.width() != w || self.target_image.height() != h {
            return invalid(format!(
                "target.image is {}x{} but the camera expects {}x{}",
                self.target_image.width(),
                self.target_image.height(),
                w,
                h
            ));
        }
        if !self.target_time.is_finite() {
            return invalid(format!(
                "target.timestamp {} is not finite",
                self.target_time
            ));
        }
        for (i, s) in self.sources.iter().enumerate() {
            if s.image.width() != w || s.image.height() != h {
                return invalid(format!(
                    "sources[{i}].image is {}x{} but the camera expects {w}x{h}",
                    s.image.width(),
                    s.image.height()
                ));
            }
            if !s.timestamp.is_finite() {
                return invalid(format!(
                    "sources[{i}].timestamp {} is not finite",
                    s.timestamp
                ));
            }
        }
        if let Some(d) = &self.true_depth {
            if d.width() != w || d.height() != h {
                return invalid(format!(
                    "true_depth is {}x{} but the camera expects {w}x{h}",
                    d.width(),
                    d.height()
                ));
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !b.is_well_formed() {
                return invalid(format!(
                    "boxes[{i}] corners ({}, {}, {}, {}) are not a well-formed box",
                    b.u_min, b.v_min, b.u_max, b.v_max
                ));
            }
        }
        for (i, sweep) in self.sweeps.iter().enumerate() {
            if !sweep.timestamp.is_finite() {
                return invalid(format!(
                    "sweeps[{i}].timestamp {} is not finite",
                    sweep.timestamp
                ));
            }
            sweep
                .validate()
                .map_err(|e| PipelineError::Invalid(format!("sweeps[{i}]: {e}")))?;
        }
        for (i, g) in self.gt_samples.iter().enumerate() {
            if g.u >= w || g.v >= h {
                return invalid(format!(
                    "gt_samples[{i}] pixel ({}, {}) is outside the {w}x{h} raster",
                    g.u, g.v
                ));
            }
            if !(g.depth.is_finite() && g.depth > 0.0) {
                return invalid(format!(
                    "gt_samples[{i}].depth {} must be positive",
                    g.depth
                ));
            }
        }
        Ok(())
    }

    /// Sweeps feeding the supervision path: the closest `before` + 1 at or
    /// before the target time plus the closest `after` beyond it, in time
    /// order.
    fn supervision_sweeps(&self, before: u32, after: u32) -> Vec<RadarSweep> {
        let mut ordered: Vec<&RadarSweep> = self.sweeps.iter().collect();
        ordered.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let cut = self.target_time + 1e-9;
        let past: Vec<&RadarSweep> = ordered
            .iter()
            .copied()
            .filter(|s| s.timestamp <= cut)
            .collect();
        let future: Vec<&RadarSweep> = ordered
            .iter()
            .copied()
            .filter(|s| s.timestamp > cut)
            .collect();
        let past_keep = past.len().saturating_sub(before as usize + 1);
        past[past_keep..]
            .iter()
            .chain(future.iter().take(after as usize))
            .map(|s| (*s).clone())
            .collect()
    }

    /// Sweeps feeding the inference input path: at or before the target time
    /// only.
    fn input_sweeps(&self, before: u32) -> Vec<RadarSweep> {
        self.supervision_sweeps(before, 0)
    }
}

/// Output of the supervision preparation flow, before any prediction is
/// involved.
#[derive(Debug, Clone)]
pub struct PreparedSupervision {
    /// Accumulated, filtered returns in the target view.
    pub projected: ProjectedRadar,
    /// Survival counts per filter stage.
    pub stages: Vec<StageRecord>,
    /// Weak-supervision mask and region partition.
    pub association: BinaryAssociation,
}

impl PreparedSupervision {
    /// Pseudo-ground-truth depth without a prediction: every masked pixel
    /// takes the depth of its region's radar return.
    pub fn constant_pseudo_gt(&self) -> DepthRaster {
        let mut out = DepthRaster::new_invalid(self.projected.width, self.projected.height)
            .expect("projected radar carries a non-empty raster shape");
        for y in 0..self.projected.height {
            for x in 0..self.projected.width {
                if let Some(rid) = self.association.region(x, y) {
                    out.set(x, y, self.projected.entries[rid as usize].depth);
                }
            }
        }
        out
    }
}

/// Accumulates the supervision sweep window into the target frame, runs the
/// configured filter chain, and expands the survivors into the
/// weak-supervision mask.
pub fn prepare_supervision(
    scene: &Scene,
    config: &Config,
) -> Result<PreparedSupervision, PipelineError> {
    scene.validate()?;
    let selected = scene.supervision_sweeps(
        config.radar.supervision_sweeps_before,
        config.radar.supervision_sweeps_after,
    );
    // The supervision window deliberately reaches past the target time, so
    // widen the accumulation tolerance to cover the span actually selected.
    let max_ts = selected
        .iter()
        .map(|s| s.timestamp)
        .fold(f64::NEG_INFINITY, f64::max);
    let tolerance = (max_ts - scene.target_time).max(0.0) + config.radar.future_tolerance_s;
    let accumulated = accumulate(&selected, scene.target_time, &scene.target_pose, tolerance)?;
    let projected = project_sweep(&accumulated, &scene.camera, &scene.cam_from_ego);
    let chain = build_chain(&config.radar.supervision_chain, config)?;
    let ctx = StageContext {
        boxes: &scene.boxes,
    };
    let (filtered, stages) = run_chain(&chain, projected, &ctx);
    let weights = assoc::bilateral_weights(
        &scene.target_image,
        &filtered,
        &scene.boxes,
        &config.association,
    );
    let association = assoc::binarize(&weights, config.association.gamma);
    Ok(PreparedSupervision {
        projected: filtered,
        stages,
        association,
    })
}

/// Builds the gradient-preserving supervision pack for a prediction, reusing
/// a prepared mask.
pub fn supervision_pack(
    prepared: &PreparedSupervision,
    prediction: &DepthRaster,
) -> SupervisionPack {
    loss::build_pseudo_gt(prediction, &prepared.projected, &prepared.association)
}

/// Output of the inference-input filtering flow.
#[derive(Debug, Clone)]
pub struct FilteredInput {
    pub raster: DepthRaster,
    pub stages: Vec<StageRecord>,
    /// Pixels carrying a filtered return.
    pub occupied_pixels: usize,
}

/// Accumulates the causal sweep window, filters it with the input chain, and
/// rasterizes the survivors to a sparse depth raster.
pub fn filter_input(scene: &Scene, config: &Config) -> Result<FilteredInput, PipelineError> {
    scene.validate()?;
    let selected = scene.input_sweeps(config.radar.input_sweeps_before);
    let accumulated = accumulate(
        &selected,
        scene.target_time,
        &scene.target_pose,
        config.radar.future_tolerance_s,
    )?;
    let projected = project_sweep(&accumulated, &scene.camera, &scene.cam_from_ego);
    let chain = build_chain(&config.radar.input_chain, config)?;
    let ctx = StageContext {
        boxes: &scene.boxes,
    };
    let (filtered, stages) = run_chain(&chain, projected, &ctx);
    let raster = rasterize_min_depth(&filtered);
    let occupied_pixels = raster.valid_count();
    Ok(FilteredInput {
        raster,
        stages,
        occupied_pixels,
    })
}

/// Relative pose mapping target-camera coordinates into source-camera
/// coordinates, from ego-to-reference poses of both frames.
pub fn source_from_target(
    cam_from_ego: &PoseSE3,
    source_ego_pose: &PoseSE3,
    target_pose: &PoseSE3,
) -> PoseSE3 {
    cam_from_ego
        .compose(&source_ego_pose.invert())
        .compose(target_pose)
        .compose(&cam_from_ego.invert())
}

/// Evaluates the full loss stack on a scene. `scale_depths` are the decoder
/// outputs, finest first. `pose_estimates` optionally replaces the scene's
/// recorded source poses in the warping path (ego-to-reference, one per
/// source); the recorded poses always provide the translation magnitudes the
/// velocity term compares against.
pub fn scene_loss(
    scene: &Scene,
    scale_depths: &[DepthRaster],
    pose_estimates: Option<&[PoseSE3]>,
    supervision: Option<&SupervisionPack>,
    config: &Config,
) -> Result<(LossReport, StackMaps), PipelineError> {
    scene.validate()?;
    if let Some(est) = pose_estimates {
        if est.len() != scene.sources.len() {
            return Err(PipelineError::Invalid(format!(
                "{} pose estimates supplied for {} sources",
                est.len(),
                scene.sources.len()
            )));
        }
    }
    let views: Vec<SourceView> = scene
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let warp_pose = pose_estimates.map_or(s.ego_pose, |est| est[i]);
            let true_rel = s.ego_pose.invert().compose(&scene.target_pose);
            SourceView {
                image: &s.image,
                source_from_target: source_from_target(
                    &scene.cam_from_ego,
                    &warp_pose,
                    &scene.target_pose,
                ),
                gt_translation_norm: Some(true_rel.translation.norm()),
            }
        })
        .collect();
    let inputs = StackInputs {
        camera: &scene.camera,
        target: &scene.target_image,
        sources: &views,
        scale_depths,
        supervision,
    };
    Ok(loss::evaluate_stack(&inputs, &config.loss)?)
}

/// Prediction raster for oracle experiments: the scene's true depth with all
/// pixels under the given boxes scaled by `factor`.
pub fn scaled_object_prediction(
    true_depth: &DepthRaster,
    boxes: &[BoundingBox2D],
    factor: f64,
) -> DepthRaster {
    let mut out = true_depth.clone();
    for y in 0..out.height() {
        for x in 0..out.width() {
            if !out.is_valid(x, y) {
                continue;
            }
            let inside = boxes.iter().any(|b| b.contains(x as f64, y as f64));
            if inside {
                out.set(x, y, true_depth.at(x, y) * factor);
            }
        }
    }
    out
}

/// Ego velocity implied by two timestamped poses, meters/second.
pub fn mean_velocity(a: &PoseSE3, t_a: f64, b: &PoseSE3, t_b: f64) -> Option<Vector3<f64>> {
    let dt = t_b - t_a;
    if dt.abs() < 1e-12 {
        return None;
    }
    Some((b.translation - a.translation) / dt)
}
