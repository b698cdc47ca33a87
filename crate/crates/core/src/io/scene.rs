//! Scene metadata documents and dataset manifests. Metadata is JSON with
//! 3x4 row-major pose matrices; rasters live in sibling PFM files referenced
//! by relative path.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraModel, PoseSE3};
use crate::metrics::GroundTruthSample;
use crate::pipeline::{Scene, SourceFrame};
use crate::radar::{BoundingBox2D, RadarPoint, RadarSweep};

use super::{pfm, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// One camera frame: capture time, ego-to-reference pose, raster reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub timestamp: f64,
    /// 3x4 rigid transform, row-major.
    pub ego_pose: [f64; 12],
    /// Path of the image raster, relative to the metadata file.
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub timestamp: f64,
    pub ego_pose: [f64; 12],
    pub points: Vec<RadarPoint>,
}

/// The on-disk scene document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub camera: CameraSpec,
    /// Fixed camera mount, ego coordinates to camera coordinates.
    pub cam_from_ego: [f64; 12],
    pub target: FrameSpec,
    pub sources: Vec<FrameSpec>,
    pub boxes: Vec<BoundingBox2D>,
    pub sweeps: Vec<SweepSpec>,
    /// Optional reference depth raster, relative path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_depth: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gt_samples: Vec<GroundTruthSample>,
}

fn format_err(path: &Path, detail: impl ToString) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

fn pose_field(path: &Path, field: &str, rows: &[f64; 12]) -> Result<PoseSE3, IoError> {
    PoseSE3::from_rows12(rows).map_err(|e| format_err(path, format!("{field}: {e}")))
}

/// Writes the scene document at `<dir>/<stem>.json` and its rasters as
/// sibling `<stem>_*.pfm` files; returns the document path.
pub fn save_scene(scene: &Scene, dir: &Path, stem: &str) -> Result<PathBuf, IoError> {
    let doc_path = dir.join(format!("{stem}.json"));
    let target_image = format!("{stem}_target.pfm");
    pfm::write_image(&dir.join(&target_image), &scene.target_image)?;
    let mut sources = Vec::with_capacity(scene.sources.len());
    for (i, s) in scene.sources.iter().enumerate() {
        let image = format!("{stem}_source_{i}.pfm");
        pfm::write_image(&dir.join(&image), &s.image)?;
        sources.push(FrameSpec {
            timestamp: s.timestamp,
            ego_pose: s.ego_pose.to_rows12(),
            image,
        });
    }
    let true_depth = match &scene.true_depth {
        Some(depth) => {
            let name = format!("{stem}_depth.pfm");
            pfm::write_depth(&dir.join(&name), depth)?;
            Some(name)
        }
        None => None,
    };
    let doc = SceneFile {
        camera: CameraSpec {
            fx: scene.camera.fx,
            fy: scene.camera.fy,
            cx: scene.camera.cx,
            cy: scene.camera.cy,
            width: scene.camera.width,
            height: scene.camera.height,
        },
        cam_from_ego: scene.cam_from_ego.to_rows12(),
        target: FrameSpec {
            timestamp: scene.target_time,
            ego_pose: scene.target_pose.to_rows12(),
            image: target_image,
        },
        sources,
        boxes: scene.boxes.clone(),
        sweeps: scene
            .sweeps
            .iter()
            .map(|s| SweepSpec {
                timestamp: s.timestamp,
                ego_pose: s.ego_pose.to_rows12(),
                points: s.points.clone(),
            })
            .collect(),
        true_depth,
        gt_samples: scene.gt_samples.clone(),
    };
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| format_err(&doc_path, e))?;
    json.push('\n');
    fs::write(&doc_path, json).map_err(|source| IoError::Io {
        path: doc_path.clone(),
        source,
    })?;
    Ok(doc_path)
}

/// Loads a scene document and every raster it references, then validates the
/// assembled scene.
pub fn load_scene(path: &Path) -> Result<Scene, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: SceneFile = serde_json::from_str(&text).map_err(|e| format_err(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let camera = CameraModel::new(
        doc.camera.fx,
        doc.camera.fy,
        doc.camera.cx,
        doc.camera.cy,
        doc.camera.width,
        doc.camera.height,
    )
    .map_err(|e| format_err(path, format!("camera: {e}")))?;
    let cam_from_ego = pose_field(path, "cam_from_ego", &doc.cam_from_ego)?;
    let target_pose = pose_field(path, "target.ego_pose", &doc.target.ego_pose)?;
    let target_image = pfm::read_image(&dir.join(&doc.target.image))?;
    let mut sources = Vec::with_capacity(doc.sources.len());
    for (i, f) in doc.sources.iter().enumerate() {
        sources.push(SourceFrame {
            timestamp: f.timestamp,
            ego_pose: pose_field(path, &format!("sources[{i}].ego_pose"), &f.ego_pose)?,
            image: pfm::read_image(&dir.join(&f.image))?,
        });
    }
    let mut sweeps = Vec::with_capacity(doc.sweeps.len());
    for (i, s) in doc.sweeps.iter().enumerate() {
        sweeps.push(RadarSweep {
            timestamp: s.timestamp,
            ego_pose: pose_field(path, &format!("sweeps[{i}].ego_pose"), &s.ego_pose)?,
            points: s.points.clone(),
        });
    }
    let true_depth = match &doc.true_depth {
        Some(name) => Some(pfm::read_depth(&dir.join(name))?),
        None => None,
    };
    let scene = Scene {
        camera,
        cam_from_ego,
        target_time: doc.target.timestamp,
        target_pose,
        target_image,
        sources,
        boxes: doc.boxes,
        sweeps,
        true_depth,
        gt_samples: doc.gt_samples,
    };
    scene.validate().map_err(|e| format_err(path, e))?;
    Ok(scene)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Clear,
    Rain,
    Night,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    /// Scene document path, relative to the manifest.
    pub scene: String,
    pub timestamp: f64,
    pub split: Split,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<ManifestFrame>,
}

/// Ordered dataset listing grouped into capture sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sequences: Vec<Sequence>,
}

impl Manifest {
    /// Timestamps must strictly increase within each sequence.
    pub fn validate(&self) -> Result<(), String> {
        for seq in &self.sequences {
            for (i, pair) in seq.frames.windows(2).enumerate() {
                if pair[1].timestamp <= pair[0].timestamp {
                    return Err(format!(
                        "sequence {:?}: frames[{}] timestamp {} does not increase over {}",
                        seq.name,
                        i + 1,
                        pair[1].timestamp,
                        pair[0].timestamp
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<(), IoError> {
    manifest.validate().map_err(|e| format_err(path, e))?;
    let mut json = serde_json::to_string_pretty(manifest).map_err(|e| format_err(path, e))?;
    json.push('\n');
    fs::write(path, json).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| format_err(path, e))?;
    manifest.validate().map_err(|e| format_err(path, e))?;
    Ok(manifest)
}
