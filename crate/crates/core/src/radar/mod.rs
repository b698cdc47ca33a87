//! Radar point sets: sweeps, doppler-compensated accumulation, image-space
//! projection, and the noise-filtering stage chain.
//!
//! Radar positions live in the ego frame (x forward, y left, z up); doppler is
//! a horizontal velocity (v_x, v_y) already compensated for sensor motion.
//! Sweeps without elevation report a fixed z. After projection into a camera,
//! points become integer-pixel entries that the filter stages consume.

mod accumulate;
mod project;
pub mod stages;

pub use accumulate::accumulate;
pub use project::{project_sweep, rasterize_min_depth};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PoseSE3;

#[derive(Debug, Error)]
pub enum RadarError {
    #[error(
        "sweep at t={sweep_time}s lies {excess:.6}s past the accumulation horizon t={target_time}s"
    )]
    FutureSweep {
        sweep_time: f64,
        target_time: f64,
        excess: f64,
    },
    #[error("sweep at t={timestamp}s contains a point stamped {point_time}s")]
    InconsistentTimestamps { timestamp: f64, point_time: f64 },
    #[error("unknown filter stage {0:?}")]
    UnknownStage(String),
}

/// One radar detection in the ego frame of its sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    /// Meters, ego frame; z is a fixed plane height for sensors without
    /// elevation.
    pub position: [f64; 3],
    /// Horizontal target velocity (v_x, v_y), meters/second, ego-motion
    /// compensated.
    pub doppler: [f64; 2],
    /// Seconds; equals the owning sweep's timestamp.
    pub timestamp: f64,
}

impl RadarPoint {
    pub fn position_vec(&self) -> Vector3<f64> {
        Vector3::new(self.position[0], self.position[1], self.position[2])
    }
}

/// All detections of one radar cycle, with the ego pose at capture time
/// (ego-to-reference).
#[derive(Debug, Clone, PartialEq)]
pub struct RadarSweep {
    pub timestamp: f64,
    pub ego_pose: PoseSE3,
    pub points: Vec<RadarPoint>,
}

impl RadarSweep {
    /// Checks the sweep-level invariant that every point carries the sweep
    /// timestamp.
    pub fn validate(&self) -> Result<(), RadarError> {
        for p in &self.points {
            if p.timestamp != self.timestamp {
                return Err(RadarError::InconsistentTimestamps {
                    timestamp: self.timestamp,
                    point_time: p.timestamp,
                });
            }
        }
        Ok(())
    }
}

/// Traffic participant categories used for boxes and evaluation splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Car,
    Truck,
    Bus,
    Motorcycle,
    Bicycle,
    Pedestrian,
    Other,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 7] = [
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Bus,
        ObjectClass::Motorcycle,
        ObjectClass::Bicycle,
        ObjectClass::Pedestrian,
        ObjectClass::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Car => "car",
            ObjectClass::Truck => "truck",
            ObjectClass::Bus => "bus",
            ObjectClass::Motorcycle => "motorcycle",
            ObjectClass::Bicycle => "bicycle",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Other => "other",
        }
    }
}

impl std::fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ObjectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectClass::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown object class {s:?}"))
    }
}

/// Axis-aligned image-space object box, continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox2D {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub class_label: ObjectClass,
}

impl BoundingBox2D {
    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Containment with inclusive edges.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    pub fn is_well_formed(&self) -> bool {
        self.u_min.is_finite()
            && self.v_min.is_finite()
            && self.u_max.is_finite()
            && self.v_max.is_finite()
            && self.u_min < self.u_max
            && self.v_min < self.v_max
    }

    /// Whether the box overlaps the raster footprint at all.
    pub fn intersects_raster(&self, width: u32, height: u32) -> bool {
        self.u_max >= 0.0
            && self.v_max >= 0.0
            && self.u_min <= (width - 1) as f64
            && self.v_min <= (height - 1) as f64
    }
}

/// One projected radar return occupying a single pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarEntry {
    pub u: u32,
    pub v: u32,
    /// Meters along the camera optical axis; always > 0.
    pub depth: f64,
    /// Index of the originating point in the accumulated sweep.
    pub source: usize,
    /// Index of the assigned bounding box, set by clutter removal.
    pub box_index: Option<usize>,
}

/// Projected radar returns for one camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedRadar {
    pub width: u32,
    pub height: u32,
    pub entries: Vec<RadarEntry>,
}

impl ProjectedRadar {
    pub fn new(width: u32, height: u32) -> Self {
        ProjectedRadar {
            width,
            height,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
