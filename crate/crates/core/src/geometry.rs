//! Pinhole camera model and rigid transforms.
//!
//! Conventions used throughout the crate:
//! - Camera frame: x right, y down, z forward (optical axis). Projection is
//!   only defined for points with z > 0.
//! - Ego/world frames are right-handed with z up; the camera extrinsic pose
//!   bridges the two.
//! - Pixel coordinates are continuous with the origin at the center of the
//!   top-left pixel, u growing rightward and v downward. A raster of width W
//!   therefore spans u in (-0.5, W - 0.5); a point inside that footprint
//!   rounds to an integer pixel in range.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orthonormality slack accepted when validating rotations from external data.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("camera {field} must be positive and finite, got {value}")]
    BadIntrinsic { field: &'static str, value: f64 },
    #[error("camera raster must be non-empty, got {width}x{height}")]
    EmptyRaster { width: u32, height: u32 },
    #[error(
        "rotation is not orthonormal: max deviation {deviation:.3e} exceeds {ROTATION_TOL:.0e}"
    )]
    NotOrthonormal { deviation: f64 },
    #[error("rotation determinant {det} is not +1 (reflection or scale)")]
    BadDeterminant { det: f64 },
    #[error("pose contains a non-finite value")]
    NonFinitePose,
}

/// Pinhole intrinsics plus the raster extent they project into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// A point successfully projected into the raster footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Distance along the optical axis, meters.
    pub depth: f64,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        for (field, value) in [("fx", fx), ("fy", fy)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::BadIntrinsic { field, value });
            }
        }
        for (field, value) in [("cx", cx), ("cy", cy)] {
            if !value.is_finite() {
                return Err(GeometryError::BadIntrinsic { field, value });
            }
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyRaster { width, height });
        }
        Ok(CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Continuous projection of a camera-frame point; `None` behind the camera.
    /// The result may land outside the raster footprint.
    pub fn project_unbounded(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        ))
    }

    /// Projection into the raster footprint; `None` for points behind the
    /// camera or outside the raster (out-of-view is reported, never clamped).
    pub fn project(&self, p: &Vector3<f64>) -> Option<Projection> {
        let (u, v, depth) = self.project_unbounded(p)?;
        if self.contains(u, v) {
            Some(Projection { u, v, depth })
        } else {
            None
        }
    }

    /// Whether a continuous coordinate falls inside the raster footprint,
    /// i.e. rounds to a pixel in range.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u > -0.5 && u < self.width as f64 - 0.5 && v > -0.5 && v < self.height as f64 - 0.5
    }

    /// Camera-frame point for pixel `(u, v)` at the given depth.
    pub fn backproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        )
    }
}

/// Rigid transform: `p_out = rotation * p_in + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl PoseSE3 {
    /// Validates and wraps an externally supplied rotation and translation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !(rotation.iter().all(|v| v.is_finite()) && translation.iter().all(|v| v.is_finite())) {
            return Err(GeometryError::NonFinitePose);
        }
        let deviation = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if deviation > ROTATION_TOL {
            return Err(GeometryError::NotOrthonormal { deviation });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::BadDeterminant { det });
        }
        Ok(PoseSE3 {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        PoseSE3 {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        PoseSE3 {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about the +z axis (heading change in a
    /// z-up frame), with a translation.
    pub fn yaw_about_z(angle: f64, translation: Vector3<f64>) -> Self {
        let (s, c) = angle.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        PoseSE3 {
            rotation,
            translation,
        }
    }

    /// The standard forward-camera mount: maps vehicle coordinates
    /// (x forward, y left, z up) into camera coordinates (x right, y down,
    /// z forward), with the optical center at the vehicle origin.
    pub fn camera_from_ego() -> Self {
        PoseSE3 {
            rotation: Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0),
            translation: Vector3::zeros(),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotates a direction without translating it.
    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> PoseSE3 {
        let rt = self.rotation.transpose();
        PoseSE3 {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Row-major 3x4 flattening `[r00 r01 r02 t0  r10 ... t1  r20 ... t2]`,
    /// the layout used by the scene metadata documents.
    pub fn to_rows12(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    /// Inverse of [`PoseSE3::to_rows12`], with rotation validation.
    pub fn from_rows12(m: &[f64; 12]) -> Result<Self, GeometryError> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        PoseSE3::new(rotation, translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn cam() -> CameraModel {
        CameraModel::new(100.0, 100.0, 160.0, 90.0, 320, 180).unwrap()
    }

    #[test]
    fn projects_axis_point_to_principal_point() {
        let p = cam().project(&Vector3::new(0.0, 0.0, 10.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (160.0, 90.0, 10.0));
    }

    #[test]
    fn one_meter_offset_moves_ten_pixels_at_ten_meters() {
        let p = cam().project(&Vector3::new(1.0, 0.0, 10.0)).unwrap();
        assert_eq!((p.u, p.v), (170.0, 90.0));
    }

    #[test]
    fn behind_camera_and_out_of_raster_are_rejected() {
        let c = cam();
        assert!(c.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
        assert!(c.project(&Vector3::new(0.0, 0.0, 0.0)).is_none());
        // Projects to u = 660, far outside a 320-wide raster.
        assert!(c.project(&Vector3::new(50.0, 0.0, 10.0)).is_none());
        assert!(c
            .project_unbounded(&Vector3::new(50.0, 0.0, 10.0))
            .is_some());
    }

    #[test]
    fn footprint_edges_round_to_valid_pixels() {
        let c = cam();
        assert!(c.contains(0.0, 0.0));
        assert!(c.contains(319.49, 179.49));
        assert!(!c.contains(319.5, 90.0));
        assert!(!c.contains(-0.5, 90.0));
    }

    #[test]
    fn project_backproject_roundtrip() {
        let c = cam();
        for i in 0..200u64 {
            let u = rng::range(901, &[i, 0], 0.0, 319.0);
            let v = rng::range(901, &[i, 1], 0.0, 179.0);
            let d = rng::range(901, &[i, 2], 0.5, 80.0);
            let p = c.project(&c.backproject(u, v, d)).expect("in view");
            assert!(
                (p.u - u).abs() < 1e-6,
                "u roundtrip err {}",
                (p.u - u).abs()
            );
            assert!((p.v - v).abs() < 1e-6);
            assert!((p.depth - d).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraModel::new(-1.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(CameraModel::new(1.0, 1.0, 0.0, 0.0, 0, 10).is_err());
        assert!(CameraModel::new(1.0, f64::NAN, 0.0, 0.0, 10, 10).is_err());
    }

    #[test]
    fn yaw_compose_with_inverse_is_identity() {
        let t = PoseSE3::yaw_about_z(std::f64::consts::FRAC_PI_2, Vector3::new(1.0, -2.0, 3.0));
        let id = t.compose(&t.invert());
        assert!((id.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
    }

    #[test]
    fn quarter_yaw_turns_x_into_y() {
        let t = PoseSE3::yaw_about_z(std::f64::consts::FRAC_PI_2, Vector3::zeros());
        let p = t.transform_point(&Vector3::new(1.0, 0.0, 0.0));
        assert!((p - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn compose_applies_right_operand_first() {
        let shift = PoseSE3::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let yaw = PoseSE3::yaw_about_z(std::f64::consts::FRAC_PI_2, Vector3::zeros());
        // Shift along x first, then rotate: (1,0,0) -> (2,0,0) -> (0,2,0).
        let p = yaw
            .compose(&shift)
            .transform_point(&Vector3::new(1.0, 0.0, 0.0));
        assert!((p - Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rows12_roundtrip_preserves_pose() {
        let t = PoseSE3::yaw_about_z(0.3, Vector3::new(0.5, 1.5, -2.0));
        let back = PoseSE3::from_rows12(&t.to_rows12()).unwrap();
        assert!((back.rotation - t.rotation).abs().max() == 0.0);
        assert_eq!(back.translation, t.translation);
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            PoseSE3::new(m, Vector3::zeros()),
            Err(GeometryError::NotOrthonormal { .. })
        ));
        // Orthonormal but a reflection: determinant -1.
        let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            PoseSE3::new(r, Vector3::zeros()),
            Err(GeometryError::BadDeterminant { .. })
        ));
    }
}
