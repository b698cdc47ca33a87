//! Doppler- and ego-motion-compensated accumulation of radar sweeps.

use nalgebra::Vector3;

use crate::geometry::PoseSE3;

use super::{RadarError, RadarPoint, RadarSweep};

/// Merges `sweeps` into a single sweep expressed in the target ego frame at
/// `target_time`.
///
/// Each point is first advanced by its own doppler velocity over
/// `Δτ = target_time − sweep_time` (horizontal components only; z carries no
/// velocity term), then mapped rigidly from the capture ego frame into the
/// target ego frame. For ego motion that is a pure per-axis translation this
/// reduces to adding the ego displacement and `v·Δτ` per horizontal axis.
///
/// Sweeps later than `target_time + future_tolerance_s` are rejected; the
/// inference input path passes a near-zero tolerance so predictions never
/// consume future measurements, while training-side supervision passes a
/// horizon spanning its sweep window.
pub fn accumulate(
    sweeps: &[RadarSweep],
    target_time: f64,
    target_pose: &PoseSE3,
    future_tolerance_s: f64,
) -> Result<RadarSweep, RadarError> {
    let world_from_target_inv = target_pose.invert();
    let mut points = Vec::with_capacity(sweeps.iter().map(|s| s.points.len()).sum());
    for sweep in sweeps {
        if sweep.timestamp > target_time + future_tolerance_s {
            return Err(RadarError::FutureSweep {
                sweep_time: sweep.timestamp,
                target_time,
                excess: sweep.timestamp - target_time,
            });
        }
        let target_from_sweep = world_from_target_inv.compose(&sweep.ego_pose);
        let dt = target_time - sweep.timestamp;
        for p in &sweep.points {
            let advanced =
                p.position_vec() + Vector3::new(p.doppler[0] * dt, p.doppler[1] * dt, 0.0);
            let position = target_from_sweep.transform_point(&advanced);
            let doppler3 =
                target_from_sweep.rotate_vector(&Vector3::new(p.doppler[0], p.doppler[1], 0.0));
            points.push(RadarPoint {
                position: [position.x, position.y, position.z],
                doppler: [doppler3.x, doppler3.y],
                timestamp: target_time,
            });
        }
    }
    Ok(RadarSweep {
        timestamp: target_time,
        ego_pose: *target_pose,
        points,
    })
}
