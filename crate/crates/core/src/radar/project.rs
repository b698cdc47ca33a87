//! Projection of accumulated sweeps into a camera raster.

use crate::geometry::{CameraModel, PoseSE3};
use crate::raster::DepthRaster;

use super::{ProjectedRadar, RadarEntry, RadarSweep};

/// Projects every sweep point through the camera; points behind the camera or
/// outside the raster footprint are skipped. Each surviving point occupies the
/// nearest integer pixel and remembers its source index.
pub fn project_sweep(
    sweep: &RadarSweep,
    cam: &CameraModel,
    cam_from_ego: &PoseSE3,
) -> ProjectedRadar {
    let mut out = ProjectedRadar::new(cam.width, cam.height);
    for (source, point) in sweep.points.iter().enumerate() {
        let p_cam = cam_from_ego.transform_point(&point.position_vec());
        if let Some(proj) = cam.project(&p_cam) {
            out.entries.push(RadarEntry {
                u: proj.u.round() as u32,
                v: proj.v.round() as u32,
                depth: proj.depth,
                source,
                box_index: None,
            });
        }
    }
    out
}

/// Scatters entries into a sparse depth raster: untouched pixels stay invalid
/// (stored as 0), colliding entries keep the minimum depth.
pub fn rasterize_min_depth(projected: &ProjectedRadar) -> DepthRaster {
    let mut raster = DepthRaster::new_invalid(projected.width, projected.height)
        .expect("projected radar carries a non-empty raster shape");
    for e in &projected.entries {
        if !raster.is_valid(e.u, e.v) || e.depth < raster.at(e.u, e.v) {
            raster.set(e.u, e.v, e.depth);
        }
    }
    raster
}
