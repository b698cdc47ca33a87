//! Differentiable-style view reconstruction by inverse warping.

use crate::geometry::{CameraModel, PoseSE3};
use crate::raster::{DepthRaster, Grid, ImageRaster, PixelMask};

/// A source image resampled into the target view, with a validity mask for
/// pixels whose warped sample stayed inside the source raster.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ImageRaster,
    pub valid: PixelMask,
}

/// Reconstructs the target view from `source`: each target pixel is
/// backprojected with its predicted depth, moved by `source_from_target`
/// (camera frames), projected into the source camera, and bilinearly sampled.
/// Out-of-bounds or behind-camera samples are marked invalid and excluded by
/// downstream consumers; they copy their color from `fill` (typically the
/// target image) so that windowed comparisons near the border see no
/// artificial contrast.
pub fn reconstruct_view(
    source: &ImageRaster,
    fill: &ImageRaster,
    depth: &DepthRaster,
    source_from_target: &PoseSE3,
    cam: &CameraModel,
) -> Reconstruction {
    assert!(
        depth.width() == cam.width && depth.height() == cam.height,
        "depth raster {}x{} does not match camera {}x{}",
        depth.width(),
        depth.height(),
        cam.width,
        cam.height
    );
    assert!(
        source.width() == cam.width && source.height() == cam.height,
        "source raster does not match camera"
    );
    assert!(
        fill.width() == cam.width && fill.height() == cam.height,
        "fill raster does not match camera"
    );
    let max_u = (cam.width - 1) as f64;
    let max_v = (cam.height - 1) as f64;
    let mut image = fill.clone();
    let mut valid = Grid::new_fill(cam.width, cam.height, false).expect("non-empty");
    for y in 0..cam.height {
        for x in 0..cam.width {
            if !depth.is_valid(x, y) {
                continue;
            }
            let p_target = cam.backproject(x as f64, y as f64, depth.at(x, y));
            let p_source = source_from_target.transform_point(&p_target);
            let Some((u, v, _)) = cam.project_unbounded(&p_source) else {
                continue;
            };
            // Bilinear support must lie fully inside the source raster.
            if u < 0.0 || u > max_u || v < 0.0 || v > max_v {
                continue;
            }
            image.set(x, y, source.sample_bilinear(u, v));
            valid.set(x, y, true);
        }
    }
    Reconstruction { image, valid }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn cam(width: u32, height: u32) -> CameraModel {
        CameraModel::new(
            60.0,
            60.0,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
        .unwrap()
    }

    fn smooth_image(width: u32, height: u32) -> ImageRaster {
        ImageRaster::from_fn(width, height, |x, y| {
            let (xf, yf) = (x as f64 / 20.0, y as f64 / 20.0);
            [
                0.5 + 0.3 * (xf).sin() * (yf).cos(),
                0.5 + 0.2 * (0.7 * xf + 0.3 * yf).sin(),
                0.5 + 0.25 * (0.4 * xf - 0.6 * yf).cos(),
            ]
            .map(|v: f64| v.clamp(0.0, 1.0))
        })
        .unwrap()
    }

    #[test]
    fn identity_pose_reproduces_the_source() {
        let c = cam(32, 24);
        let source = smooth_image(32, 24);
        let depth = DepthRaster::constant(32, 24, 7.5).unwrap();
        let recon = reconstruct_view(&source, &source, &depth, &PoseSE3::identity(), &c);
        for y in 0..24 {
            for x in 0..32 {
                assert!(recon.valid.at(x, y));
                let (a, b) = (recon.image.at(x, y), source.at(x, y));
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() < 1e-6, "pixel ({x},{y}) channel {k}");
                }
            }
        }
    }

    #[test]
    fn lateral_shift_on_a_plane_moves_samples_by_fx_t_over_d() {
        let c = cam(40, 24);
        let source = smooth_image(40, 24);
        let depth_m = 10.0;
        let t = 0.5;
        let depth = DepthRaster::constant(40, 24, depth_m).unwrap();
        // Moving the target frame point by +t along x in the source frame
        // shifts the sample coordinate by fx * t / d = 3 px.
        let pose = PoseSE3::from_translation(Vector3::new(t, 0.0, 0.0));
        let recon = reconstruct_view(&source, &source, &depth, &pose, &c);
        let shift = (c.fx * t / depth_m).round() as u32;
        assert_eq!(shift, 3);
        for y in 0..24 {
            for x in 0..(40 - shift) {
                assert!(recon.valid.at(x, y));
                let got = recon.image.at(x, y);
                let expect = source.at(x + shift, y);
                for k in 0..3 {
                    assert!((got[k] - expect[k]).abs() < 1e-9);
                }
            }
            // The strip whose samples fall off the right edge is invalid.
            assert!(!recon.valid.at(39, y));
        }
    }

    #[test]
    fn behind_camera_targets_are_invalid() {
        let c = cam(16, 12);
        let source = smooth_image(16, 12);
        let depth = DepthRaster::constant(16, 12, 2.0).unwrap();
        // Push the source frame 5 m forward: warped points get z <= 0.
        let pose = PoseSE3::from_translation(Vector3::new(0.0, 0.0, -5.0));
        let recon = reconstruct_view(&source, &source, &depth, &pose, &c);
        assert!(recon.valid.data().iter().all(|v| !v));
    }

    #[test]
    fn invalid_pixels_copy_the_fill_image() {
        let c = cam(16, 12);
        let source = smooth_image(16, 12);
        let fill = ImageRaster::new_fill(16, 12, [0.25, 0.5, 0.75]).unwrap();
        let depth = DepthRaster::constant(16, 12, 2.0).unwrap();
        let pose = PoseSE3::from_translation(Vector3::new(0.0, 0.0, -5.0));
        let recon = reconstruct_view(&source, &fill, &depth, &pose, &c);
        for y in 0..12 {
            for x in 0..16 {
                assert!(!recon.valid.at(x, y));
                assert_eq!(recon.image.at(x, y), [0.25, 0.5, 0.75]);
            }
        }
    }

    #[test]
    fn invalid_depth_pixels_stay_invalid() {
        let c = cam(8, 8);
        let source = smooth_image(8, 8);
        let mut depth = DepthRaster::constant(8, 8, 4.0).unwrap();
        depth.clear(3, 3);
        let recon = reconstruct_view(&source, &source, &depth, &PoseSE3::identity(), &c);
        assert!(!recon.valid.at(3, 3));
        assert!(recon.valid.at(0, 0));
    }
}
