//! Deterministic synthetic street scenes: textured boxes on a ground plane,
//! rendered target/source views, true depth, labeled radar sweeps with
//! multipath and see-through clutter, and ground-truth depth samples. Every
//! random draw is keyed by the seed and a stable entity path, so regeneration
//! is bit-identical regardless of iteration order.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraModel, PoseSE3};
use crate::metrics::GroundTruthSample;
use crate::radar::{BoundingBox2D, ObjectClass, RadarPoint, RadarSweep};
use crate::raster::{DepthRaster, Grid, ImageRaster};
use crate::rng::{draw, range, unit};

/// Vehicle-frame height of the ground plane below the sensor origin, meters.
pub const GROUND_Z: f64 = -1.5;
/// Vehicle-frame height of the radar return plane, meters. Half a meter
/// above the ground, which puts face returns in the lower half of every box.
pub const RADAR_Z: f64 = -1.0;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    BadSpec(String),
    #[error("box {box_index} does not project fully inside the raster; widen the raster or tighten the depth range")]
    OffScreenBox { box_index: usize },
}

/// Generation parameters. Every field has a default that yields a plausible
/// street scene at radar-like point density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Raster width, pixels.
    pub width: u32,
    /// Raster height, pixels.
    pub height: u32,
    /// Focal length, pixels (the principal point sits at the raster center).
    pub focal: f64,
    /// Number of boxes placed on the ground plane.
    pub box_count: u32,
    /// Radar returns generated per box front face per sweep.
    pub points_per_face: u32,
    /// Front-face depth range (lo, hi), meters; must lie within [2, 80].
    pub depth_range: (f64, f64),
    /// Probability that a face return spawns a multipath ghost behind it.
    pub multipath_probability: f64,
    /// Probability that a face return spawns a see-through point far behind.
    pub see_through_probability: f64,
    /// Depth offset range of multipath ghosts along the ray, meters.
    pub multipath_offset_range: (f64, f64),
    /// Forward ego speed, meters/second.
    pub ego_speed_mps: f64,
    /// Spacing between consecutive radar sweeps, seconds.
    pub sweep_interval_s: f64,
    /// Radar sweeps captured before the target time.
    pub sweeps_before: u32,
    /// Radar sweeps captured after the target time.
    pub sweeps_after: u32,
    /// Capture-time offsets of the source camera frames, seconds.
    pub source_offsets_s: Vec<f64>,
    /// Maximum magnitude of per-box forward velocity, meters/second;
    /// negative samples give oncoming traffic. Zero keeps the scene static.
    pub box_speed_mps: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 320,
            height: 192,
            focal: 160.0,
            box_count: 2,
            points_per_face: 2,
            depth_range: (6.0, 30.0),
            multipath_probability: 0.35,
            see_through_probability: 0.15,
            multipath_offset_range: (3.0, 8.0),
            ego_speed_mps: 2.0,
            sweep_interval_s: 0.1,
            sweeps_before: 3,
            sweeps_after: 3,
            source_offsets_s: vec![-0.1, 0.1],
            box_speed_mps: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::BadSpec(msg));
        if self.width == 0 || self.height == 0 {
            return fail(format!("raster {}x{} is empty", self.width, self.height));
        }
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return fail(format!("focal length {} must be positive", self.focal));
        }
        let (lo, hi) = self.depth_range;
        if !(2.0..=80.0).contains(&lo) || !(2.0..=80.0).contains(&hi) || lo > hi {
            return fail(format!("depth range [{lo}, {hi}] must sit inside [2, 80]"));
        }
        // The box base must project above the bottom raster edge.
        let min_screen_depth = -GROUND_Z * self.focal / (self.height as f64 / 2.0 - 1.0).max(1.0);
        if lo < min_screen_depth {
            return fail(format!(
                "depth range starts at {lo} m but this raster/focal pair needs at least {min_screen_depth:.2} m"
            ));
        }
        for (name, p) in [
            ("multipath_probability", self.multipath_probability),
            ("see_through_probability", self.see_through_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} {p} is outside [0, 1]"));
            }
        }
        let (mlo, mhi) = self.multipath_offset_range;
        if !(mlo.is_finite() && mhi.is_finite()) || mlo <= 0.0 || mlo > mhi {
            return fail(format!("multipath offset range [{mlo}, {mhi}] is invalid"));
        }
        if self.box_count > 0 && self.points_per_face == 0 {
            return fail("points_per_face must be positive when boxes exist".to_string());
        }
        if !(self.sweep_interval_s.is_finite() && self.sweep_interval_s > 0.0) {
            return fail(format!(
                "sweep interval {} must be positive",
                self.sweep_interval_s
            ));
        }
        Ok(())
    }
}

/// Provenance of one radar point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "box_index")]
pub enum PointLabel {
    /// Genuine return from the front face of a box.
    Object(usize),
    /// Multipath ghost behind the box that produced it.
    Multipath(usize),
    /// See-through return sensed through the box onto something far behind.
    SeeThrough(usize),
}

impl PointLabel {
    pub fn is_clutter(&self) -> bool {
        !matches!(self, PointLabel::Object(_))
    }

    pub fn box_index(&self) -> usize {
        match self {
            PointLabel::Object(b) | PointLabel::Multipath(b) | PointLabel::SeeThrough(b) => *b,
        }
    }
}

/// One upright box, described by its fronto-parallel front face.
#[derive(Debug, Clone, PartialEq)]
pub struct Box3D {
    /// World x of the front face at the target time, meters.
    pub front_depth: f64,
    /// World y of the face center at the target time, meters.
    pub center_y: f64,
    /// Face width, meters.
    pub width: f64,
    /// Face height above the ground plane, meters.
    pub height: f64,
    /// Constant world-frame velocity, meters/second.
    pub velocity: Vector3<f64>,
    pub class: ObjectClass,
    /// Flat face color; constant albedo keeps the association range kernel
    /// fully open on the object.
    pub albedo: [f64; 3],
}

impl Box3D {
    fn face_x(&self, t: f64) -> f64 {
        self.front_depth + self.velocity.x * t
    }

    fn center_y_at(&self, t: f64) -> f64 {
        self.center_y + self.velocity.y * t
    }

    fn z_top(&self) -> f64 {
        GROUND_Z + self.height
    }
}

/// One source camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSource {
    pub timestamp: f64,
    /// Ego-to-world pose at capture time.
    pub ego_pose: PoseSE3,
    pub image: ImageRaster,
}

/// What the target-view ray through a pixel hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Ground,
    Backdrop,
    Object(u32),
}

/// A fully generated scene; the world frame coincides with the target-time
/// ego frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub seed: u64,
    pub camera: CameraModel,
    pub cam_from_ego: PoseSE3,
    pub target_time: f64,
    pub target_pose: PoseSE3,
    pub target_image: ImageRaster,
    /// Target-view depth along the camera axis, dense.
    pub true_depth: DepthRaster,
    /// Target-view surface identity per pixel, at target-time box poses.
    pub surface: Grid<SurfaceKind>,
    pub sources: Vec<SynthSource>,
    pub boxes_3d: Vec<Box3D>,
    /// Projected front faces at the target time, aligned with `boxes_3d`.
    pub boxes_2d: Vec<BoundingBox2D>,
    /// Radar sweeps ordered by time, spanning the configured window.
    pub sweeps: Vec<RadarSweep>,
    /// Per-sweep point provenance, parallel to `sweeps[i].points`.
    pub labels: Vec<Vec<PointLabel>>,
    pub gt_samples: Vec<GroundTruthSample>,
}

impl SyntheticScene {
    /// Indices `(sweep, point)` a perfect filter would keep: exactly the
    /// labeled non-clutter returns.
    pub fn oracle_filter(&self) -> Vec<(usize, usize)> {
        let mut keep = Vec::new();
        for (si, labels) in self.labels.iter().enumerate() {
            for (pi, label) in labels.iter().enumerate() {
                if !label.is_clutter() {
                    keep.push((si, pi));
                }
            }
        }
        keep
    }

    /// Ego pose at an arbitrary time under the constant forward ego motion
    /// used by the generator.
    pub fn ego_pose_at(&self, t: f64, ego_speed_mps: f64) -> PoseSE3 {
        PoseSE3::from_translation(Vector3::new(ego_speed_mps * t, 0.0, 0.0))
    }
}

/// Smooth low-frequency coloration of the ground and backdrop.
struct Palette {
    ground_base: [f64; 3],
    ground_amp: [f64; 3],
    ground_wave: [f64; 2],
    ground_phase: [f64; 3],
    backdrop_base: [f64; 3],
    backdrop_amp: [f64; 3],
    backdrop_wave: [f64; 2],
    backdrop_phase: [f64; 3],
}

impl Palette {
    fn new(seed: u64) -> Self {
        let tri = |id: u64, lo: f64, hi: f64| {
            [
                range(seed, &[70, id, 0], lo, hi),
                range(seed, &[70, id, 1], lo, hi),
                range(seed, &[70, id, 2], lo, hi),
            ]
        };
        Palette {
            ground_base: tri(0, 0.3, 0.6),
            ground_amp: tri(1, 0.05, 0.15),
            ground_wave: [
                range(seed, &[71, 0], 7.0, 15.0),
                range(seed, &[71, 1], 7.0, 15.0),
            ],
            ground_phase: tri(2, 0.0, std::f64::consts::TAU),
            backdrop_base: tri(3, 0.3, 0.6),
            backdrop_amp: tri(4, 0.05, 0.15),
            backdrop_wave: [
                range(seed, &[71, 2], 7.0, 15.0),
                range(seed, &[71, 3], 7.0, 15.0),
            ],
            backdrop_phase: tri(5, 0.0, std::f64::consts::TAU),
        }
    }

    fn wave(base: &[f64; 3], amp: &[f64; 3], phase: &[f64; 3], arg: f64) -> [f64; 3] {
        let mut rgb = [0.0; 3];
        for c in 0..3 {
            rgb[c] = (base[c] + amp[c] * (arg + phase[c]).sin()).clamp(0.0, 1.0);
        }
        rgb
    }

    /// `footprint` is the ground distance one pixel step covers at the hit;
    /// the wave amplitude fades out as the pattern approaches the sampling
    /// limit so that distant rows stay band-limited under reprojection.
    fn ground(&self, p: &Vector3<f64>, footprint: f64) -> [f64; 3] {
        let lambda = self.ground_wave[0].min(self.ground_wave[1]);
        let fade = (lambda / (8.0 * footprint)).clamp(0.0, 1.0);
        let amp = [
            self.ground_amp[0] * fade,
            self.ground_amp[1] * fade,
            self.ground_amp[2] * fade,
        ];
        let arg = std::f64::consts::TAU * (p.x / self.ground_wave[0] + p.y / self.ground_wave[1]);
        Self::wave(&self.ground_base, &amp, &self.ground_phase, arg)
    }

    fn backdrop(&self, p: &Vector3<f64>) -> [f64; 3] {
        let arg =
            std::f64::consts::TAU * (p.y / self.backdrop_wave[0] + p.z / self.backdrop_wave[1]);
        Self::wave(
            &self.backdrop_base,
            &self.backdrop_amp,
            &self.backdrop_phase,
            arg,
        )
    }
}

/// Static world geometry (boxes frozen at their target-time poses) plus the
/// coloring rules.
struct WorldModel<'a> {
    boxes: &'a [Box3D],
    backdrop_x: f64,
    focal: f64,
    palette: Palette,
}

impl WorldModel<'_> {
    /// Nearest intersection of the ray `origin + t * dir` (world frame,
    /// `dir.x > 0`) with a box front face, the ground plane, or the backdrop.
    fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> (f64, SurfaceKind) {
        let mut best_t = f64::INFINITY;
        let mut best = SurfaceKind::Backdrop;
        if dir.x > 1e-12 {
            best_t = (self.backdrop_x - origin.x) / dir.x;
        }
        if dir.z < -1e-12 {
            let t = (GROUND_Z - origin.z) / dir.z;
            if t > 1e-9 && t < best_t {
                best_t = t;
                best = SurfaceKind::Ground;
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if dir.x.abs() < 1e-12 {
                continue;
            }
            let t = (b.front_depth - origin.x) / dir.x;
            if t <= 1e-9 || t >= best_t {
                continue;
            }
            let p = origin + dir * t;
            if (p.y - b.center_y).abs() <= b.width / 2.0 && p.z >= GROUND_Z && p.z <= b.z_top() {
                best_t = t;
                best = SurfaceKind::Object(i as u32);
            }
        }
        (best_t, best)
    }

    fn color(&self, hit: SurfaceKind, p: &Vector3<f64>, depth: f64) -> [f64; 3] {
        match hit {
            SurfaceKind::Ground => {
                // Ground distance one pixel row covers at this depth.
                let footprint = depth * depth / (self.focal * -GROUND_Z);
                self.palette.ground(p, footprint)
            }
            SurfaceKind::Backdrop => self.palette.backdrop(p),
            SurfaceKind::Object(i) => self.boxes[i as usize].albedo,
        }
    }

    /// Renders the world from a camera at `view_pose` (ego-to-world).
    fn render(
        &self,
        cam: &CameraModel,
        ego_from_cam: &PoseSE3,
        view_pose: &PoseSE3,
    ) -> (ImageRaster, DepthRaster, Grid<SurfaceKind>) {
        let origin = view_pose.translation;
        let cam_from_world = ego_from_cam.invert().compose(&view_pose.invert());
        let count = (cam.width as usize) * (cam.height as usize);
        let mut pixels = Vec::with_capacity(count);
        let mut depths = Vec::with_capacity(count);
        let mut hits = Vec::with_capacity(count);
        for y in 0..cam.height {
            for x in 0..cam.width {
                let (p, hit) = self.pixel_hit(cam, ego_from_cam, view_pose, x, y, &origin);
                let depth = cam_from_world.transform_point(&p).z;
                pixels.push(self.color(hit, &p, depth));
                depths.push(depth);
                hits.push(hit);
            }
        }
        let image = ImageRaster::from_pixels_checked(cam.width, cam.height, pixels)
            .expect("palette colors stay inside [0, 1]");
        let depth = DepthRaster::from_values(
            Grid::from_vec(cam.width, cam.height, depths).expect("non-empty raster"),
        );
        let surface = Grid::from_vec(cam.width, cam.height, hits).expect("non-empty raster");
        (image, depth, surface)
    }

    fn pixel_hit(
        &self,
        cam: &CameraModel,
        ego_from_cam: &PoseSE3,
        view_pose: &PoseSE3,
        x: u32,
        y: u32,
        origin: &Vector3<f64>,
    ) -> (Vector3<f64>, SurfaceKind) {
        let dir_cam = Vector3::new(
            (x as f64 - cam.cx) / cam.fx,
            (y as f64 - cam.cy) / cam.fy,
            1.0,
        );
        let dir_world = view_pose.rotate_vector(&ego_from_cam.rotate_vector(&dir_cam));
        let (t, hit) = self.cast(origin, &dir_world);
        (origin + dir_world * t, hit)
    }
}

fn sample_boxes(seed: u64, spec: &SynthSpec, cam: &CameraModel) -> Result<Vec<Box3D>, SynthError> {
    let classes = [
        ObjectClass::Car,
        ObjectClass::Car,
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Bus,
    ];
    // Box silhouettes must not overlap on screen: overlap would let a near
    // return land inside a farther box's rectangle and poison its per-box
    // nearest-depth reference during clutter removal. Clutter points ride the
    // ray through their face as seen from the sweep-time vantage, so between
    // sweep and target they drift sideways by up to
    // 0.75 * cx * d_max / (lo - d_max) pixels, where d_max is the largest
    // relative displacement over the sweep window. The gap covers that drift
    // plus pixel rounding.
    const MAX_ATTEMPTS: u64 = 128;
    let (lo, hi) = spec.depth_range;
    let t_max = spec.sweep_interval_s * spec.sweeps_before.max(spec.sweeps_after) as f64;
    let d_max = (spec.ego_speed_mps.abs() + spec.box_speed_mps.abs()) * t_max;
    if spec.box_count > 1 && lo <= 2.0 * d_max {
        return Err(SynthError::BadSpec(format!(
            "relative motion of {d_max:.2} m over the sweep window is too large for \
             boxes starting at {lo} m; slow the scene down or push the boxes back"
        )));
    }
    let min_gap_px = 2.0
        + if d_max > 0.0 {
            0.75 * cam.cx * d_max / (lo - d_max)
        } else {
            0.0
        };
    let n = spec.box_count as usize;
    let mut spans: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut boxes = Vec::with_capacity(n);
    for i in 0..n {
        let b = i as u64;
        let slot = (hi - lo) / n as f64;
        let front_depth = lo + slot * (i as f64 + 0.25 + 0.5 * unit(seed, &[41, b]));
        let width = range(seed, &[42, b], 1.6, 2.4);
        let height = range(seed, &[43, b], 1.4, 2.0);
        // Keep the face comfortably inside the horizontal field of view.
        let y_max = (0.75 * front_depth * cam.cx / cam.fx - width / 2.0).max(0.0);
        let mut placed = None;
        for attempt in 0..MAX_ATTEMPTS {
            let center_y = range(seed, &[44, b, attempt], -y_max, y_max);
            // Horizontal extent of the projected front face; the face is
            // fronto-parallel, so only the lateral offset matters.
            let u_lo = cam.cx - cam.fx * (center_y + width / 2.0) / front_depth;
            let u_hi = cam.cx - cam.fx * (center_y - width / 2.0) / front_depth;
            if spans
                .iter()
                .all(|&(lo, hi)| u_hi + min_gap_px < lo || u_lo - min_gap_px > hi)
            {
                placed = Some((center_y, u_lo, u_hi));
                break;
            }
        }
        let Some((center_y, u_lo, u_hi)) = placed else {
            return Err(SynthError::BadSpec(format!(
                "could not place box {i} without screen overlap after {MAX_ATTEMPTS} attempts; \
                 reduce box_count or widen the raster"
            )));
        };
        spans.push((u_lo, u_hi));
        let albedo = [
            range(seed, &[45, b, 0], 0.25, 0.7),
            range(seed, &[45, b, 1], 0.25, 0.7),
            range(seed, &[45, b, 2], 0.25, 0.7),
        ];
        let vx = if spec.box_speed_mps > 0.0 {
            range(seed, &[46, b], -spec.box_speed_mps, spec.box_speed_mps)
        } else {
            0.0
        };
        boxes.push(Box3D {
            front_depth,
            center_y,
            width,
            height,
            velocity: Vector3::new(vx, 0.0, 0.0),
            class: classes[(draw(seed, &[47, b]) % classes.len() as u64) as usize],
            albedo,
        });
    }
    Ok(boxes)
}

fn project_box(
    cam: &CameraModel,
    cam_from_ego: &PoseSE3,
    b: &Box3D,
    box_index: usize,
) -> Result<BoundingBox2D, SynthError> {
    let corners = [
        Vector3::new(b.front_depth, b.center_y - b.width / 2.0, GROUND_Z),
        Vector3::new(b.front_depth, b.center_y + b.width / 2.0, GROUND_Z),
        Vector3::new(b.front_depth, b.center_y - b.width / 2.0, b.z_top()),
        Vector3::new(b.front_depth, b.center_y + b.width / 2.0, b.z_top()),
    ];
    let (mut u_min, mut v_min) = (f64::INFINITY, f64::INFINITY);
    let (mut u_max, mut v_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in corners {
        let p_cam = cam_from_ego.transform_point(&c);
        let Some((u, v, _)) = cam.project_unbounded(&p_cam) else {
            return Err(SynthError::OffScreenBox { box_index });
        };
        u_min = u_min.min(u);
        u_max = u_max.max(u);
        v_min = v_min.min(v);
        v_max = v_max.max(v);
    }
    if u_min < 0.0
        || v_min < 0.0
        || u_max > (cam.width - 1) as f64
        || v_max > (cam.height - 1) as f64
    {
        return Err(SynthError::OffScreenBox { box_index });
    }
    Ok(BoundingBox2D {
        u_min,
        v_min,
        u_max,
        v_max,
        class_label: b.class,
    })
}

fn generate_sweeps(
    seed: u64,
    spec: &SynthSpec,
    boxes: &[Box3D],
    backdrop_x: f64,
) -> (Vec<RadarSweep>, Vec<Vec<PointLabel>>) {
    let mut sweeps = Vec::new();
    let mut labels = Vec::new();
    let count = spec.sweeps_before + spec.sweeps_after + 1;
    for si in 0..count {
        let t = (si as f64 - spec.sweeps_before as f64) * spec.sweep_interval_s;
        let ego_pose = PoseSE3::from_translation(Vector3::new(spec.ego_speed_mps * t, 0.0, 0.0));
        let world_from_ego_inv = ego_pose.invert();
        let mut points = Vec::new();
        let mut point_labels = Vec::new();
        for (bi, b) in boxes.iter().enumerate() {
            let doppler_ego = world_from_ego_inv.rotate_vector(&b.velocity);
            let face_x = b.face_x(t);
            let y_lo = b.center_y_at(t) - b.width / 2.0;
            // Keep returns far enough inside the face that their pixel,
            // rounded to the nearest integer, still falls within the
            // projected box in the target view.
            let margin = (0.8 * b.front_depth / spec.focal).min(0.45 * b.width);
            for j in 0..spec.points_per_face {
                let path = [si as u64, bi as u64, j as u64];
                let jitter = 0.35 * (unit(seed, &[51, path[0], path[1], path[2]]) - 0.5);
                let frac = (j as f64 + 0.5 + jitter) / spec.points_per_face as f64;
                let y = (y_lo + frac * b.width).clamp(y_lo + margin, y_lo + b.width - margin);
                let p_world = Vector3::new(face_x, y, RADAR_Z);
                let p_ego = world_from_ego_inv.transform_point(&p_world);
                let mut push = |p: Vector3<f64>, label: PointLabel| {
                    points.push(RadarPoint {
                        position: [p.x, p.y, p.z],
                        doppler: [doppler_ego.x, doppler_ego.y],
                        timestamp: t,
                    });
                    point_labels.push(label);
                };
                push(p_ego, PointLabel::Object(bi));
                // Clutter rides the same ray from the sensor, offset along
                // the forward axis so its camera depth exceeds the face by a
                // controlled amount.
                let along_ray = |off: f64| p_ego * (1.0 + off / p_ego.x);
                if unit(seed, &[52, path[0], path[1], path[2]]) < spec.multipath_probability {
                    let off = range(
                        seed,
                        &[53, path[0], path[1], path[2]],
                        spec.multipath_offset_range.0,
                        spec.multipath_offset_range.1,
                    );
                    push(along_ray(off), PointLabel::Multipath(bi));
                }
                if unit(seed, &[54, path[0], path[1], path[2]]) < spec.see_through_probability {
                    let cap = (backdrop_x - 1.0 - face_x).max(spec.multipath_offset_range.0);
                    let off = range(seed, &[55, path[0], path[1], path[2]], 10.0, 30.0).min(cap);
                    push(along_ray(off), PointLabel::SeeThrough(bi));
                }
            }
        }
        sweeps.push(RadarSweep {
            timestamp: t,
            ego_pose,
            points,
        });
        labels.push(point_labels);
    }
    (sweeps, labels)
}

fn pick_gt_samples(
    seed: u64,
    scene_boxes: &[Box3D],
    boxes_2d: &[BoundingBox2D],
    surface: &Grid<SurfaceKind>,
    depth: &DepthRaster,
) -> Vec<GroundTruthSample> {
    let mut samples = Vec::new();
    let (w, h) = (depth.width(), depth.height());
    for (bi, b2) in boxes_2d.iter().enumerate() {
        let u_lo = b2.u_min.ceil() as u32;
        let u_hi = (b2.u_max.floor() as u32).min(w - 1);
        let v_lo = b2.v_min.ceil() as u32;
        let v_hi = (b2.v_max.floor() as u32).min(h - 1);
        if u_lo > u_hi || v_lo > v_hi {
            continue;
        }
        let mut kept = 0;
        for k in 0..40u64 {
            if kept >= 12 {
                break;
            }
            let u = u_lo + (draw(seed, &[60, bi as u64, k, 0]) % (u_hi - u_lo + 1) as u64) as u32;
            let v = v_lo + (draw(seed, &[60, bi as u64, k, 1]) % (v_hi - v_lo + 1) as u64) as u32;
            if *surface.get(u, v) == SurfaceKind::Object(bi as u32) {
                samples.push(GroundTruthSample {
                    u,
                    v,
                    depth: depth.at(u, v),
                    class_label: scene_boxes[bi].class,
                });
                kept += 1;
            }
        }
    }
    let mut kept = 0;
    for k in 0..30u64 {
        if kept >= 15 {
            break;
        }
        let u = (draw(seed, &[61, k, 0]) % w as u64) as u32;
        let v = (draw(seed, &[61, k, 1]) % h as u64) as u32;
        if !matches!(surface.get(u, v), SurfaceKind::Object(_)) {
            samples.push(GroundTruthSample {
                u,
                v,
                depth: depth.at(u, v),
                class_label: ObjectClass::Other,
            });
            kept += 1;
        }
    }
    samples
}

/// Generates a scene from the seed and spec. Identical inputs give an
/// identical scene, field for field.
pub fn generate(seed: u64, spec: &SynthSpec) -> Result<SyntheticScene, SynthError> {
    spec.validate()?;
    let camera = CameraModel::new(
        spec.focal,
        spec.focal,
        (spec.width as f64 - 1.0) / 2.0,
        (spec.height as f64 - 1.0) / 2.0,
        spec.width,
        spec.height,
    )
    .expect("validated spec yields a valid camera");
    let cam_from_ego = PoseSE3::camera_from_ego();
    let ego_from_cam = cam_from_ego.invert();
    let boxes_3d = sample_boxes(seed, spec, &camera)?;
    let backdrop_x = spec.depth_range.1 + 25.0;
    let mut boxes_2d = Vec::with_capacity(boxes_3d.len());
    for (i, b) in boxes_3d.iter().enumerate() {
        boxes_2d.push(project_box(&camera, &cam_from_ego, b, i)?);
    }
    let world = WorldModel {
        boxes: &boxes_3d,
        backdrop_x,
        focal: spec.focal,
        palette: Palette::new(seed),
    };
    let target_pose = PoseSE3::identity();
    let (target_image, true_depth, surface) = world.render(&camera, &ego_from_cam, &target_pose);
    let sources = spec
        .source_offsets_s
        .iter()
        .map(|&dt| {
            let ego_pose =
                PoseSE3::from_translation(Vector3::new(spec.ego_speed_mps * dt, 0.0, 0.0));
            let (image, _, _) = world.render(&camera, &ego_from_cam, &ego_pose);
            SynthSource {
                timestamp: dt,
                ego_pose,
                image,
            }
        })
        .collect();
    let (sweeps, labels) = generate_sweeps(seed, spec, &boxes_3d, backdrop_x);
    let gt_samples = pick_gt_samples(seed, &boxes_3d, &boxes_2d, &surface, &true_depth);
    Ok(SyntheticScene {
        seed,
        camera,
        cam_from_ego,
        target_time: 0.0,
        target_pose,
        target_image,
        true_depth,
        surface,
        sources,
        boxes_3d,
        boxes_2d,
        sweeps,
        labels,
        gt_samples,
    })
}
