//! Noise-filtering stages for projected radar points.
//!
//! Every stage implements [`FilterStage`] over the same point-set signature,
//! is registered under a stable name, and chains are assembled at runtime
//! from config or CLI stage lists. [`run_chain`] records per-stage survival
//! counts, which become the provenance log of the preparation commands.
//!
//! Registered stages:
//! - `clutter-removal`: drops returns outside every box and in-box returns
//!   more than β meters behind the nearest return of their box.
//! - `object-focus`: keeps returns in the lower half and middle 60% of their
//!   box, outside any box overlap.
//! - `duplicate-vertical`: replaces each return with supervision seeds at the
//!   box middle and lower third rows.
//! - `window-min-pool`: sliding-window nearest-return test for the inference
//!   input path.

use std::collections::HashMap;

use crate::config::Config;

use super::{BoundingBox2D, ProjectedRadar, RadarEntry, RadarError};

/// Per-frame context shared by all stages.
pub struct StageContext<'a> {
    pub boxes: &'a [BoundingBox2D],
}

/// A point-set filter selectable by name.
pub trait FilterStage {
    fn name(&self) -> &'static str;
    fn apply(&self, input: &ProjectedRadar, ctx: &StageContext) -> ProjectedRadar;
}

/// Survival count of one stage application.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub points_in: usize,
    pub points_out: usize,
}

/// Names accepted by [`build_stage`], in registration order.
pub const STAGE_NAMES: [&str; 4] = [
    "clutter-removal",
    "object-focus",
    "duplicate-vertical",
    "window-min-pool",
];

/// Instantiates a registered stage from its name and the active config.
pub fn build_stage(name: &str, config: &Config) -> Result<Box<dyn FilterStage>, RadarError> {
    match name {
        "clutter-removal" => Ok(Box::new(ClutterRemoval {
            beta_m: config.radar.beta_m,
        })),
        "object-focus" => Ok(Box::new(ObjectFocus)),
        "duplicate-vertical" => Ok(Box::new(DuplicateVertical)),
        "window-min-pool" => Ok(Box::new(WindowMinPool {
            window_width: config.radar.window_width_px,
            window_height: config.radar.window_height_px,
            stride: config.radar.window_stride_px,
            beta_m: config.radar.beta_m,
        })),
        other => Err(RadarError::UnknownStage(other.to_string())),
    }
}

/// Builds a whole chain from config-level stage names.
pub fn build_chain(
    names: &[String],
    config: &Config,
) -> Result<Vec<Box<dyn FilterStage>>, RadarError> {
    names.iter().map(|n| build_stage(n, config)).collect()
}

/// Runs the stages in order, recording survival counts per stage.
pub fn run_chain(
    stages: &[Box<dyn FilterStage>],
    input: ProjectedRadar,
    ctx: &StageContext,
) -> (ProjectedRadar, Vec<StageRecord>) {
    let mut current = input;
    let mut records = Vec::with_capacity(stages.len());
    for stage in stages {
        let points_in = current.len();
        current = stage.apply(&current, ctx);
        records.push(StageRecord {
            stage: stage.name().to_string(),
            points_in,
            points_out: current.len(),
        });
    }
    (current, records)
}

/// Smallest-area box containing `(u, v)`, so nested boxes resolve to the
/// inner object.
pub fn assign_box(u: f64, v: f64, boxes: &[BoundingBox2D]) -> Option<usize> {
    boxes
        .iter()
        .enumerate()
        .filter(|(_, b)| b.contains(u, v))
        .min_by(|(_, a), (_, b)| a.area().partial_cmp(&b.area()).expect("finite box areas"))
        .map(|(i, _)| i)
}

/// Removes returns outside every box, and in-box returns deeper than the
/// nearest return of their box by `beta_m` or more. Survivors remember their
/// assigned box.
pub struct ClutterRemoval {
    pub beta_m: f64,
}

impl FilterStage for ClutterRemoval {
    fn name(&self) -> &'static str {
        "clutter-removal"
    }

    fn apply(&self, input: &ProjectedRadar, ctx: &StageContext) -> ProjectedRadar {
        let assignments: Vec<Option<usize>> = input
            .entries
            .iter()
            .map(|e| assign_box(e.u as f64, e.v as f64, ctx.boxes))
            .collect();
        let mut nearest = vec![f64::INFINITY; ctx.boxes.len()];
        for (e, assigned) in input.entries.iter().zip(&assignments) {
            if let Some(b) = assigned {
                nearest[*b] = nearest[*b].min(e.depth);
            }
        }
        let entries = input
            .entries
            .iter()
            .zip(&assignments)
            .filter_map(|(e, assigned)| {
                let b = (*assigned)?;
                (e.depth < nearest[b] + self.beta_m).then_some(RadarEntry {
                    box_index: Some(b),
                    ..*e
                })
            })
            .collect();
        ProjectedRadar {
            width: input.width,
            height: input.height,
            entries,
        }
    }
}

/// Keeps returns plausibly reflected by the object itself: lower half of the
/// box (vehicles return from the body, not the space above), middle 60%
/// horizontally (outer 20% margins often graze the background), and outside
/// any region where boxes overlap (ambiguous ownership).
pub struct ObjectFocus;

impl FilterStage for ObjectFocus {
    fn name(&self) -> &'static str {
        "object-focus"
    }

    fn apply(&self, input: &ProjectedRadar, ctx: &StageContext) -> ProjectedRadar {
        let entries = input
            .entries
            .iter()
            .filter(|e| {
                let b = match e.box_index {
                    Some(b) => &ctx.boxes[b],
                    None => return false,
                };
                let (u, v) = (e.u as f64, e.v as f64);
                if v < 0.5 * (b.v_min + b.v_max) {
                    return false;
                }
                let margin = 0.2 * b.width();
                if u < b.u_min + margin || u > b.u_max - margin {
                    return false;
                }
                ctx.boxes.iter().filter(|bb| bb.contains(u, v)).count() < 2
            })
            .copied()
            .collect();
        ProjectedRadar {
            width: input.width,
            height: input.height,
            entries,
        }
    }
}

/// Replaces each return with supervision seeds at the middle and lower-third
/// rows of its box (same column and depth); the original row is dropped. The
/// upper half of a box never receives seeds.
pub struct DuplicateVertical;

impl FilterStage for DuplicateVertical {
    fn name(&self) -> &'static str {
        "duplicate-vertical"
    }

    fn apply(&self, input: &ProjectedRadar, ctx: &StageContext) -> ProjectedRadar {
        let clamp_row =
            |v: f64| -> u32 { (v.round() as i64).clamp(0, input.height as i64 - 1) as u32 };
        let mut entries = Vec::with_capacity(input.len() * 2);
        for e in &input.entries {
            let b = match e.box_index {
                Some(b) => &ctx.boxes[b],
                None => continue,
            };
            let h = b.height();
            for v_seed in [b.v_min + 0.5 * h, b.v_min + 2.0 * h / 3.0] {
                entries.push(RadarEntry {
                    v: clamp_row(v_seed),
                    ..*e
                });
            }
        }
        ProjectedRadar {
            width: input.width,
            height: input.height,
            entries,
        }
    }
}

/// Sliding-window nearest-return filter for the inference input: a return
/// survives only if its depth stays within `beta_m` of the minimum depth in
/// every window covering it.
pub struct WindowMinPool {
    pub window_width: u32,
    pub window_height: u32,
    pub stride: u32,
    pub beta_m: f64,
}

impl WindowMinPool {
    /// Window origins covering `coord`: multiples of `stride` in
    /// `(coord - window, coord]`, clipped to origins that exist for the
    /// raster extent.
    fn covering(coord: u32, window: u32, stride: u32, extent: u32) -> impl Iterator<Item = u32> {
        let lo = coord.saturating_sub(window - 1);
        let first = lo.div_ceil(stride) * stride;
        let max_origin = (extent - 1) / stride * stride;
        (first..=coord.min(max_origin)).step_by(stride as usize)
    }

    fn windows_of(&self, e: &RadarEntry, extent: (u32, u32)) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for x0 in Self::covering(e.u, self.window_width, self.stride, extent.0) {
            for y0 in Self::covering(e.v, self.window_height, self.stride, extent.1) {
                out.push((x0, y0));
            }
        }
        out
    }
}

impl FilterStage for WindowMinPool {
    fn name(&self) -> &'static str {
        "window-min-pool"
    }

    fn apply(&self, input: &ProjectedRadar, _ctx: &StageContext) -> ProjectedRadar {
        let extent = (input.width, input.height);
        let mut window_min: HashMap<(u32, u32), f64> = HashMap::new();
        for e in &input.entries {
            for w in self.windows_of(e, extent) {
                window_min
                    .entry(w)
                    .and_modify(|m| *m = m.min(e.depth))
                    .or_insert(e.depth);
            }
        }
        let entries = input
            .entries
            .iter()
            .filter(|e| {
                self.windows_of(e, extent)
                    .iter()
                    .all(|w| e.depth < window_min[w] + self.beta_m)
            })
            .copied()
            .collect();
        ProjectedRadar {
            width: input.width,
            height: input.height,
            entries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::ObjectClass;

    fn boxed(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> BoundingBox2D {
        BoundingBox2D {
            u_min,
            v_min,
            u_max,
            v_max,
            class_label: ObjectClass::Car,
        }
    }

    fn entry(u: u32, v: u32, depth: f64) -> RadarEntry {
        RadarEntry {
            u,
            v,
            depth,
            source: 0,
            box_index: None,
        }
    }

    fn radar(width: u32, height: u32, entries: Vec<RadarEntry>) -> ProjectedRadar {
        ProjectedRadar {
            width,
            height,
            entries,
        }
    }

    #[test]
    fn clutter_removal_keeps_near_band_and_drops_outsiders() {
        let boxes = [boxed(10.0, 10.0, 50.0, 50.0)];
        let input = radar(
            100,
            100,
            vec![
                entry(20, 30, 8.0),
                entry(25, 30, 9.5),
                entry(30, 30, 13.0),
                entry(80, 80, 5.0), // outside every box
            ],
        );
        let out = ClutterRemoval { beta_m: 2.0 }.apply(&input, &StageContext { boxes: &boxes });
        let depths: Vec<f64> = out.entries.iter().map(|e| e.depth).collect();
        assert_eq!(depths, vec![8.0, 9.5]);
        assert!(out.entries.iter().all(|e| e.box_index == Some(0)));
    }

    #[test]
    fn clutter_removal_assigns_nested_entries_to_smaller_box() {
        let boxes = [boxed(0.0, 0.0, 90.0, 90.0), boxed(30.0, 30.0, 60.0, 60.0)];
        let input = radar(100, 100, vec![entry(40, 40, 10.0), entry(10, 10, 30.0)]);
        let out = ClutterRemoval { beta_m: 2.0 }.apply(&input, &StageContext { boxes: &boxes });
        assert_eq!(out.entries[0].box_index, Some(1));
        assert_eq!(out.entries[1].box_index, Some(0));
        // Per-box minima are separate: both survive their own box's band.
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn clutter_removal_is_idempotent() {
        let boxes = [boxed(0.0, 0.0, 60.0, 60.0)];
        let ctx = StageContext { boxes: &boxes };
        let input = radar(
            100,
            100,
            vec![
                entry(5, 5, 12.0),
                entry(6, 6, 13.9),
                entry(7, 7, 14.1),
                entry(70, 70, 1.0),
            ],
        );
        let stage = ClutterRemoval { beta_m: 2.0 };
        let once = stage.apply(&input, &ctx);
        let twice = stage.apply(&once, &ctx);
        assert_eq!(once, twice);
    }

    #[test]
    fn object_focus_drops_upper_half_and_outer_margins() {
        let boxes = [boxed(0.0, 0.0, 100.0, 100.0)];
        let ctx = StageContext { boxes: &boxes };
        let mut entries = vec![
            entry(50, 30, 10.0), // upper half
            entry(10, 80, 10.0), // outer 20% left (u < 20)
            entry(90, 80, 10.0), // outer 20% right (u > 80)
            entry(50, 80, 10.0), // keeper
            entry(20, 80, 10.0), // exactly on the margin boundary: kept
        ];
        for e in &mut entries {
            e.box_index = Some(0);
        }
        let out = ObjectFocus.apply(&radar(120, 120, entries), &ctx);
        let kept: Vec<(u32, u32)> = out.entries.iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(kept, vec![(50, 80), (20, 80)]);
    }

    #[test]
    fn object_focus_drops_box_overlap_regions() {
        let boxes = [boxed(0.0, 0.0, 60.0, 60.0), boxed(40.0, 0.0, 120.0, 60.0)];
        let ctx = StageContext { boxes: &boxes };
        let mut inside_overlap = entry(50, 40, 10.0);
        inside_overlap.box_index = Some(0);
        let mut clear = entry(30, 40, 10.0);
        clear.box_index = Some(0);
        let out = ObjectFocus.apply(&radar(130, 70, vec![inside_overlap, clear]), &ctx);
        assert_eq!(out.len(), 1);
        assert_eq!(out.entries[0].u, 30);
    }

    #[test]
    fn object_focus_is_idempotent() {
        let boxes = [
            boxed(0.0, 0.0, 100.0, 100.0),
            boxed(80.0, 0.0, 160.0, 100.0),
        ];
        let ctx = StageContext { boxes: &boxes };
        let mut entries = Vec::new();
        for u in (0..120).step_by(7) {
            for v in (0..100).step_by(11) {
                let mut e = entry(u, v, 5.0 + (u + v) as f64 / 10.0);
                e.box_index = assign_box(u as f64, v as f64, &boxes);
                if e.box_index.is_some() {
                    entries.push(e);
                }
            }
        }
        let stage = ObjectFocus;
        let once = stage.apply(&radar(200, 120, entries), &ctx);
        let twice = stage.apply(&once, &ctx);
        assert_eq!(once, twice);
    }

    #[test]
    fn duplicate_vertical_places_middle_and_lower_third_seeds() {
        let boxes = [boxed(0.0, 0.0, 100.0, 60.0), boxed(0.0, 10.0, 100.0, 40.0)];
        let ctx = StageContext { boxes: &boxes };
        let mut a = entry(50, 55, 12.0);
        a.box_index = Some(0);
        let mut b = entry(70, 35, 9.0);
        b.box_index = Some(1);
        let out = DuplicateVertical.apply(&radar(120, 80, vec![a, b]), &ctx);
        let rows: Vec<(u32, u32, f64)> = out.entries.iter().map(|e| (e.u, e.v, e.depth)).collect();
        assert_eq!(
            rows,
            vec![(50, 30, 12.0), (50, 40, 12.0), (70, 25, 9.0), (70, 30, 9.0)]
        );
    }

    #[test]
    fn duplicate_vertical_never_seeds_the_upper_half() {
        let boxes = [boxed(0.0, 13.0, 100.0, 76.0)];
        let ctx = StageContext { boxes: &boxes };
        let mut e = entry(50, 20, 12.0);
        e.box_index = Some(0);
        let out = DuplicateVertical.apply(&radar(120, 90, vec![e]), &ctx);
        let midpoint = 0.5 * (13.0 + 76.0);
        assert_eq!(out.len(), 2);
        for seed in &out.entries {
            // Integer rounding may sit half a pixel above the exact midpoint.
            assert!(
                seed.v as f64 >= midpoint - 0.5,
                "seed row {} above midpoint",
                seed.v
            );
        }
    }

    #[test]
    fn window_min_pool_removes_far_return_sharing_a_window() {
        let stage = WindowMinPool {
            window_width: 8,
            window_height: 320,
            stride: 3,
            beta_m: 2.0,
        };
        let input = radar(320, 320, vec![entry(100, 50, 10.0), entry(102, 60, 14.0)]);
        let out = stage.apply(&input, &StageContext { boxes: &[] });
        let depths: Vec<f64> = out.entries.iter().map(|e| e.depth).collect();
        assert_eq!(depths, vec![10.0]);
    }

    #[test]
    fn window_min_pool_keeps_isolated_and_distant_returns() {
        let stage = WindowMinPool {
            window_width: 8,
            window_height: 320,
            stride: 3,
            beta_m: 2.0,
        };
        // 30 px apart horizontally: an 8-wide window never covers both.
        let input = radar(320, 320, vec![entry(50, 100, 30.0), entry(80, 100, 5.0)]);
        let out = stage.apply(&input, &StageContext { boxes: &[] });
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn window_min_pool_never_removes_the_nearest_return() {
        let stage = WindowMinPool {
            window_width: 8,
            window_height: 8,
            stride: 3,
            beta_m: 2.0,
        };
        let mut entries = Vec::new();
        for i in 0..40u32 {
            entries.push(entry(i * 3 % 64, i * 7 % 64, 4.0 + i as f64));
        }
        let nearest = entries
            .iter()
            .map(|e| e.depth)
            .fold(f64::INFINITY, f64::min);
        let out = stage.apply(&radar(64, 64, entries), &StageContext { boxes: &[] });
        assert!(out.entries.iter().any(|e| e.depth == nearest));
    }

    #[test]
    fn chain_runner_records_survival_counts() {
        let config = Config::default();
        let chain = build_chain(
            &[
                "clutter-removal".into(),
                "object-focus".into(),
                "duplicate-vertical".into(),
            ],
            &config,
        )
        .unwrap();
        let boxes = [boxed(0.0, 0.0, 100.0, 100.0)];
        let input = radar(
            120,
            120,
            vec![entry(50, 80, 10.0), entry(50, 81, 30.0), entry(110, 5, 4.0)],
        );
        let (out, records) = run_chain(&chain, input, &StageContext { boxes: &boxes });
        assert_eq!(records.len(), 3);
        assert_eq!(
            records[0],
            StageRecord {
                stage: "clutter-removal".into(),
                points_in: 3,
                points_out: 1
            }
        );
        assert_eq!(records[1].points_out, 1);
        assert_eq!(records[2].points_out, 2);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn registry_rejects_unknown_names() {
        let config = Config::default();
        assert!(build_stage("window-min-pool", &config).is_ok());
        assert!(matches!(
            build_stage("median-blur", &config),
            Err(RadarError::UnknownStage(_))
        ));
        for name in STAGE_NAMES {
            assert_eq!(build_stage(name, &config).unwrap().name(), name);
        }
    }
}
