//! Depth evaluation against sparse ground-truth samples: standard error and
//! accuracy statistics, overall and per semantic class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::MetricsConfig;
use crate::radar::ObjectClass;
use crate::raster::DepthRaster;
use crate::util::{median, pairwise_sum};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no ground-truth samples left after filtering")]
    NoSamples,
}

/// One ground-truth depth measurement at a pixel, tagged with the semantic
/// class of the surface it hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSample {
    pub u: u32,
    pub v: u32,
    /// Meters, along the camera's forward axis.
    pub depth: f64,
    pub class_label: ObjectClass,
}

/// Error and accuracy statistics over one sample population. The `delta`
/// fields are percentages of samples whose symmetric depth ratio
/// `max(pred/gt, gt/pred)` stays strictly below 1.25, 1.25^2, 1.25^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub count: usize,
}

/// Overall metrics plus a sub-report per class present in the sample set.
/// `dropped` counts samples excluded because their pixel had no valid
/// prediction or fell outside the raster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub overall: DepthMetrics,
    pub per_class: BTreeMap<ObjectClass, DepthMetrics>,
    pub dropped: usize,
}

/// Per-sample error terms; metrics are means (and roots of means) of these.
#[derive(Debug, Clone, Copy)]
struct SampleTerms {
    abs_rel: f64,
    sq_rel: f64,
    sq: f64,
    log_sq: f64,
    hits: [bool; 3],
}

fn sample_terms(pred: f64, gt: f64) -> SampleTerms {
    let diff = pred - gt;
    let ratio = (pred / gt).max(gt / pred);
    let mut hits = [false; 3];
    for (k, hit) in hits.iter_mut().enumerate() {
        *hit = ratio < 1.25f64.powi(k as i32 + 1);
    }
    SampleTerms {
        abs_rel: diff.abs() / gt,
        sq_rel: diff * diff / gt,
        sq: diff * diff,
        log_sq: (pred.ln() - gt.ln()).powi(2),
        hits,
    }
}

fn summarize(terms: &[SampleTerms]) -> DepthMetrics {
    let n = terms.len();
    assert!(n > 0, "summarize requires at least one sample");
    let mean = |f: &dyn Fn(&SampleTerms) -> f64| {
        pairwise_sum(&terms.iter().map(f).collect::<Vec<_>>()) / n as f64
    };
    let pct = |k: usize| 100.0 * terms.iter().filter(|t| t.hits[k]).count() as f64 / n as f64;
    DepthMetrics {
        abs_rel: mean(&|t| t.abs_rel),
        sq_rel: mean(&|t| t.sq_rel),
        rmse: mean(&|t| t.sq).sqrt(),
        rmse_log: mean(&|t| t.log_sq).sqrt(),
        delta1: pct(0),
        delta2: pct(1),
        delta3: pct(2),
        count: n,
    }
}

fn average_frames(frames: &[DepthMetrics]) -> DepthMetrics {
    assert!(!frames.is_empty());
    let n = frames.len() as f64;
    let mean = |f: &dyn Fn(&DepthMetrics) -> f64| {
        pairwise_sum(&frames.iter().map(f).collect::<Vec<_>>()) / n
    };
    DepthMetrics {
        abs_rel: mean(&|m| m.abs_rel),
        sq_rel: mean(&|m| m.sq_rel),
        rmse: mean(&|m| m.rmse),
        rmse_log: mean(&|m| m.rmse_log),
        delta1: mean(&|m| m.delta1),
        delta2: mean(&|m| m.delta2),
        delta3: mean(&|m| m.delta3),
        count: frames.iter().map(|m| m.count).sum(),
    }
}

/// One frame's prediction with its ground-truth samples.
pub struct FrameSamples<'a> {
    pub prediction: &'a DepthRaster,
    pub samples: &'a [GroundTruthSample],
}

/// Evaluates predictions over one or more frames.
///
/// Samples are kept when their ground-truth depth lies in
/// `[min_depth_m, max_depth_m]`, their pixel is inside the raster with a
/// valid prediction, and (when given) their class is in `class_filter`. With
/// median scaling enabled, each frame's predictions are rescaled by
/// `median(gt) / median(pred)` over that frame's kept samples; predictions
/// are then clamped to `[min_depth_m, max_depth_m]`. Frames are pooled into
/// one population by default; `per_frame_average` instead averages each
/// frame's metrics with equal weight (frames lacking samples for a class do
/// not contribute to that class's average).
pub fn evaluate_frames(
    frames: &[FrameSamples],
    cfg: &MetricsConfig,
    class_filter: Option<&[ObjectClass]>,
) -> Result<MetricReport, MetricsError> {
    let mut pooled: BTreeMap<Option<ObjectClass>, Vec<SampleTerms>> = BTreeMap::new();
    let mut per_frame: BTreeMap<Option<ObjectClass>, Vec<DepthMetrics>> = BTreeMap::new();
    let mut dropped = 0usize;
    for frame in frames {
        let pred = frame.prediction;
        let mut kept: Vec<(f64, f64, ObjectClass)> = Vec::new();
        for s in frame.samples {
            if s.depth < cfg.min_depth_m || s.depth > cfg.max_depth_m {
                continue;
            }
            if let Some(filter) = class_filter {
                if !filter.contains(&s.class_label) {
                    continue;
                }
            }
            if s.u >= pred.width() || s.v >= pred.height() || !pred.is_valid(s.u, s.v) {
                dropped += 1;
                continue;
            }
            kept.push((pred.at(s.u, s.v), s.depth, s.class_label));
        }
        if kept.is_empty() {
            continue;
        }
        let scale = if cfg.median_scaling {
            let preds: Vec<f64> = kept.iter().map(|k| k.0).collect();
            let gts: Vec<f64> = kept.iter().map(|k| k.1).collect();
            median(&gts).expect("non-empty") / median(&preds).expect("non-empty")
        } else {
            1.0
        };
        let mut frame_terms: BTreeMap<Option<ObjectClass>, Vec<SampleTerms>> = BTreeMap::new();
        for (raw_pred, gt, class) in kept {
            let pred_value = (raw_pred * scale).clamp(cfg.min_depth_m, cfg.max_depth_m);
            let terms = sample_terms(pred_value, gt);
            frame_terms.entry(None).or_default().push(terms);
            frame_terms.entry(Some(class)).or_default().push(terms);
        }
        for (key, terms) in frame_terms {
            per_frame.entry(key).or_default().push(summarize(&terms));
            pooled.entry(key).or_default().extend(terms);
        }
    }
    let finish = |key: &Option<ObjectClass>| -> DepthMetrics {
        if cfg.per_frame_average {
            average_frames(&per_frame[key])
        } else {
            summarize(&pooled[key])
        }
    };
    if !pooled.contains_key(&None) {
        return Err(MetricsError::NoSamples);
    }
    let overall = finish(&None);
    let per_class = pooled
        .keys()
        .filter_map(|key| key.map(|class| (class, finish(&Some(class)))))
        .collect();
    Ok(MetricReport {
        overall,
        per_class,
        dropped,
    })
}

/// Single-frame convenience wrapper around [`evaluate_frames`].
pub fn evaluate(
    prediction: &DepthRaster,
    samples: &[GroundTruthSample],
    cfg: &MetricsConfig,
    class_filter: Option<&[ObjectClass]>,
) -> Result<MetricReport, MetricsError> {
    evaluate_frames(
        &[FrameSamples {
            prediction,
            samples,
        }],
        cfg,
        class_filter,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Grid;

    fn raster_of(values: &[f64]) -> DepthRaster {
        let grid = Grid::from_vec(values.len() as u32, 1, values.to_vec()).unwrap();
        DepthRaster::from_values(grid)
    }

    fn sample(u: u32, depth: f64, class: ObjectClass) -> GroundTruthSample {
        GroundTruthSample {
            u,
            v: 0,
            depth,
            class_label: class,
        }
    }

    #[test]
    fn perfect_prediction_is_the_zero_report() {
        let pred = raster_of(&[5.0, 10.0, 20.0]);
        let samples = [
            sample(0, 5.0, ObjectClass::Car),
            sample(1, 10.0, ObjectClass::Pedestrian),
            sample(2, 20.0, ObjectClass::Other),
        ];
        let report = evaluate(&pred, &samples, &MetricsConfig::default(), None).unwrap();
        let m = report.overall;
        assert_eq!(
            (m.abs_rel, m.sq_rel, m.rmse, m.rmse_log),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!((m.delta1, m.delta2, m.delta3), (100.0, 100.0, 100.0));
        assert_eq!(m.count, 3);
        assert_eq!(report.per_class.len(), 3);
    }

    #[test]
    fn ten_percent_overshoot_fixture() {
        let pred = raster_of(&[11.0]);
        let samples = [sample(0, 10.0, ObjectClass::Car)];
        let m = evaluate(&pred, &samples, &MetricsConfig::default(), None)
            .unwrap()
            .overall;
        assert!((m.abs_rel - 0.1).abs() < 1e-12);
        assert!((m.sq_rel - 0.1).abs() < 1e-12);
        assert!((m.rmse - 1.0).abs() < 1e-12);
        assert!((m.rmse_log - (1.1f64.ln())).abs() < 1e-12);
        assert_eq!(m.delta1, 100.0);
    }

    #[test]
    fn thirty_percent_overshoot_fixture() {
        let pred = raster_of(&[13.0]);
        let samples = [sample(0, 10.0, ObjectClass::Car)];
        let m = evaluate(&pred, &samples, &MetricsConfig::default(), None)
            .unwrap()
            .overall;
        assert_eq!(m.delta1, 0.0, "1.3 is not below 1.25");
        assert_eq!(m.delta2, 100.0, "1.3 is below 1.5625");
        assert_eq!(m.delta3, 100.0);
    }

    #[test]
    fn symmetric_ratio_catches_underestimates() {
        // pred/gt = 0.5: ratio max(0.5, 2) = 2 misses delta1 and delta2.
        let pred = raster_of(&[5.0]);
        let samples = [sample(0, 10.0, ObjectClass::Car)];
        let m = evaluate(&pred, &samples, &MetricsConfig::default(), None)
            .unwrap()
            .overall;
        assert_eq!(m.delta1, 0.0);
        assert_eq!(m.delta2, 0.0);
        assert_eq!(m.delta3, 0.0, "2 is not below 1.953");
    }

    #[test]
    fn abs_rel_of_uniform_scaling_is_the_scale_offset() {
        for k in [0.5, 2.0] {
            let gts = [4.0, 9.0, 15.0, 30.0];
            let preds: Vec<f64> = gts.iter().map(|d| k * d).collect();
            let pred = raster_of(&preds);
            let samples: Vec<GroundTruthSample> = gts
                .iter()
                .enumerate()
                .map(|(i, d)| sample(i as u32, *d, ObjectClass::Car))
                .collect();
            let m = evaluate(&pred, &samples, &MetricsConfig::default(), None)
                .unwrap()
                .overall;
            assert!((m.abs_rel - (k - 1.0f64).abs()).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn median_scaling_zeroes_uniformly_scaled_predictions() {
        let gts = [4.0, 9.0, 15.0, 30.0];
        let preds: Vec<f64> = gts.iter().map(|d| 2.0 * d).collect();
        let pred = raster_of(&preds);
        let samples: Vec<GroundTruthSample> = gts
            .iter()
            .enumerate()
            .map(|(i, d)| sample(i as u32, *d, ObjectClass::Car))
            .collect();
        let cfg = MetricsConfig {
            median_scaling: true,
            ..MetricsConfig::default()
        };
        let m = evaluate(&pred, &samples, &cfg, None).unwrap().overall;
        assert_eq!((m.abs_rel, m.rmse), (0.0, 0.0));
        assert_eq!(m.delta1, 100.0);
    }

    #[test]
    fn class_filter_restricts_the_population() {
        let pred = raster_of(&[11.0, 20.0]);
        let samples = [
            sample(0, 10.0, ObjectClass::Car),
            sample(1, 20.0, ObjectClass::Other),
        ];
        let report = evaluate(
            &pred,
            &samples,
            &MetricsConfig::default(),
            Some(&[ObjectClass::Car]),
        )
        .unwrap();
        assert_eq!(report.overall.count, 1);
        assert!((report.overall.abs_rel - 0.1).abs() < 1e-12);
        assert!(report.per_class.contains_key(&ObjectClass::Car));
        assert!(!report.per_class.contains_key(&ObjectClass::Other));
    }

    #[test]
    fn per_class_counts_partition_the_total() {
        let pred = raster_of(&[11.0, 20.0, 8.0, 31.0]);
        let samples = [
            sample(0, 10.0, ObjectClass::Car),
            sample(1, 19.0, ObjectClass::Car),
            sample(2, 8.5, ObjectClass::Bicycle),
            sample(3, 30.0, ObjectClass::Other),
        ];
        let report = evaluate(&pred, &samples, &MetricsConfig::default(), None).unwrap();
        let sum: usize = report.per_class.values().map(|m| m.count).sum();
        assert_eq!(sum, report.overall.count);
    }

    #[test]
    fn out_of_range_and_invalid_samples_are_excluded() {
        let mut pred = raster_of(&[11.0, 20.0, 30.0]);
        pred.clear(1, 0);
        let samples = [
            sample(0, 10.0, ObjectClass::Car),
            sample(1, 20.0, ObjectClass::Car), // invalid prediction
            sample(2, 90.0, ObjectClass::Car), // beyond max depth
            sample(2, 0.05, ObjectClass::Car), // below min depth
        ];
        let report = evaluate(&pred, &samples, &MetricsConfig::default(), None).unwrap();
        assert_eq!(report.overall.count, 1);
        assert_eq!(report.dropped, 1);
    }

    #[test]
    fn empty_population_is_an_error() {
        let pred = raster_of(&[10.0]);
        let samples = [sample(0, 90.0, ObjectClass::Car)];
        assert!(matches!(
            evaluate(&pred, &samples, &MetricsConfig::default(), None),
            Err(MetricsError::NoSamples)
        ));
    }

    #[test]
    fn delta_thresholds_are_monotone() {
        let pred = raster_of(&[11.0, 14.0, 25.0, 9.0]);
        let samples = [
            sample(0, 10.0, ObjectClass::Car),
            sample(1, 10.0, ObjectClass::Car),
            sample(2, 10.0, ObjectClass::Car),
            sample(3, 10.0, ObjectClass::Car),
        ];
        let m = evaluate(&pred, &samples, &MetricsConfig::default(), None)
            .unwrap()
            .overall;
        assert!(m.delta1 <= m.delta2 && m.delta2 <= m.delta3 && m.delta3 <= 100.0);
    }

    #[test]
    fn per_frame_average_weighs_frames_equally() {
        // Frame 1: one sample with AbsRel 0.1. Frame 2: three samples with
        // AbsRel 0.3 each. Pooled mean is 0.25; per-frame average is 0.2.
        let pred1 = raster_of(&[11.0]);
        let samples1 = [sample(0, 10.0, ObjectClass::Car)];
        let pred2 = raster_of(&[13.0, 13.0, 13.0]);
        let samples2 = [
            sample(0, 10.0, ObjectClass::Car),
            sample(1, 10.0, ObjectClass::Car),
            sample(2, 10.0, ObjectClass::Car),
        ];
        let frames = [
            FrameSamples {
                prediction: &pred1,
                samples: &samples1,
            },
            FrameSamples {
                prediction: &pred2,
                samples: &samples2,
            },
        ];
        let pooled = evaluate_frames(&frames, &MetricsConfig::default(), None).unwrap();
        assert!((pooled.overall.abs_rel - 0.25).abs() < 1e-12);
        let cfg = MetricsConfig {
            per_frame_average: true,
            ..MetricsConfig::default()
        };
        let averaged = evaluate_frames(&frames, &cfg, None).unwrap();
        assert!((averaged.overall.abs_rel - 0.2).abs() < 1e-12);
        assert_eq!(averaged.overall.count, 4);
    }
}
