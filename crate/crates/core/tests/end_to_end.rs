//! Whole-pipeline flows through the public API: one generated scene drives
//! disk roundtrips, supervision, the loss stack, input filtering, and
//! metrics together.

use radepth::config::Config;
use radepth::io::{load_scene, save_scene};
use radepth::loss::radar_loss;
use radepth::metrics::evaluate;
use radepth::pipeline::{filter_input, prepare_supervision, scene_loss, supervision_pack, Scene};
use radepth::synth::{generate, SynthSpec};

fn street_scene() -> Scene {
    let spec = SynthSpec {
        width: 96,
        height: 64,
        focal: 48.0,
        ..SynthSpec::default()
    };
    Scene::from_synthetic(&generate(11, &spec).unwrap())
}

#[test]
fn a_saved_scene_reloads_and_prepares_the_same_supervision() {
    let scene = street_scene();
    let dir = tempfile::tempdir().unwrap();
    let doc = save_scene(&scene, dir.path(), "scene").unwrap();
    let loaded = load_scene(&doc).unwrap();

    // Geometry, returns, and samples travel through the JSON document and
    // survive exactly.
    assert_eq!(loaded.camera, scene.camera);
    assert_eq!(loaded.boxes, scene.boxes);
    assert_eq!(loaded.sweeps, scene.sweeps);
    assert_eq!(loaded.gt_samples, scene.gt_samples);

    // Rasters are quantized to 32-bit floats on disk.
    for y in 0..scene.target_image.height() {
        for x in 0..scene.target_image.width() {
            let (a, b) = (scene.target_image.at(x, y), loaded.target_image.at(x, y));
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-6, "pixel ({x}, {y}) channel {c}");
            }
        }
    }

    // Point filtering reads geometry only, so the reloaded scene yields the
    // identical supervision skeleton.
    let config = Config::default();
    let pa = prepare_supervision(&scene, &config).unwrap();
    let pb = prepare_supervision(&loaded, &config).unwrap();
    assert_eq!(pa.stages, pb.stages);
    assert_eq!(pa.projected.entries, pb.projected.entries);
    assert!(pb.association.masked_count() > 0);
}

#[test]
fn the_loss_stack_decomposes_over_its_components() {
    let scene = street_scene();
    let config = Config::default();
    let prepared = prepare_supervision(&scene, &config).unwrap();
    let truth = scene.true_depth.clone().unwrap();
    let half = truth.resize_bilinear(48, 32).unwrap();
    let scales = [truth.clone(), half];
    let pack = supervision_pack(&prepared, &truth);

    let (report, maps) = scene_loss(&scene, &scales, None, Some(&pack), &config).unwrap();
    for (name, v) in [
        ("photometric", report.photometric),
        ("smoothness", report.smoothness),
        ("velocity", report.velocity),
        ("radar", report.radar),
    ] {
        assert!(v.is_finite() && v >= 0.0, "{name} component is {v}");
    }
    let recombined = report.photometric
        + report.lambda_smoothness * report.smoothness
        + report.lambda_velocity * report.velocity
        + report.lambda_radar * report.radar;
    assert!(
        (report.total - recombined).abs() <= 1e-12 * report.total.max(1.0),
        "total {} vs recombined {recombined}",
        report.total
    );
    // The stack's radar term is the standalone loss on the finest scale.
    assert_eq!(
        report.radar,
        radar_loss(&truth, &pack, config.loss.radar_normalization)
    );

    assert_eq!(
        (maps.min_error.width(), maps.min_error.height()),
        (scene.camera.width, scene.camera.height)
    );
    assert!(maps.automask.is_some(), "automasking is on by default");
    let residual = maps.radar_residual.expect("supervision was supplied");
    for y in 0..residual.height() {
        for x in 0..residual.width() {
            if !pack.is_supervised(x, y) {
                assert_eq!(
                    residual.at(x, y),
                    0.0,
                    "residual off the mask at ({x}, {y})"
                );
            }
        }
    }
}

#[test]
fn true_depth_scores_perfectly_on_the_scene_samples() {
    let scene = street_scene();
    let truth = scene.true_depth.as_ref().unwrap();
    let config = Config::default();
    let report = evaluate(truth, &scene.gt_samples, &config.metrics, None).unwrap();
    assert!(report.overall.count > 0);
    assert_eq!(report.overall.abs_rel, 0.0);
    assert_eq!(report.overall.rmse, 0.0);
    assert_eq!(report.overall.delta1, 100.0);
    assert!(
        !report.per_class.is_empty(),
        "scene samples carry class labels"
    );
    for (class, m) in &report.per_class {
        assert_eq!(m.abs_rel, 0.0, "{class:?}");
        assert_eq!(m.delta1, 100.0, "{class:?}");
    }
}

#[test]
fn input_filtering_pools_returns_into_an_occupied_raster() {
    let scene = street_scene();
    let config = Config::default();
    let filtered = filter_input(&scene, &config).unwrap();
    assert_eq!(filtered.stages.len(), 1);
    assert_eq!(filtered.stages[0].stage, "window-min-pool");
    assert_eq!(filtered.occupied_pixels, filtered.raster.valid_count());
    assert!(
        filtered.occupied_pixels > 0,
        "no radar returns landed in the raster"
    );
    for y in 0..filtered.raster.height() {
        for x in 0..filtered.raster.width() {
            if filtered.raster.is_valid(x, y) {
                assert!(
                    filtered.raster.at(x, y) > 0.0,
                    "nonpositive depth at ({x}, {y})"
                );
            }
        }
    }
}
