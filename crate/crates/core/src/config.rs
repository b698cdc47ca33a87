//! Runtime configuration with embedded defaults.
//!
//! Every tunable of the pipeline lives here so CLI flags, TOML files, and
//! library callers share one source of truth. `Config::default()` is the
//! reference parameterization; a TOML file overrides any subset of fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable naming a default config file for the CLI.
pub const CONFIG_ENV: &str = "RADEPTH_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub radar: RadarConfig,
    pub association: AssociationConfig,
    pub loss: LossConfig,
    pub metrics: MetricsConfig,
}

/// Accumulation windows and point-filtering parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    /// Tolerance band in meters behind the nearest return of a box; deeper
    /// in-box returns are treated as clutter.
    pub beta_m: f64,
    /// Sweeps accumulated before/after the target frame for supervision.
    pub supervision_sweeps_before: u32,
    pub supervision_sweeps_after: u32,
    /// Sweeps accumulated before the target frame for the inference input
    /// (never after: the input must not see the future).
    pub input_sweeps_before: u32,
    /// Slack in seconds when rejecting future sweeps on the input path.
    pub future_tolerance_s: f64,
    /// Sliding window of the inference-time min-pool filter, pixels.
    pub window_width_px: u32,
    pub window_height_px: u32,
    pub window_stride_px: u32,
    /// Filter stage chains by registry name; see `radar::stages`.
    pub supervision_chain: Vec<String>,
    pub input_chain: Vec<String>,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            beta_m: 2.0,
            supervision_sweeps_before: 3,
            supervision_sweeps_after: 3,
            input_sweeps_before: 3,
            future_tolerance_s: 1e-6,
            window_width_px: 8,
            window_height_px: 320,
            window_stride_px: 3,
            supervision_chain: vec![
                "clutter-removal".into(),
                "object-focus".into(),
                "duplicate-vertical".into(),
            ],
            input_chain: vec!["window-min-pool".into()],
        }
    }
}

/// Bilateral expansion of radar points into weak supervision regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    /// Range kernel width on [0,1] intensities.
    pub sigma_r: f64,
    /// Scale factor c applied to both adaptive spatial sigmas.
    pub sigma_scale_c: f64,
    /// Binarization threshold on the peak weight (strictly greater survives).
    pub gamma: f64,
    /// Lower clamp for the adaptive shrink factor s.
    pub min_shrink_s: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            sigma_r: 1e-5,
            sigma_scale_c: 1.5,
            gamma: 0.5,
            min_shrink_s: 1e-3,
        }
    }
}

/// How the radar loss normalizes its per-pixel sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadarNormalization {
    /// Divide by the number of supervised (masked) pixels.
    Masked,
    /// Divide by the total pixel count of the raster.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Balance between structural and absolute photometric terms.
    pub alpha: f64,
    pub lambda_smoothness: f64,
    pub lambda_velocity: f64,
    pub lambda_radar: f64,
    /// Decoder scales averaged by the photometric and smoothness terms.
    pub scales: u32,
    pub radar_normalization: RadarNormalization,
    /// Suppress pixels where the still-scene error beats the reconstruction.
    pub automask: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.85,
            lambda_smoothness: 1e-3,
            lambda_velocity: 0.02,
            lambda_radar: 0.2,
            scales: 4,
            radar_normalization: RadarNormalization::Masked,
            automask: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Ground-truth samples below this depth are excluded, meters.
    pub min_depth_m: f64,
    /// Evaluation ceiling; predictions are clamped to [min, max], meters.
    pub max_depth_m: f64,
    /// Rescale predictions by median(gt)/median(pred) before scoring.
    pub median_scaling: bool,
    /// Average per-frame metric rows instead of pooling all samples.
    pub per_frame_average: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            min_depth_m: 0.1,
            max_depth_m: 80.0,
            median_scaling: false,
            per_frame_average: false,
        }
    }
}

impl Config {
    /// Loads a TOML file and validates the result.
    pub fn load(path: &std::path::Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let config: Config = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source: Box::new(source),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError::Invalid(msg));
        let r = &self.radar;
        if !(r.beta_m.is_finite() && r.beta_m > 0.0) {
            return err(format!("radar.beta_m must be positive, got {}", r.beta_m));
        }
        if r.window_width_px == 0 || r.window_height_px == 0 || r.window_stride_px == 0 {
            return err("radar window dimensions and stride must be non-zero".into());
        }
        if !(r.future_tolerance_s.is_finite() && r.future_tolerance_s >= 0.0) {
            return err(format!(
                "radar.future_tolerance_s must be >= 0, got {}",
                r.future_tolerance_s
            ));
        }
        let a = &self.association;
        if !(a.sigma_r.is_finite() && a.sigma_r > 0.0) {
            return err(format!(
                "association.sigma_r must be positive, got {}",
                a.sigma_r
            ));
        }
        if !(a.sigma_scale_c.is_finite() && a.sigma_scale_c > 0.0) {
            return err(format!(
                "association.sigma_scale_c must be positive, got {}",
                a.sigma_scale_c
            ));
        }
        if !(a.gamma > 0.0 && a.gamma < 1.0) {
            return err(format!(
                "association.gamma must lie in (0, 1), got {}",
                a.gamma
            ));
        }
        if !(a.min_shrink_s.is_finite() && a.min_shrink_s > 0.0) {
            return err(format!(
                "association.min_shrink_s must be positive, got {}",
                a.min_shrink_s
            ));
        }
        let l = &self.loss;
        if !(0.0..=1.0).contains(&l.alpha) {
            return err(format!("loss.alpha must lie in [0, 1], got {}", l.alpha));
        }
        for (name, v) in [
            ("loss.lambda_smoothness", l.lambda_smoothness),
            ("loss.lambda_velocity", l.lambda_velocity),
            ("loss.lambda_radar", l.lambda_radar),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if l.scales == 0 {
            return err("loss.scales must be at least 1".into());
        }
        let m = &self.metrics;
        if !(m.min_depth_m.is_finite() && m.min_depth_m > 0.0) {
            return err(format!(
                "metrics.min_depth_m must be positive, got {}",
                m.min_depth_m
            ));
        }
        if !(m.max_depth_m.is_finite() && m.max_depth_m > m.min_depth_m) {
            return err(format!(
                "metrics.max_depth_m must exceed min_depth_m, got {} <= {}",
                m.max_depth_m, m.min_depth_m
            ));
        }
        Ok(())
    }
}
