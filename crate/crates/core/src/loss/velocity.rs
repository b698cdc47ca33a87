//! Translation-magnitude supervision for the pose branch.

use nalgebra::Vector3;

/// Absolute difference between the estimated translation magnitude and the
/// measured one. Direction is deliberately unconstrained; only scale is
/// anchored, which is what breaks the scale ambiguity of monocular training.
pub fn velocity_loss(t_est: &Vector3<f64>, t_gt_norm: f64) -> f64 {
    (t_est.norm() - t_gt_norm).abs()
}

/// Gradient of [`velocity_loss`] with respect to the estimated translation:
/// `sign(‖t̂‖ - ‖t‖) · t̂ / ‖t̂‖`. Undefined at `t̂ = 0` and at equality;
/// callers avoid those kinks.
pub fn velocity_gradient(t_est: &Vector3<f64>, t_gt_norm: f64) -> Vector3<f64> {
    let norm = t_est.norm();
    assert!(
        norm > 0.0,
        "velocity gradient undefined at zero translation"
    );
    let sign = if norm > t_gt_norm { 1.0 } else { -1.0 };
    t_est * (sign / norm)
}
