//! Rotation-vector helpers.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// Rotation vector (axis times angle, angle in `[0, pi]`) of `q`.
pub fn log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    q.scaled_axis()
}

pub fn exp(r: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*r)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of the left Jacobian of SO(3).
///
/// For `R = exp(r)` and a small world-frame rotation `d`,
/// `log(exp(d) R) = r + jl_inv(r) d + O(|d|^2)`.
pub fn left_jacobian_inv(r: &Vector3<f64>) -> Matrix3<f64> {
    let theta = r.norm();
    let k = skew(r);
    let coeff = if theta < 1e-4 {
        // series of 1/t^2 - (1 + cos t) / (2 t sin t)
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - 0.5 * k + coeff * k * k
}
