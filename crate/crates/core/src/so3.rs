//! Rotation primitives on SO(3).
//!
//! Rotations are plain 3x3 matrices checked against the group invariants at
//! construction. Rotation vectors (axis times angle) live in the tangent
//! space and are connected to rotations by the Rodrigues exponential and its
//! inverse, the logarithm.
//!
//! Angles are computed with `atan2(sin, cos)` where both parts are available,
//! which stays accurate near `0` and `π` where `acos` of the trace loses about
//! half of the significant digits.

use core::f64::consts::PI;
use core::ops::Mul;

use nalgebra::{linalg::SVD, Matrix3, Vector3};

use crate::error::{Error, Result};

/// An arbitrary 3x3 real matrix.
pub type Mat3 = Matrix3<f64>;
/// A real 3-vector.
pub type Vec3 = Vector3<f64>;

/// Below this angle the Rodrigues coefficients switch to their series limits
/// and the logarithm returns the zero vector.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Distance from `π` below which the logarithm recovers the axis from the
/// symmetric part of the rotation.
pub const NEAR_PI: f64 = 1e-6;
/// Frobenius tolerance on `RᵀR - I` and on `det(R) - 1`.
pub const ROTATION_TOL: f64 = 1e-9;
/// Tolerance on `|S + Sᵀ|_F` accepted by [`vee`].
pub const SKEW_TOL: f64 = 1e-6;
/// Smallest singular value accepted by [`project_to_so3`].
pub const RANK_TOL: f64 = 1e-12;

/// A 3x3 special orthogonal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Wraps `m` after checking `mᵀm = I` and `det(m) = 1` within [`ROTATION_TOL`].
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let orthogonality = orthogonality_error(&m);
        let det = m.determinant();
        if !(orthogonality <= ROTATION_TOL) || !((det - 1.0).abs() <= ROTATION_TOL) {
            return Err(Error::NotRotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without checking. The caller guarantees `m ∈ SO(3)`.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    /// Builds a rotation from its rows, row-major.
    pub fn from_row_slice(values: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Mat3::from_row_slice(values))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    /// Row-major entries.
    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    /// The inverse rotation.
    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn is_valid(&self) -> bool {
        orthogonality_error(&self.0) <= ROTATION_TOL
            && (self.0.determinant() - 1.0).abs() <= ROTATION_TOL
    }

    pub fn rotate(&self, p: &Vec3) -> Vec3 {
        self.0 * p
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// `|mᵀm - I|_F`.
pub fn orthogonality_error(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Axis-angle vector `θ·v̂` with the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationVector(Vec3);

impl RotationVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vec3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vec3::zeros())
    }

    pub fn from_vector(v: Vec3) -> Self {
        Self(v)
    }

    pub fn as_vector(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }

    /// Rotation angle `‖v‖`.
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    /// Unit axis, or `None` for the zero vector.
    pub fn axis(&self) -> Option<Vec3> {
        let theta = self.angle();
        (theta > 0.0).then(|| self.0 / theta)
    }
}

/// Cross-product matrix: `hat(v) * w == v × w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. The symmetric part of `s` is discarded once the
/// skew-symmetry check passes.
pub fn vee(s: &Mat3) -> Result<Vec3> {
    let asym = (s + s.transpose()).norm();
    if !(asym <= SKEW_TOL) {
        return Err(Error::NotSkewSymmetric(asym));
    }
    Ok(skew_part_vee(s))
}

// vee of (s - sᵀ)/2, no check.
fn skew_part_vee(s: &Mat3) -> Vec3 {
    Vec3::new(
        s[(2, 1)] - s[(1, 2)],
        s[(0, 2)] - s[(2, 0)],
        s[(1, 0)] - s[(0, 1)],
    ) * 0.5
}

/// Rodrigues formula.
pub fn exp_map(v: &RotationVector) -> Rotation {
    let theta = v.angle();
    let k = hat(v.as_vector());
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0, 0.5)
    } else {
        // (1 - cos θ) / θ² written as 2 sin²(θ/2) / θ² to avoid cancellation.
        let half = libm::sin(theta / 2.0) / theta;
        (libm::sin(theta) / theta, 2.0 * half * half)
    };
    Rotation(Mat3::identity() + k * a + k * k * b)
}

/// Angle of `r` and its (unscaled) skew part `(R - Rᵀ)∨ / 2 = sin θ · v̂`.
fn angle_and_skew(m: &Mat3) -> (f64, Vec3) {
    let cos_theta = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = skew_part_vee(m);
    (libm::atan2(skew.norm(), cos_theta), skew)
}

/// Inverse of [`exp_map`], with `‖v‖ ∈ [0, π]`.
///
/// Near `π` the usual `θ / (2 sin θ)` scaling is singular; the axis is then
/// read from the rank-one part of the symmetrised `(R + I)/2`, and its sign is
/// taken from the residual skew part when that is still measurable. At `θ = π`
/// exactly the representative whose first nonzero component is positive is
/// returned.
pub fn log_map(r: &Rotation) -> RotationVector {
    let m = r.matrix();
    let (theta, skew) = angle_and_skew(m);
    if theta < SMALL_ANGLE {
        return RotationVector::zero();
    }
    if PI - theta >= NEAR_PI {
        return RotationVector(skew * (theta / libm::sin(theta)));
    }

    // (R + Rᵀ)/2 = cos θ I + (1 - cos θ) v̂v̂ᵀ
    let cos_theta = libm::cos(theta);
    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Mat3::identity() * cos_theta) / (1.0 - cos_theta);
    let k = (0..3)
        .max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)]))
        .unwrap_or(0);
    let mut axis = outer.column(k).into_owned();
    let n = axis.norm();
    axis /= n;

    if skew.norm() > 1e-10 {
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
    } else if let Some(first) = axis.iter().copied().find(|c| c.abs() > 1e-12) {
        if first < 0.0 {
            axis = -axis;
        }
    }
    RotationVector(axis * theta)
}

/// Rotation angle of `r1 r2ᵀ`, in `[0, π]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    let rel = r1.matrix() * r2.matrix().transpose();
    angle_and_skew(&rel).0
}

/// `‖r1 - r2‖_F`.
pub fn chordal_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    (r1.matrix() - r2.matrix()).norm()
}

/// Chordal distance corresponding to a geodesic angle: `2√2 sin(θ/2)`.
pub fn chordal_from_geodesic(theta: f64) -> f64 {
    2.0 * core::f64::consts::SQRT_2 * libm::sin(theta / 2.0)
}

/// Geodesic angle corresponding to a chordal distance in `[0, 2√2]`.
pub fn geodesic_from_chordal(d: f64) -> f64 {
    2.0 * libm::asin((d / (2.0 * core::f64::consts::SQRT_2)).clamp(0.0, 1.0))
}

/// Frobenius-closest rotation to `m`: `U diag(1, 1, sign det(UVᵀ)) Vᵀ`.
pub fn project_to_so3(m: &Mat3) -> Result<Rotation> {
    let (rotation, singular) = project_svd(m);
    if !(singular[2] > RANK_TOL) {
        return Err(Error::DegenerateMatrix(singular[2]));
    }
    Ok(rotation)
}

/// Projection that only needs rank two, as for the cross-covariance of a
/// centred triangle. The second singular value must exceed `rel_tol` times
/// the first.
pub(crate) fn project_rank2(m: &Mat3, rel_tol: f64) -> Result<Rotation> {
    let (rotation, singular) = project_svd(m);
    if !(singular[1] > rel_tol * singular[0]) {
        return Err(Error::DegenerateMatrix(singular[1]));
    }
    Ok(rotation)
}

fn project_svd(m: &Mat3) -> (Rotation, Vec3) {
    let svd = SVD::new(*m, true, true);
    // Both factors were requested above.
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("Vᵀ requested");
    let sign = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let w = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, sign));
    (Rotation(u * w * v_t), svd.singular_values)
}
