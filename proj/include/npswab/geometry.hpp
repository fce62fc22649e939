#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "npswab/errors.hpp"

namespace npswab {

using Vector3d = Eigen::Vector3d;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix3d = Eigen::Matrix3d;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rigid transform: world-from-frame rotation plus frame origin.
struct Pose {
  Vector3d position = Vector3d::Zero();
  Matrix3d rotation = Matrix3d::Identity();

  static Pose identity() { return {}; }

  /// Composition: this * other (apply `other` in this frame).
  Pose operator*(const Pose& other) const {
    return {position + rotation * other.position, rotation * other.rotation};
  }

  Pose inverse() const {
    return {-(rotation.transpose() * position), rotation.transpose()};
  }

  /// Maps a point expressed in this frame into the parent frame.
  Vector3d act(const Vector3d& p) const { return position + rotation * p; }
};

/// Spatial velocity, split into linear and angular parts.
/// Throughout the library 6-vectors are ordered (translation, rotation).
struct Twist {
  Vector3d linear = Vector3d::Zero();
  Vector3d angular = Vector3d::Zero();

  Vector6d as_vector() const {
    Vector6d v;
    v << linear, angular;
    return v;
  }

  static Twist from_vector(const Vector6d& v) {
    return {v.head<3>(), v.tail<3>()};
  }
};

/// Cross-product matrix: skew(a) * b == a.cross(b).
Matrix3d skew(const Vector3d& v);

/// Inverse of skew for an (assumed) antisymmetric matrix.
Vector3d vee(const Matrix3d& m);

/// Rodrigues exponential of an axis-angle vector.
Matrix3d exp_so3(const Vector3d& w);

/// Axis-angle logarithm. Returns a vector of norm <= pi. Stable both near
/// the identity (series) and near angle pi (diagonal-dominant extraction).
Vector3d log_so3(const Matrix3d& R);

/// Rotation angle of R, in [0, pi].
double rotation_angle(const Matrix3d& R);

/// Orthogonal projection of a full-rank 3x3 matrix onto SO(3), i.e. the
/// rotation minimising the Frobenius distance to M. Mirror-degenerate inputs
/// (det < 0) are projected onto the nearest proper rotation.
/// Throws DegenerateMatrix when the smallest singular value is <= 1e-12.
Matrix3d nearest_rotation(const Matrix3d& M);

/// Smallest rotation mapping unit vector v onto unit vector n (axis is
/// v x n). Throws AntiparallelVectors when v . n <= -1 + 1e-6.
Matrix3d minimal_rotation(const Vector3d& v, const Vector3d& n);

/// Retraction: applies a 6-vector chart increment (translation, rotation) to
/// a pose. Inverse of inverse_retract at the same base pose.
Pose retract(const Pose& X, const Vector6d& xi);

/// Inverse retraction: chart coordinates of X around Xhat,
/// (p - phat, log(R * Rhat^T)). Throws BranchCut when the relative rotation
/// angle is >= pi - 1e-6.
Vector6d inverse_retract(const Pose& X, const Pose& Xhat);

/// True when columns are orthonormal with positive determinant (tol 1e-9).
bool is_rotation(const Matrix3d& R, double tol = 1e-9);

}  // namespace npswab
