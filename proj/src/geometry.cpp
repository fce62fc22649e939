#include "npswab/geometry.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace npswab {

Matrix3d skew(const Vector3d& v) {
  Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Vector3d vee(const Matrix3d& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

Matrix3d exp_so3(const Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Matrix3d K = skew(w);
  if (theta2 < 1e-16) {
    // Second-order series; truncation error ~ theta^3 / 6.
    return Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double theta = std::sqrt(theta2);
  return Matrix3d::Identity() + (std::sin(theta) / theta) * K +
         ((1.0 - std::cos(theta)) / theta2) * K * K;
}

namespace {

// atan2-based angle extraction: well conditioned over the whole [0, pi]
// range, unlike acos of the trace which loses ~8 digits near pi.
double angle_from(const Matrix3d& R) {
  const double cos_theta = (R.trace() - 1.0) * 0.5;
  const double sin_theta = vee((R - R.transpose()) * 0.5).norm();
  return std::atan2(sin_theta, cos_theta);
}

}  // namespace

Vector3d log_so3(const Matrix3d& R) {
  const double theta = angle_from(R);
  const double cos_theta =
      std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);

  if (theta < 1e-6) {
    // First-order: R ~ I + skew(w).
    return vee((R - R.transpose()) * 0.5);
  }

  if (theta > M_PI - 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part, anchoring signs on the dominant diagonal entry.
    const Matrix3d B =
        0.5 * (R + R.transpose()) - cos_theta * Matrix3d::Identity();
    int k = 0;
    B.diagonal().maxCoeff(&k);
    const double denom = 1.0 - cos_theta;
    Vector3d u;
    u[k] = std::sqrt(std::max(B(k, k) / denom, 0.0));
    for (int j = 0; j < 3; ++j) {
      if (j != k) u[j] = B(j, k) / (denom * u[k]);
    }
    u.normalize();
    // Orient the axis so it agrees with the (small) antisymmetric part.
    if (vee((R - R.transpose()) * 0.5).dot(u) < 0.0) u = -u;
    return theta * u;
  }

  return (theta / (2.0 * std::sin(theta))) * vee(R - R.transpose());
}

double rotation_angle(const Matrix3d& R) { return angle_from(R); }

Matrix3d nearest_rotation(const Matrix3d& M) {
  Eigen::JacobiSVD<Matrix3d> svd(
      M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() <= 1e-12) {
    throw DegenerateMatrix("nearest_rotation: matrix is rank deficient");
  }
  const Matrix3d U = svd.matrixU();
  const Matrix3d V = svd.matrixV();
  Vector3d d{1.0, 1.0, (U * V.transpose()).determinant()};
  return U * d.asDiagonal() * V.transpose();
}

Matrix3d minimal_rotation(const Vector3d& v, const Vector3d& n) {
  const double nv = v.norm();
  const double nn = n.norm();
  if (nv < 1e-12 || nn < 1e-12) {
    throw DegenerateMatrix("minimal_rotation: zero-length direction");
  }
  const Vector3d a = v / nv;
  const Vector3d b = n / nn;
  const double c = a.dot(b);
  if (c <= -1.0 + 1e-6) {
    throw AntiparallelVectors(
        "minimal_rotation: directions are anti-parallel");
  }
  const Matrix3d W = skew(a.cross(b));
  return Matrix3d::Identity() + W + W * W / (1.0 + c);
}

Pose retract(const Pose& X, const Vector6d& xi) {
  return {X.position + xi.head<3>(), exp_so3(xi.tail<3>()) * X.rotation};
}

Vector6d inverse_retract(const Pose& X, const Pose& Xhat) {
  const Matrix3d rel = X.rotation * Xhat.rotation.transpose();
  if (rotation_angle(rel) >= M_PI - 1e-6) {
    throw BranchCut("inverse_retract: relative rotation at the branch cut");
  }
  Vector6d xi;
  xi << X.position - Xhat.position, log_so3(rel);
  return xi;
}

bool is_rotation(const Matrix3d& R, double tol) {
  return (R.transpose() * R - Matrix3d::Identity()).cwiseAbs().maxCoeff() <
             tol &&
         R.determinant() > 0.0;
}

}  // namespace npswab
