#include "npswab/perception.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "npswab/errors.hpp"

namespace npswab {

Vector3d nostril_normal_local(double pitch) {
  // Face frame: x lateral, y down, z out of the face. Insertion goes into
  // the face and slightly upward.
  return {0.0, -std::sin(pitch), -std::cos(pitch)};
}

Matrix3d desired_face_alignment(double pitch) {
  // Columns are the desired camera axes expressed in the face frame:
  // camera x (image right) flips against face x since they are facing each
  // other; camera z (optical axis) runs along the insertion direction.
  Matrix3d M;
  M.col(0) = Vector3d(-1.0, 0.0, 0.0);
  M.col(1) = Vector3d(0.0, std::cos(pitch), -std::sin(pitch));
  M.col(2) = nostril_normal_local(pitch);
  return M;
}

Matrix3d recover_rotation(const Eigen::Matrix<double, 3, 4>& P_measured,
                          const Vector3d& p) {
  if (!(p.z() > 0.0)) {
    throw DegenerateProjection("face center is not in front of the camera");
  }
  Matrix3d apparent;
  try {
    apparent = nearest_rotation(P_measured.leftCols<3>());
  } catch (const DegenerateMatrix&) {
    throw DegenerateProjection("projection matrix block is rank deficient");
  }
  const double phi_x = std::atan2(p.y(), p.z());
  const double phi_y = std::atan2(p.x(), p.z());
  return exp_so3(Vector3d(phi_x, phi_y, 0.0)).transpose() * apparent;
}

Vector3d backproject_nostril(const Matrix3d& K, const Eigen::Vector2d& pixel,
                             const std::optional<double>& depth) {
  if (!depth.has_value() || !(*depth > 0.0)) {
    throw MissingDepth("no usable depth sample at the nostril pixel");
  }
  const Vector3d homogeneous(pixel.x(), pixel.y(), 1.0);
  return K.inverse() * homogeneous * (*depth);
}

namespace {

Vector3d fit_point_on_ray(const Matrix3d& K_inv, const Eigen::Vector2d& pixel,
                          const Vector3d& schematic) {
  const Vector3d ray = K_inv * Vector3d(pixel.x(), pixel.y(), 1.0);
  const double schematic_norm = schematic.norm();
  if (schematic_norm < 1e-12) {
    throw IllConditionedRay("schematic keypoint sits at the camera center");
  }
  const double cosine = ray.dot(schematic) / (ray.norm() * schematic_norm);
  if (cosine < std::cos(M_PI / 4.0)) {
    throw IllConditionedRay(
        "observed ray is more than 45 degrees from the schematic keypoint");
  }
  const double lambda = ray.dot(schematic) / ray.squaredNorm();
  return lambda * ray;
}

}  // namespace

SwabPose fit_swab(const SwabObservation& obs, const Matrix3d& K) {
  const Matrix3d K_inv = K.inverse();
  SwabPose pose;
  pose.tip = fit_point_on_ray(K_inv, obs.tip_pixel, obs.tip_schematic);
  pose.shaft = fit_point_on_ray(K_inv, obs.shaft_pixel, obs.shaft_schematic);
  const Vector3d diff = pose.tip - pose.shaft;
  if (diff.norm() < 1e-9) {
    throw IllConditionedRay("fitted swab keypoints coincide");
  }
  pose.direction = diff / diff.norm();
  return pose;
}

RelativeTarget relative_target_stage2(const DecodedFacePose& decoded,
                                      double camera_standoff,
                                      double desired_pitch) {
  const Vector3d n_cam =
      decoded.rotation * nostril_normal_local(desired_pitch);
  RelativeTarget target;
  target.stage = 2;
  // Desired camera position sits `camera_standoff` metres out of the face
  // along the insertion axis; the camera itself is the origin here.
  target.translation = decoded.nostril - camera_standoff * n_cam;
  target.rotation = decoded.rotation * desired_face_alignment(desired_pitch);
  return target;
}

RelativeTarget relative_target_stage3(const DecodedFacePose& decoded,
                                      const SwabPose& swab,
                                      double desired_pitch) {
  const Vector3d n_cam =
      decoded.rotation * nostril_normal_local(desired_pitch);
  RelativeTarget target;
  target.stage = 3;
  target.translation = decoded.nostril - swab.tip;
  target.rotation = minimal_rotation(swab.direction, n_cam);
  return target;
}

DecodedFacePose decode_face(const FaceObservation& obs, const Matrix3d& K) {
  DecodedFacePose decoded;
  if (!obs.valid || !obs.nostril_depth.has_value()) {
    return decoded;
  }
  decoded.rotation = recover_rotation(obs.P, obs.center_estimate);
  decoded.nostril = backproject_nostril(K, obs.nostril_pixel,
                                        obs.nostril_depth);
  decoded.valid = true;
  return decoded;
}

bool OutlierGate::accept(const Matrix3d& rotation) {
  if (has_reference_) {
    const double jump = log_so3(reference_.transpose() * rotation).norm();
    if (jump > threshold_) {
      return false;
    }
  }
  reference_ = rotation;
  has_reference_ = true;
  return true;
}

}  // namespace npswab
