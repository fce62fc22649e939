#pragma once

#include <Eigen/Core>
#include <optional>

#include "npswab/geometry.hpp"
#include "npswab/scene.hpp"

namespace npswab {

/// Result of decoding one face observation.
struct DecodedFacePose {
  Matrix3d rotation = Matrix3d::Identity();  // face frame in camera frame
  Vector3d nostril = Vector3d::Zero();       // metres, camera frame
  bool valid = false;
};

/// Swab keypoints recovered by ray fitting, camera frame.
struct SwabPose {
  Vector3d tip = Vector3d::Zero();
  Vector3d shaft = Vector3d::Zero();
  Vector3d direction = Vector3d::Zero();  // (tip - shaft) normalized
};

/// Pose error the controller should null, tagged with the stage that
/// produced it.
struct RelativeTarget {
  Vector3d translation = Vector3d::Zero();   // metres
  Matrix3d rotation = Matrix3d::Identity();  // applied to the control frame
  int stage = 2;                             // 2 or 3
};

/// Insertion direction at the nostril, face frame: into the face (-z),
/// pitched up by `pitch` radians about the lateral axis.
Vector3d nostril_normal_local(double pitch = 0.2);

/// Desired camera orientation expressed in the face frame: optical axis
/// along the nostril normal, image-down along the face's down axis.
Matrix3d desired_face_alignment(double pitch = 0.2);

/// Extracts the face rotation from the measured weak-projection matrix:
/// nearest rotation of the left 3x3 block, then removal of the apparent
/// rotation induced by the sight line to the face center `p`.
/// Throws DegenerateProjection when the block is rank deficient or the
/// center sits at/behind the camera plane.
Matrix3d recover_rotation(const Eigen::Matrix<double, 3, 4>& P_measured,
                          const Vector3d& p);

/// Lifts a pixel with a depth sample into the camera frame (metres).
/// Throws MissingDepth when the depth sample is absent or nonpositive.
Vector3d backproject_nostril(const Matrix3d& K, const Eigen::Vector2d& pixel,
                             const std::optional<double>& depth);

/// Places each schematic keypoint onto its observed pixel ray at the
/// closest point (independent closed-form least squares per ray).
/// Throws IllConditionedRay when a ray is more than 45 degrees away from
/// its schematic point or the fitted keypoints coincide.
SwabPose fit_swab(const SwabObservation& obs, const Matrix3d& K);

/// Camera-frame error that moves the camera to the standoff point in
/// front of the nostril, facing along the nostril normal.
RelativeTarget relative_target_stage2(const DecodedFacePose& decoded,
                                      double camera_standoff = 0.30,
                                      double desired_pitch = 0.2);

/// Camera-frame error that moves the swab tip onto the nostril and aligns
/// the swab direction with the nostril normal (two rotational DOF only).
/// Propagates AntiparallelVectors from the minimal-rotation construction.
RelativeTarget relative_target_stage3(const DecodedFacePose& decoded,
                                      const SwabPose& swab,
                                      double desired_pitch = 0.2);

/// Full decode of one face observation. Returns an invalid pose when the
/// observation was dropped or carries no depth sample; other decoding
/// failures propagate as exceptions.
DecodedFacePose decode_face(const FaceObservation& obs, const Matrix3d& K);

/// One-frame quality gate: rejects a decoded rotation that jumps more than
/// `threshold` radians from the last accepted one.
class OutlierGate {
 public:
  explicit OutlierGate(double threshold = 0.5) : threshold_(threshold) {}

  /// True when the rotation is accepted (and stored as the new reference).
  bool accept(const Matrix3d& rotation);

  void reset() { has_reference_ = false; }

 private:
  double threshold_;
  bool has_reference_ = false;
  Matrix3d reference_ = Matrix3d::Identity();
};

}  // namespace npswab
