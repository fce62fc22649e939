#pragma once

#include <Eigen/Dense>

#include "npswab/geometry.hpp"
#include "npswab/kinematics.hpp"
#include "npswab/perception.hpp"

namespace npswab {

/// Tuning knobs of the pose-based servo loop.
struct ControlParams {
  /// Proportional gain applied to the stacked pose error, in 1/s.
  double gain = 0.5;

  /// Per-joint speed limits in rad/s; must match the chain's joint count.
  Eigen::VectorXd joint_velocity_limits = Eigen::VectorXd::Constant(7, 1.0);

  /// Commanded camera speed caps. A violation rescales the whole twist so
  /// its direction is preserved and the binding norm sits exactly on the cap.
  double max_linear_speed = 0.15;    // m/s
  double max_angular_speed = 0.5;    // rad/s

  /// Error-dependent gain schedule: when enabled the effective gain decays
  /// smoothly from `gain_at_zero` (small errors) to `gain_at_infinity`
  /// (large errors), with initial slope `gain_slope` at zero error.
  /// Off by default: the fixed `gain` above is used.
  bool adaptive_gain = false;
  double gain_at_zero = 1.0;
  double gain_at_infinity = 0.1;
  double gain_slope = 2.0;

  /// Redundancy resolution: rate (1/s, per unit of normalized displacement
  /// from mid-range) at which joints are steered toward the middle of their
  /// position range through the task null space. Does not disturb the
  /// realized camera twist; zero disables centering.
  double null_space_gain = 0.2;

  static ControlParams defaults() { return ControlParams{}; }

  /// Throws ConfigError unless gain and every limit are positive.
  void validate() const;
};

/// One control tick's output.
struct ControlCommand {
  Twist camera_twist;             // camera-frame, possibly rescaled to caps
  Eigen::VectorXd joint_velocities;  // rad/s, possibly clamped per joint
  bool saturated = false;         // any cap or joint limit engaged
  bool near_singularity = false;  // smallest Jacobian singular value < 1e-4;
                                  // the returned command is heavily damped
};

/// Effective gain for a given error norm (equals `params.gain` unless the
/// adaptive schedule is enabled).
double effective_gain(double error_norm, const ControlParams& params);

/// 6x6 block-diagonal matrix coupling the camera twist to the rate of the
/// stacked pose error (translation block = the rotation error itself, rotation
/// block = the Jacobian of the axis-angle error coordinates). Invertible for
/// error angles below pi; the angle->0 limit is handled by series expansion.
Matrix6d interaction_matrix(const Matrix3d& rotation_error);

/// Proportional law v = gain * L^+ * s for the stacked error
/// s = (translation error, axis-angle of the rotation error), then uniform
/// rescaling onto the twist caps. `saturated`, if given, reports whether the
/// caps engaged.
Twist camera_twist(const RelativeTarget& error, const ControlParams& params,
                   bool* saturated = nullptr);

/// Maps a desired camera-frame twist to joint velocities through the damped
/// pseudo-inverse of the camera-frame Jacobian, then clamps each joint to its
/// speed limit. Near a singularity (smallest singular value < 1e-4) the
/// inversion is re-damped and the command flagged rather than rejected.
ControlCommand joint_command(const KinematicChain& chain,
                             const Eigen::VectorXd& q, const Twist& desired,
                             const ControlParams& params);

}  // namespace npswab
