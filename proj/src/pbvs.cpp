#include "npswab/pbvs.hpp"

#include <algorithm>
#include <cmath>

#include "npswab/errors.hpp"

namespace npswab {
namespace {

// Coefficient of the squared cross-product term in the rotation block,
// (1 - sinc(t) / sinc^2(t/2)) / t^2, with the removable singularity at t = 0
// bridged by its series 1/12 + t^2/720 + O(t^4). The closed form loses all
// significant digits for tiny t (it subtracts two numbers near 1), so the
// series takes over below 1e-4 where its truncation error is ~1e-19.
double rotation_block_coefficient(double angle) {
  if (std::abs(angle) < 1e-4) {
    return 1.0 / 12.0 + angle * angle / 720.0;
  }
  const double sinc = std::sin(angle) / angle;
  const double half_sinc = std::sin(angle / 2.0) / (angle / 2.0);
  return (1.0 - sinc / (half_sinc * half_sinc)) / (angle * angle);
}

}  // namespace

void ControlParams::validate() const {
  if (!(gain > 0.0)) throw ConfigError("control gain must be positive");
  if (joint_velocity_limits.size() == 0 ||
      !(joint_velocity_limits.minCoeff() > 0.0)) {
    throw ConfigError("joint velocity limits must be positive");
  }
  if (!(max_linear_speed > 0.0) || !(max_angular_speed > 0.0)) {
    throw ConfigError("twist caps must be positive");
  }
  if (adaptive_gain) {
    if (!(gain_at_zero > gain_at_infinity) || !(gain_at_infinity > 0.0) ||
        !(gain_slope > 0.0)) {
      throw ConfigError(
          "adaptive gain needs gain_at_zero > gain_at_infinity > 0 and a "
          "positive slope");
    }
  }
  if (null_space_gain < 0.0) {
    throw ConfigError("null-space gain must be non-negative");
  }
}

double effective_gain(double error_norm, const ControlParams& params) {
  if (!params.adaptive_gain) return params.gain;
  const double span = params.gain_at_zero - params.gain_at_infinity;
  return span * std::exp(-params.gain_slope * error_norm / span) +
         params.gain_at_infinity;
}

Matrix6d interaction_matrix(const Matrix3d& rotation_error) {
  const Vector3d w = log_so3(rotation_error);
  const Matrix3d wx = skew(w);
  const Matrix3d rotation_block = Matrix3d::Identity() - 0.5 * wx +
                                  rotation_block_coefficient(w.norm()) * wx *
                                      wx;
  Matrix6d L = Matrix6d::Zero();
  L.topLeftCorner<3, 3>() = rotation_error;
  L.bottomRightCorner<3, 3>() = rotation_block;
  return L;
}

Twist camera_twist(const RelativeTarget& error, const ControlParams& params,
                   bool* saturated) {
  params.validate();
  const Vector3d w = log_so3(error.rotation);
  const Matrix6d L = interaction_matrix(error.rotation);

  Vector6d s;
  s << error.translation, w;
  const double gain = effective_gain(s.norm(), params);

  Twist twist;
  // The translation block is orthogonal, so its pseudo-inverse is the
  // transpose; the rotation block is invertible for angles below pi.
  twist.linear = gain * L.topLeftCorner<3, 3>().transpose() * error.translation;
  twist.angular =
      gain * L.bottomRightCorner<3, 3>().partialPivLu().solve(w).eval();

  double scale = 1.0;
  const double linear_norm = twist.linear.norm();
  const double angular_norm = twist.angular.norm();
  if (linear_norm > params.max_linear_speed) {
    scale = std::min(scale, params.max_linear_speed / linear_norm);
  }
  if (angular_norm > params.max_angular_speed) {
    scale = std::min(scale, params.max_angular_speed / angular_norm);
  }
  if (scale < 1.0) {
    twist.linear *= scale;
    twist.angular *= scale;
  }
  if (saturated != nullptr) *saturated = scale < 1.0;
  return twist;
}

ControlCommand joint_command(const KinematicChain& chain,
                             const Eigen::VectorXd& q, const Twist& desired,
                             const ControlParams& params) {
  params.validate();
  if (params.joint_velocity_limits.size() != chain.dof()) {
    throw DimensionMismatch("joint velocity limits do not match joint count");
  }

  const Pose camera = chain.camera_pose(q);
  Eigen::Matrix<double, 6, Eigen::Dynamic> J =
      chain.jacobian_at_point(q, camera.position);
  // Express both velocity rows in the camera frame, matching the twist.
  J.topRows<3>() = camera.rotation.transpose() * J.topRows<3>();
  J.bottomRows<3>() = camera.rotation.transpose() * J.bottomRows<3>();

  ControlCommand command;
  command.camera_twist = desired;

  // Least-squares rate resolution with two layers of position-limit
  // handling. A centering term projected through the task null space steers
  // the redundant degree of freedom away from the limits without disturbing
  // the realized twist; if a joint still presses into a limit its rate is
  // pinned to the (inward-pointing) centering rate, its task contribution is
  // moved to the right-hand side, and the remaining joints are re-solved, so
  // the commanded twist is still realized while the joint backs off the
  // limit instead of silently fighting the clamp.
  const Eigen::VectorXd lower = chain.lower_limits();
  const Eigen::VectorXd upper = chain.upper_limits();
  Eigen::VectorXd centering(chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    const double mid = 0.5 * (lower(i) + upper(i));
    const double half = 0.5 * (upper(i) - lower(i));
    centering(i) = params.null_space_gain * (mid - q(i)) / half;
  }

  constexpr double kLimitEps = 1e-9;
  std::vector<bool> locked(static_cast<size_t>(chain.dof()), false);
  Eigen::VectorXd pinned_rate = Eigen::VectorXd::Zero(chain.dof());
  Eigen::MatrixXd J_active = J;
  for (int pass = 0; pass <= chain.dof(); ++pass) {
    Vector6d residual = desired.as_vector();
    for (int i = 0; i < chain.dof(); ++i) {
      if (locked[i]) residual -= J.col(i) * pinned_rate(i);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J_active);
    const double sigma_min =
        svd.singularValues()(svd.singularValues().size() - 1);
    command.near_singularity = sigma_min < 1e-4;
    const double damping = command.near_singularity ? 1e-3 : 1e-6;
    const Eigen::MatrixXd pinv = pseudo_inverse(J_active, damping);
    command.joint_velocities =
        pinv * residual +
        (Eigen::MatrixXd::Identity(chain.dof(), chain.dof()) -
         pinv * J_active) *
            centering;

    bool changed = false;
    for (Eigen::Index i = 0; i < command.joint_velocities.size(); ++i) {
      if (locked[i]) {
        command.joint_velocities(i) = pinned_rate(i);
        continue;
      }
      const double v = command.joint_velocities(i);
      if ((q(i) >= upper(i) - kLimitEps && v > 0.0) ||
          (q(i) <= lower(i) + kLimitEps && v < 0.0)) {
        locked[i] = true;
        // Centering always points back toward mid-range, so pinning the
        // joint to it retreats from the limit (or holds still at gain 0).
        pinned_rate(i) = centering(i);
        J_active.col(i).setZero();
        changed = true;
      }
    }
    if (!changed) break;
  }

  for (Eigen::Index i = 0; i < command.joint_velocities.size(); ++i) {
    const double limit = params.joint_velocity_limits(i);
    if (std::abs(command.joint_velocities(i)) > limit) {
      command.joint_velocities(i) = std::copysign(limit, command.joint_velocities(i));
      command.saturated = true;
    }
  }
  return command;
}

}  // namespace npswab
