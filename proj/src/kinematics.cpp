#include "npswab/kinematics.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "npswab/config.hpp"
#include "npswab/errors.hpp"

namespace npswab {

const char* to_string(IkStatus status) {
  switch (status) {
    case IkStatus::Ok:
      return "ok";
    case IkStatus::JointLimitHit:
      return "joint_limit_hit";
    case IkStatus::SelfCollision:
      return "self_collision";
    case IkStatus::MaxItersExceeded:
      return "max_iters_exceeded";
  }
  return "unknown";
}

double segment_segment_distance(const Eigen::Vector3d& p1,
                                const Eigen::Vector3d& q1,
                                const Eigen::Vector3d& p2,
                                const Eigen::Vector3d& q2) {
  // Closest points via the clamped quadratic (Ericson, ch. 5.1.9).
  const Eigen::Vector3d d1 = q1 - p1;
  const Eigen::Vector3d d2 = q2 - p2;
  const Eigen::Vector3d r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  constexpr double kEps = 1e-18;

  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) {
    // Both segments degenerate to points.
    return r.norm();
  }
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > kEps) {
        s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      }
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return (p1 + s * d1 - (p2 + t * d2)).norm();
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& J, double damping) {
  const double mu = damping * damping;
  if (J.rows() <= J.cols()) {
    Eigen::MatrixXd gram = J * J.transpose();
    gram.diagonal().array() += mu;
    return J.transpose() * gram.ldlt().solve(
        Eigen::MatrixXd::Identity(J.rows(), J.rows()));
  }
  Eigen::MatrixXd gram = J.transpose() * J;
  gram.diagonal().array() += mu;
  return gram.ldlt().solve(Eigen::MatrixXd::Identity(J.cols(), J.cols())) *
         J.transpose();
}

KinematicChain::KinematicChain(std::vector<JointParams> joints,
                               Eigen::Vector3d flange_offset,
                               Pose camera_extrinsic,
                               Eigen::Vector3d swab_tip,
                               Eigen::Vector3d swab_shaft,
                               std::vector<Capsule> capsules)
    : joints_(std::move(joints)),
      flange_offset_(std::move(flange_offset)),
      camera_extrinsic_(std::move(camera_extrinsic)),
      swab_tip_(std::move(swab_tip)),
      swab_shaft_(std::move(swab_shaft)),
      capsules_(std::move(capsules)) {
  if (joints_.empty()) {
    throw ConfigError("chain needs at least one joint");
  }
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    JointParams& j = joints_[i];
    const double norm = j.axis.norm();
    if (norm < 1e-9) {
      throw ConfigError("joint " + std::to_string(i + 1) +
                        ": axis is (near) zero");
    }
    j.axis /= norm;
    if (!(j.lower < j.upper)) {
      throw ConfigError("joint " + std::to_string(i + 1) +
                        ": lower limit must be below upper limit");
    }
  }
  if (!is_rotation(camera_extrinsic_.rotation)) {
    throw ConfigError("camera extrinsic rotation is not orthonormal");
  }
  if ((swab_tip_ - swab_shaft_).norm() < 1e-9) {
    throw ConfigError("swab tip and shaft coincide; axis undefined");
  }
  for (std::size_t i = 0; i < capsules_.size(); ++i) {
    const Capsule& c = capsules_[i];
    if (c.link < 0 || c.link > dof()) {
      throw ConfigError("capsule " + std::to_string(i + 1) +
                        ": link index out of range");
    }
    if (!(c.radius > 0.0)) {
      throw ConfigError("capsule " + std::to_string(i + 1) +
                        ": radius must be positive");
    }
  }
}

KinematicChain KinematicChain::reference_chain() {
  const double kYaw = 2.97;    // limit for the axial (z) joints
  const double kPitch1 = 2.0;  // shoulder pitch
  const double kPitch = 2.2;   // elbow / wrist pitch
  std::vector<JointParams> joints = {
      {{0.0, 0.0, 1.25}, Eigen::Vector3d::UnitZ(), -kYaw, kYaw},
      {{0.0, 0.0, 0.10}, Eigen::Vector3d::UnitY(), -kPitch1, kPitch1},
      {{0.0, 0.0, 0.21}, Eigen::Vector3d::UnitZ(), -kYaw, kYaw},
      {{0.0, 0.0, 0.21}, Eigen::Vector3d::UnitY(), -kPitch, kPitch},
      {{0.0, 0.0, 0.22}, Eigen::Vector3d::UnitZ(), -kYaw, kYaw},
      {{0.0, 0.0, 0.22}, Eigen::Vector3d::UnitY(), -kPitch, kPitch},
      {{0.0, 0.0, 0.10}, Eigen::Vector3d::UnitZ(), -kYaw, kYaw},
  };
  Pose camera{Eigen::Vector3d(0.05, 0.0, 0.03),
              exp_so3(Eigen::Vector3d(0.05, 0.0, 0.0))};
  std::vector<Capsule> capsules = {
      {0, {0, 0, 0.02}, {0, 0, 1.17}, 0.060},
      {1, {0, 0, 0.02}, {0, 0, 0.08}, 0.055},
      {2, {0, 0, 0.02}, {0, 0, 0.19}, 0.050},
      {3, {0, 0, 0.02}, {0, 0, 0.19}, 0.050},
      {4, {0, 0, 0.02}, {0, 0, 0.20}, 0.045},
      {5, {0, 0, 0.02}, {0, 0, 0.20}, 0.045},
      {6, {0, 0, 0.02}, {0, 0, 0.14}, 0.040},
      {7, {0, 0, 0.00}, {0, 0, 0.21}, 0.035},
  };
  return KinematicChain(std::move(joints), Eigen::Vector3d(0.0, 0.0, 0.06),
                        camera, Eigen::Vector3d(0.0, 0.03, 0.20),
                        Eigen::Vector3d(0.0, 0.03, 0.13), std::move(capsules));
}

KinematicChain KinematicChain::from_file(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  const int n_joints = kv.get_int("joints");
  if (n_joints != 7) {
    throw ConfigError(kv.name() + ": expected a 7-joint chain, got " +
                      std::to_string(n_joints));
  }
  std::vector<JointParams> joints;
  for (int i = 1; i <= n_joints; ++i) {
    const std::string prefix = "joint" + std::to_string(i) + ".";
    JointParams j;
    j.offset = kv.get_vec3(prefix + "offset");
    j.axis = kv.get_vec3(prefix + "axis");
    const std::vector<double> limits = kv.get_doubles(prefix + "limits", 2);
    j.lower = limits[0];
    j.upper = limits[1];
    joints.push_back(j);
  }
  const Eigen::Vector3d flange = kv.get_vec3("flange.offset");
  Pose camera{kv.get_vec3("camera.translation"),
              exp_so3(kv.get_vec3_or("camera.rotation",
                                     Eigen::Vector3d::Zero()))};
  const Eigen::Vector3d swab_tip = kv.get_vec3("swab.tip");
  const Eigen::Vector3d swab_shaft = kv.get_vec3("swab.shaft");
  const int n_capsules = kv.get_int_or("capsules", 0);
  std::vector<Capsule> capsules;
  for (int i = 1; i <= n_capsules; ++i) {
    const std::string prefix = "capsule" + std::to_string(i) + ".";
    Capsule c;
    c.link = kv.get_int(prefix + "link");
    c.a = kv.get_vec3(prefix + "a");
    c.b = kv.get_vec3(prefix + "b");
    c.radius = kv.get_double(prefix + "radius");
    capsules.push_back(c);
  }
  kv.check_all_consumed();
  return KinematicChain(std::move(joints), flange, camera, swab_tip,
                        swab_shaft, std::move(capsules));
}

Eigen::VectorXd KinematicChain::lower_limits() const {
  Eigen::VectorXd lo(dof());
  for (int i = 0; i < dof(); ++i) {
    lo[i] = joints_[i].lower;
  }
  return lo;
}

Eigen::VectorXd KinematicChain::upper_limits() const {
  Eigen::VectorXd hi(dof());
  for (int i = 0; i < dof(); ++i) {
    hi[i] = joints_[i].upper;
  }
  return hi;
}

Eigen::VectorXd KinematicChain::clamp_to_limits(const Eigen::VectorXd& q) const {
  require_dof(q);
  Eigen::VectorXd out = q;
  for (int i = 0; i < dof(); ++i) {
    out[i] = std::clamp(out[i], joints_[i].lower, joints_[i].upper);
  }
  return out;
}

bool KinematicChain::within_limits(const Eigen::VectorXd& q,
                                   double margin) const {
  require_dof(q);
  for (int i = 0; i < dof(); ++i) {
    if (q[i] < joints_[i].lower + margin || q[i] > joints_[i].upper - margin) {
      return false;
    }
  }
  return true;
}

void KinematicChain::require_dof(const Eigen::VectorXd& q) const {
  if (q.size() != dof()) {
    throw DimensionMismatch("joint vector has " + std::to_string(q.size()) +
                            " entries, chain has " + std::to_string(dof()));
  }
}

std::vector<Pose> KinematicChain::link_frames(const Eigen::VectorXd& q) const {
  require_dof(q);
  std::vector<Pose> frames;
  frames.reserve(joints_.size() + 1);
  frames.push_back(Pose::identity());
  for (int i = 0; i < dof(); ++i) {
    const Pose& parent = frames.back();
    Pose frame;
    frame.position = parent.position + parent.rotation * joints_[i].offset;
    frame.rotation = parent.rotation * exp_so3(joints_[i].axis * q[i]);
    frames.push_back(frame);
  }
  return frames;
}

Pose KinematicChain::forward_kinematics(const Eigen::VectorXd& q) const {
  const std::vector<Pose> frames = link_frames(q);
  const Pose& last = frames.back();
  return {last.position + last.rotation * flange_offset_, last.rotation};
}

Pose KinematicChain::camera_pose(const Eigen::VectorXd& q) const {
  return forward_kinematics(q) * camera_extrinsic_;
}

Eigen::Vector3d KinematicChain::swab_tip_position(const Eigen::VectorXd& q,
                                                  double extension) const {
  const Eigen::Vector3d axis_local = (swab_tip_ - swab_shaft_).normalized();
  return forward_kinematics(q).act(swab_tip_ + extension * axis_local);
}

Eigen::Vector3d KinematicChain::swab_shaft_position(
    const Eigen::VectorXd& q) const {
  return forward_kinematics(q).act(swab_shaft_);
}

Eigen::Vector3d KinematicChain::swab_axis(const Eigen::VectorXd& q) const {
  return (forward_kinematics(q).rotation *
          (swab_tip_ - swab_shaft_).normalized());
}

Eigen::Matrix<double, 6, Eigen::Dynamic> KinematicChain::jacobian(
    const Eigen::VectorXd& q) const {
  return jacobian_at_point(q, forward_kinematics(q).position);
}

Eigen::Matrix<double, 6, Eigen::Dynamic> KinematicChain::jacobian_at_point(
    const Eigen::VectorXd& q, const Eigen::Vector3d& point_world) const {
  const std::vector<Pose> frames = link_frames(q);
  Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, dof());
  for (int i = 0; i < dof(); ++i) {
    // Joint i rotates about its own axis, so the axis reads the same in
    // frame i-1 and frame i; frame i also carries the joint origin.
    const Eigen::Vector3d z = frames[i + 1].rotation * joints_[i].axis;
    const Eigen::Vector3d p = frames[i + 1].position;
    J.template block<3, 1>(0, i) = z.cross(point_world - p);
    J.template block<3, 1>(3, i) = z;
  }
  return J;
}

std::optional<std::pair<int, int>> KinematicChain::check_self_collision(
    const Eigen::VectorXd& q) const {
  const std::vector<Pose> frames = link_frames(q);
  std::vector<Eigen::Vector3d> a_world(capsules_.size());
  std::vector<Eigen::Vector3d> b_world(capsules_.size());
  for (std::size_t i = 0; i < capsules_.size(); ++i) {
    const Pose& f = frames[static_cast<std::size_t>(capsules_[i].link)];
    a_world[i] = f.act(capsules_[i].a);
    b_world[i] = f.act(capsules_[i].b);
  }
  for (std::size_t i = 0; i < capsules_.size(); ++i) {
    for (std::size_t j = i + 2; j < capsules_.size(); ++j) {
      const double dist = segment_segment_distance(a_world[i], b_world[i],
                                                   a_world[j], b_world[j]);
      if (dist < capsules_[i].radius + capsules_[j].radius) {
        return std::make_pair(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return std::nullopt;
}

IkResult KinematicChain::solve_ik(const Pose& target,
                                  const Eigen::VectorXd& q0,
                                  const IkOptions& opts) const {
  require_dof(q0);
  IkResult result;
  result.q = clamp_to_limits(q0);
  if (opts.record_path) {
    result.path.push_back(result.q);
  }

  auto errors_at = [&](const Eigen::VectorXd& q) {
    const Vector6d err = inverse_retract(target, forward_kinematics(q));
    return err;
  };

  if (opts.check_collisions) {
    if (check_self_collision(result.q)) {
      result.status = IkStatus::SelfCollision;
      const Vector6d err = errors_at(result.q);
      result.position_error = err.head<3>().norm();
      result.rotation_error = err.tail<3>().norm();
      return result;
    }
  }

  bool clamped_last_step = false;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const Vector6d err = errors_at(result.q);
    result.position_error = err.head<3>().norm();
    result.rotation_error = err.tail<3>().norm();
    result.iterations = iter;
    if (result.position_error <= opts.tol_pos &&
        result.rotation_error <= opts.tol_rot) {
      if (opts.check_collisions && check_self_collision(result.q)) {
        result.status = IkStatus::SelfCollision;
      } else {
        result.status = IkStatus::Ok;
      }
      return result;
    }

    const Eigen::MatrixXd J = jacobian(result.q);
    const Eigen::VectorXd step =
        pseudo_inverse(J, opts.damping) * (opts.gain * err);
    const Eigen::VectorXd q_next = clamp_to_limits(result.q + step);
    const double applied = (q_next - result.q).norm();
    clamped_last_step = (q_next - (result.q + step)).norm() > 1e-12;
    result.q = q_next;
    if (opts.record_path) {
      result.path.push_back(result.q);
    }
    if (applied < 1e-12) {
      // No progress possible: either pinned against limits or the residual
      // lies outside the Jacobian's range space (unreachable target).
      break;
    }
  }

  const Vector6d err = errors_at(result.q);
  result.position_error = err.head<3>().norm();
  result.rotation_error = err.tail<3>().norm();
  if (result.position_error <= opts.tol_pos &&
      result.rotation_error <= opts.tol_rot) {
    if (opts.check_collisions && check_self_collision(result.q)) {
      result.status = IkStatus::SelfCollision;
    } else {
      result.status = IkStatus::Ok;
    }
    return result;
  }
  if (opts.check_collisions && check_self_collision(result.q)) {
    result.status = IkStatus::SelfCollision;
    return result;
  }
  bool at_limit = false;
  for (int i = 0; i < dof(); ++i) {
    if (result.q[i] <= joints_[i].lower + 1e-12 ||
        result.q[i] >= joints_[i].upper - 1e-12) {
      at_limit = true;
      break;
    }
  }
  result.status = (clamped_last_step && at_limit) ? IkStatus::JointLimitHit
                                                  : IkStatus::MaxItersExceeded;
  return result;
}

}  // namespace npswab
