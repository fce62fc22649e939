#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npswab/geometry.hpp"

namespace npswab {

/// One revolute joint: the joint frame is reached from the parent frame by a
/// fixed translation `offset`, then a rotation of the joint angle about
/// `axis` (unit vector in the parent frame).
struct JointParams {
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double lower = -3.14;
  double upper = 3.14;
};

/// Collision capsule: a segment [a, b] in the frame of `link` (0 = base,
/// i = frame after joint i), swept by `radius`.
struct Capsule {
  int link = 0;
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

enum class IkStatus { Ok, JointLimitHit, SelfCollision, MaxItersExceeded };

const char* to_string(IkStatus status);

struct IkOptions {
  int max_iters = 200;
  double tol_pos = 1e-4;   // metres
  double tol_rot = 1e-3;   // radians
  double gain = 0.8;       // fraction of the Newton step applied per iterate
  double damping = 1e-6;   // damped-least-squares regularizer
  bool check_collisions = true;
  bool record_path = false;
};

struct IkResult {
  IkStatus status = IkStatus::MaxItersExceeded;
  Eigen::VectorXd q;            // converged solution, or the failing iterate
  int iterations = 0;
  double position_error = 0.0;  // metres, at the returned q
  double rotation_error = 0.0;  // radians, at the returned q
  std::vector<Eigen::VectorXd> path;  // iterates, only if record_path

  bool ok() const { return status == IkStatus::Ok; }
};

/// Shortest distance between segments [p1,q1] and [p2,q2].
double segment_segment_distance(const Eigen::Vector3d& p1,
                                const Eigen::Vector3d& q1,
                                const Eigen::Vector3d& p2,
                                const Eigen::Vector3d& q2);

/// Serial chain of revolute joints with a flange, a wrist camera, a
/// flange-mounted swab, and a capsule collision model.
///
/// Internals are N-generic; the file loader accepts exactly the 7-joint
/// layout used by the rest of the system.
class KinematicChain {
 public:
  KinematicChain(std::vector<JointParams> joints,
                 Eigen::Vector3d flange_offset,
                 Pose camera_extrinsic,
                 Eigen::Vector3d swab_tip,
                 Eigen::Vector3d swab_shaft,
                 std::vector<Capsule> capsules);

  /// The 7-joint arm every tool in this project defaults to.
  static KinematicChain reference_chain();

  /// Load a chain description (`key = value` format; see the reference file
  /// under configs/ for the schema). Requires a 7-joint chain.
  static KinematicChain from_file(const std::string& path);

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<JointParams>& joints() const { return joints_; }
  const std::vector<Capsule>& capsules() const { return capsules_; }
  const Eigen::Vector3d& flange_offset() const { return flange_offset_; }
  const Pose& camera_extrinsic() const { return camera_extrinsic_; }
  const Eigen::Vector3d& swab_tip_local() const { return swab_tip_; }
  const Eigen::Vector3d& swab_shaft_local() const { return swab_shaft_; }

  Eigen::VectorXd home() const { return Eigen::VectorXd::Zero(dof()); }
  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  Eigen::VectorXd clamp_to_limits(const Eigen::VectorXd& q) const;
  bool within_limits(const Eigen::VectorXd& q, double margin = 0.0) const;

  /// World pose of every link frame; element 0 is the base (identity),
  /// element i is the frame after joint i. Size dof()+1.
  std::vector<Pose> link_frames(const Eigen::VectorXd& q) const;

  /// World pose of the flange.
  Pose forward_kinematics(const Eigen::VectorXd& q) const;

  /// World pose of the wrist camera (flange pose composed with the fixed
  /// camera extrinsic).
  Pose camera_pose(const Eigen::VectorXd& q) const;

  /// Swab geometry in world coordinates. `extension` slides the tip along
  /// the swab axis (positive = further out).
  Eigen::Vector3d swab_tip_position(const Eigen::VectorXd& q,
                                    double extension = 0.0) const;
  Eigen::Vector3d swab_shaft_position(const Eigen::VectorXd& q) const;
  Eigen::Vector3d swab_axis(const Eigen::VectorXd& q) const;

  /// Geometric Jacobian at the flange: rows 0-2 map joint rates to the world
  /// linear velocity of the flange origin, rows 3-5 to the world angular
  /// velocity.
  Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(
      const Eigen::VectorXd& q) const;

  /// Same, but with the linear rows taken at an arbitrary world point rigidly
  /// attached to the last link (e.g. the camera origin or the swab tip).
  Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian_at_point(
      const Eigen::VectorXd& q, const Eigen::Vector3d& point_world) const;

  /// First self-colliding capsule pair (indices into capsules()), if any.
  /// Consecutive capsules are exempt: they legitimately touch at the joints.
  std::optional<std::pair<int, int>> check_self_collision(
      const Eigen::VectorXd& q) const;

  /// Damped-least-squares pose tracking from seed `q0` to `target`.
  IkResult solve_ik(const Pose& target, const Eigen::VectorXd& q0,
                    const IkOptions& opts = IkOptions()) const;

 private:
  void require_dof(const Eigen::VectorXd& q) const;

  std::vector<JointParams> joints_;
  Eigen::Vector3d flange_offset_;
  Pose camera_extrinsic_;
  Eigen::Vector3d swab_tip_;
  Eigen::Vector3d swab_shaft_;
  std::vector<Capsule> capsules_;
};

/// Damped pseudo-inverse: for damping > 0 the damped-least-squares inverse,
/// for damping == 0 the Moore-Penrose inverse of a full-rank matrix.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& J, double damping);

}  // namespace npswab
