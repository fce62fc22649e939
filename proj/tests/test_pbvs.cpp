#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "npswab/errors.hpp"
#include "npswab/geometry.hpp"
#include "npswab/kinematics.hpp"
#include "npswab/pbvs.hpp"
#include "npswab/rng.hpp"

using namespace npswab;

namespace {

Vector3d random_unit(Rng& rng) {
  Vector3d v;
  do {
    v = Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Rotation-block coefficient series (1 - sinc t / sinc^2(t/2)) / t^2,
// accurate to ~t^6 — an independent oracle for small angles.
Matrix3d rotation_block_oracle(const Vector3d& w) {
  const double t2 = w.squaredNorm();
  const double k = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  const Matrix3d wx = skew(w);
  return Matrix3d::Identity() - 0.5 * wx + k * wx * wx;
}

// Axis-angle coordinates of the pose error after the camera spins with body
// angular velocity `omega` for time `h` (frozen target).
Vector3d error_after_spin(const Matrix3d& error, const Vector3d& omega,
                          double h) {
  return log_so3(exp_so3(-omega * h) * error);
}

ControlParams unlimited() {
  ControlParams params;
  params.max_linear_speed = 1e9;
  params.max_angular_speed = 1e9;
  params.joint_velocity_limits = Eigen::VectorXd::Constant(7, 1e9);
  return params;
}

Eigen::VectorXd random_joint_vector(Rng& rng, const KinematicChain& chain,
                                    double margin) {
  Eigen::VectorXd q(chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    const JointParams& j = chain.joints()[i];
    q[i] = rng.uniform(j.lower + margin, j.upper - margin);
  }
  return q;
}

// Camera-frame Jacobian, assembled independently of joint_command.
Eigen::MatrixXd camera_jacobian(const KinematicChain& chain,
                                const Eigen::VectorXd& q) {
  const Pose cam = chain.camera_pose(q);
  Eigen::MatrixXd J = chain.jacobian_at_point(q, cam.position);
  J.topRows<3>() = cam.rotation.transpose() * J.topRows<3>();
  J.bottomRows<3>() = cam.rotation.transpose() * J.bottomRows<3>();
  return J;
}

// Two coaxial joints: the Jacobian columns coincide, so its second singular
// value is exactly zero.
KinematicChain coaxial_chain() {
  std::vector<JointParams> joints = {
      {{0, 0, 0}, Eigen::Vector3d::UnitZ(), -3.1, 3.1},
      {{0, 0, 0}, Eigen::Vector3d::UnitZ(), -3.1, 3.1},
  };
  return KinematicChain(std::move(joints), Eigen::Vector3d(1, 0, 0),
                        Pose::identity(), Eigen::Vector3d(0, 0, 0.2),
                        Eigen::Vector3d(0, 0, 0.1), {});
}

}  // namespace

TEST_CASE("interaction matrix blocks at zero rotation error") {
  const Matrix6d L = interaction_matrix(Matrix3d::Identity());
  CHECK((L - Matrix6d::Identity()).norm() == 0.0);
}

TEST_CASE("interaction matrix is continuous through the small-angle branch") {
  Rng rng(31);
  // Tiny angle: the quadratic term must vanish against the linear part.
  {
    const Vector3d w = 1e-9 * random_unit(rng);
    const Matrix6d L = interaction_matrix(exp_so3(w));
    const Matrix3d expected = Matrix3d::Identity() - 0.5 * skew(w);
    CHECK((L.bottomRightCorner<3, 3>() - expected).norm() < 1e-12);
  }
  // Angle so small the whole matrix collapses onto the identity blocks.
  {
    const Matrix6d L = interaction_matrix(exp_so3(1e-13 * random_unit(rng)));
    CHECK((L - Matrix6d::Identity()).norm() < 1e-12);
  }
  // Both sides of the series/closed-form switch agree with the series oracle.
  for (double angle : {1e-9, 1e-6, 0.5e-4, 0.99e-4, 1.01e-4, 2e-4, 1e-3}) {
    const Vector3d w = angle * random_unit(rng);
    const Matrix6d L = interaction_matrix(exp_so3(w));
    CHECK((L.topLeftCorner<3, 3>() - exp_so3(w)).norm() < 1e-12);
    CHECK((L.bottomRightCorner<3, 3>() - rotation_block_oracle(w)).norm() <
          1e-12);
  }
}

TEST_CASE("rotation block fixes its own axis and stays invertible below pi") {
  Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const double angle = rng.uniform(1e-3, 3.14);
    const Vector3d w = angle * random_unit(rng);
    const Matrix3d B =
        interaction_matrix(exp_so3(w)).bottomRightCorner<3, 3>();
    CHECK((B * w - w).norm() < 1e-12 * std::max(1.0, w.norm()));
    // Off-axis pair has determinant (1-c)^2 + (angle/2)^2 >= (angle/2)^2.
    CHECK(std::abs(B.determinant()) > angle * angle / 4.0 * 0.99);
  }
}

TEST_CASE("rotation block maps camera spin to the error-rate, finite diff") {
  Rng rng(33);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector3d w = rng.uniform(0.2, 2.6) * random_unit(rng);
    const Matrix3d error = exp_so3(w);
    const Vector3d omega = rng.uniform(0.2, 1.5) * random_unit(rng);
    const Matrix3d B = interaction_matrix(error).bottomRightCorner<3, 3>();

    const Vector3d rate =
        (error_after_spin(error, omega, h) - error_after_spin(error, omega, -h)) /
        (2.0 * h);
    // A spin of omega drives the error coordinates at exactly -B*omega; this
    // is what makes the proportional law below decay the error exponentially.
    CHECK((B * omega + rate).norm() < 1e-6 * std::max(1.0, rate.norm()));

    // Commanding omega = gain * B^-1 * w must realize d(w)/dt = -gain * w.
    const double gain = 0.5;
    const Vector3d commanded = gain * B.partialPivLu().solve(w).eval();
    const Vector3d rate_cmd = (error_after_spin(error, commanded, h) -
                               error_after_spin(error, commanded, -h)) /
                              (2.0 * h);
    CHECK((rate_cmd + gain * w).norm() < 1e-6 * std::max(1.0, gain * w.norm()));
  }
}

TEST_CASE("zero pose error commands a zero twist") {
  const Twist twist = camera_twist(RelativeTarget{}, ControlParams::defaults());
  CHECK(twist.linear.norm() == 0.0);
  CHECK(twist.angular.norm() == 0.0);
}

TEST_CASE("pure translation error maps to a proportional linear twist") {
  RelativeTarget error;
  error.translation = Vector3d(0.1, 0, 0);
  bool saturated = true;
  const Twist twist =
      camera_twist(error, ControlParams::defaults(), &saturated);
  CHECK(twist.linear.norm() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK((twist.linear - Vector3d(0.05, 0, 0)).norm() < 1e-15);
  CHECK(twist.angular.norm() == 0.0);
  CHECK_FALSE(saturated);
}

TEST_CASE("doubling the gain doubles the unsaturated twist exactly") {
  Rng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    RelativeTarget error;
    error.translation = 0.05 * random_unit(rng);
    error.rotation = exp_so3(rng.uniform(0.05, 0.6) * random_unit(rng));

    ControlParams params = unlimited();
    params.gain = 0.4;
    const Twist once = camera_twist(error, params);
    params.gain = 0.8;
    const Twist twice = camera_twist(error, params);
    CHECK((twice.as_vector() - 2.0 * once.as_vector()).norm() == 0.0);
  }
}

TEST_CASE("twist caps rescale uniformly, preserving direction") {
  RelativeTarget error;
  // Unsaturated command would be 1.5 m/s: ten times the 0.15 m/s cap.
  error.translation = Vector3d(2.0, -2.0, 1.0);  // norm 3: commands 1.5 m/s
  error.rotation = exp_so3(Vector3d(0.3, 0.1, -0.2));

  bool saturated = false;
  const Twist capped =
      camera_twist(error, ControlParams::defaults(), &saturated);
  const Twist free = camera_twist(error, unlimited());
  CHECK(saturated);
  CHECK(free.linear.norm() == doctest::Approx(1.5));
  CHECK(capped.linear.norm() == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(capped.angular.norm() < 0.5);

  const Vector6d a = capped.as_vector().normalized();
  const Vector6d b = free.as_vector().normalized();
  CHECK((a - b).norm() < 1e-9);

  // The angular cap binds alone when the spin dominates.
  RelativeTarget spin;
  spin.rotation = exp_so3(Vector3d(0, 0, 2.8));
  bool spin_saturated = false;
  const Twist capped_spin =
      camera_twist(spin, ControlParams::defaults(), &spin_saturated);
  CHECK(spin_saturated);
  CHECK(capped_spin.angular.norm() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("closed loop on a frozen scene decays like exp(-gain * t)") {
  const ControlParams params = ControlParams::defaults();
  const double dt = 0.01;

  const Vector3d target_position(0.4, -0.2, 0.9);
  const Matrix3d target_rotation =
      exp_so3(2.1 * Vector3d(1, 2, -1).normalized());

  const double theta0 = 20.0 * M_PI / 180.0;
  const Vector3d axis = Vector3d(0.3, -0.5, 0.8).normalized();
  Matrix3d camera_rotation = target_rotation * exp_so3(-theta0 * axis);
  Vector3d camera_position =
      target_position - 0.1 * Vector3d(0.7, 0.2, -0.4).normalized();

  const double s0 = std::hypot(0.1, theta0);
  double final_position_error = 1.0;
  double final_angle_error = 1.0;
  for (int k = 0; k <= 1400; ++k) {
    const double t = k * dt;
    RelativeTarget error;
    error.translation =
        camera_rotation.transpose() * (target_position - camera_position);
    error.rotation = camera_rotation.transpose() * target_rotation;

    const double position_error = error.translation.norm();
    const double angle_error = log_so3(error.rotation).norm();
    if (t <= 6.0 + 1e-12) {
      const double expected = s0 * std::exp(-params.gain * t);
      const double stacked = std::hypot(position_error, angle_error);
      CHECK(stacked == doctest::Approx(expected).epsilon(0.05));
    }
    final_position_error = position_error;
    final_angle_error = angle_error;

    bool saturated = true;
    const Twist twist = camera_twist(error, params, &saturated);
    CHECK_FALSE(saturated);
    camera_position += camera_rotation * twist.linear * dt;
    camera_rotation = camera_rotation * exp_so3(twist.angular * dt);
  }
  // After 14 s at gain 0.5 both errors sit far below (1 mm, 0.1 deg).
  CHECK(final_position_error < 1e-3);
  CHECK(final_angle_error < 0.1 * M_PI / 180.0);
}

TEST_CASE("joint command realizes the requested camera twist") {
  const KinematicChain chain = KinematicChain::reference_chain();
  Rng rng(35);
  ControlParams params = unlimited();

  int accepted = 0;
  while (accepted < 100) {
    const Eigen::VectorXd q = random_joint_vector(rng, chain, 0.3);
    const Eigen::MatrixXd J = camera_jacobian(chain, q);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    if (svd.singularValues().minCoeff() < 1e-2) continue;
    ++accepted;

    Twist desired;
    desired.linear = 0.05 * random_unit(rng);
    desired.angular = 0.1 * random_unit(rng);

    const ControlCommand command = joint_command(chain, q, desired, params);
    CHECK_FALSE(command.near_singularity);
    CHECK_FALSE(command.saturated);
    const Vector6d realized = J * command.joint_velocities;
    CHECK((realized - desired.as_vector()).norm() <
          1e-6 * desired.as_vector().norm());
  }
}

TEST_CASE("joints pressing into a position limit are locked and re-solved") {
  const KinematicChain chain = KinematicChain::reference_chain();
  const ControlParams params = unlimited();
  Rng rng(37);

  int tested = 0;
  while (tested < 20) {
    Eigen::VectorXd q = random_joint_vector(rng, chain, 0.3);
    const int j = static_cast<int>(rng.next_u64() % chain.dof());
    const bool at_upper = rng.uniform01() < 0.5;
    q(j) = at_upper ? chain.upper_limits()(j) : chain.lower_limits()(j);

    const Eigen::MatrixXd J = camera_jacobian(chain, q);
    Eigen::MatrixXd J_reduced = J;
    J_reduced.col(j).setZero();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J_reduced);
    if (svd.singularValues().minCoeff() < 1e-2) continue;

    Twist desired;
    desired.linear = 0.05 * random_unit(rng);
    desired.angular = 0.1 * random_unit(rng);
    const Eigen::VectorXd free =
        pseudo_inverse(J, 1e-6) * desired.as_vector();
    if (std::abs(free(j)) < 1e-6) continue;
    ++tested;

    // Orient the request so the unconstrained solution pushes joint j
    // outward through its limit.
    const double outward = at_upper ? 1.0 : -1.0;
    if (free(j) * outward < 0.0) {
      desired.linear = -desired.linear;
      desired.angular = -desired.angular;
    }

    const ControlCommand locked = joint_command(chain, q, desired, params);
    // The limit joint never moves outward: it is either locked at zero or
    // pulled back inside by the centering term.
    CHECK(locked.joint_velocities(j) * outward <= 0.0);
    CHECK_FALSE(locked.saturated);
    // The remaining freedom still realizes the requested twist.
    const Vector6d realized = J * locked.joint_velocities;
    CHECK((realized - desired.as_vector()).norm() <
          1e-6 * desired.as_vector().norm());

    // The same request mirrored pulls the joint inward and is not locked.
    Twist inward;
    inward.linear = -desired.linear;
    inward.angular = -desired.angular;
    const ControlCommand moving = joint_command(chain, q, inward, params);
    CHECK(moving.joint_velocities(j) * outward < 0.0);
    CHECK((J * moving.joint_velocities + desired.as_vector()).norm() <
          1e-6 * desired.as_vector().norm());
  }
}

TEST_CASE("zero twist maps to zero joint velocities") {
  const KinematicChain chain = KinematicChain::reference_chain();
  const ControlCommand command = joint_command(
      chain, chain.home(), Twist{}, ControlParams::defaults());
  CHECK(command.joint_velocities.norm() == 0.0);
  CHECK_FALSE(command.saturated);
}

TEST_CASE("joint speed limits clamp per joint at exactly the limit") {
  const KinematicChain chain = KinematicChain::reference_chain();
  Rng rng(36);
  const Eigen::VectorXd q = random_joint_vector(rng, chain, 0.3);

  ControlParams params = ControlParams::defaults();
  params.joint_velocity_limits = Eigen::VectorXd::Constant(7, 0.01);

  Twist desired;
  desired.linear = Vector3d(0.15, 0, 0);

  const ControlCommand command = joint_command(chain, q, desired, params);
  CHECK(command.saturated);
  bool any_at_limit = false;
  for (int i = 0; i < 7; ++i) {
    CHECK(std::abs(command.joint_velocities(i)) <= 0.01);
    if (std::abs(command.joint_velocities(i)) == 0.01) any_at_limit = true;
  }
  CHECK(any_at_limit);

  // The same request without limits exceeds them, so clamping was real.
  const ControlCommand free = joint_command(chain, q, desired, unlimited());
  CHECK(free.joint_velocities.cwiseAbs().maxCoeff() > 0.01);
}

TEST_CASE("coaxial joints trip the near-singularity flag, command damped") {
  const KinematicChain chain = coaxial_chain();
  ControlParams params = ControlParams::defaults();
  params.joint_velocity_limits = Eigen::VectorXd::Constant(2, 1.0);

  Twist desired;
  desired.linear = Vector3d(0.1, 0.1, 0);
  desired.angular = Vector3d(0, 0, 0.2);

  const ControlCommand command =
      joint_command(chain, Eigen::VectorXd::Zero(2), desired, params);
  CHECK(command.near_singularity);
  CHECK(command.joint_velocities.allFinite());
  CHECK(command.joint_velocities.cwiseAbs().maxCoeff() <= 1.0);

  // A healthy configuration of the reference arm must not trip the flag.
  const KinematicChain arm = KinematicChain::reference_chain();
  Rng rng(37);
  const ControlCommand healthy = joint_command(
      arm, random_joint_vector(rng, arm, 0.3), desired, unlimited());
  CHECK_FALSE(healthy.near_singularity);
}

TEST_CASE("adaptive gain schedule interpolates between its endpoints") {
  ControlParams params = ControlParams::defaults();
  CHECK(effective_gain(0.0, params) == params.gain);
  CHECK(effective_gain(10.0, params) == params.gain);

  params.adaptive_gain = true;
  params.gain_at_zero = 1.2;
  params.gain_at_infinity = 0.2;
  params.gain_slope = 3.0;
  params.validate();
  CHECK(effective_gain(0.0, params) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(effective_gain(100.0, params) == doctest::Approx(0.2).epsilon(1e-9));
  double previous = effective_gain(0.0, params);
  for (double norm = 0.05; norm < 2.0; norm += 0.05) {
    const double gain = effective_gain(norm, params);
    CHECK(gain < previous);
    CHECK(gain > params.gain_at_infinity);
    previous = gain;
  }

  // The schedule feeds the commanded twist: small errors see a larger gain.
  RelativeTarget error;
  error.translation = Vector3d(0.01, 0, 0);
  const Twist adaptive = camera_twist(error, params);
  ControlParams fixed = ControlParams::defaults();
  const Twist baseline = camera_twist(error, fixed);
  CHECK(adaptive.linear.norm() > 2.0 * baseline.linear.norm());
}

TEST_CASE("camera twist is continuous near the half-turn boundary") {
  const Vector3d axis = Vector3d(0.2, 1.0, -0.4).normalized();
  RelativeTarget a, b;
  a.translation = b.translation = Vector3d(0.02, -0.01, 0.03);
  a.rotation = exp_so3(3.10 * axis);
  b.rotation = exp_so3((3.10 + 1e-7) * axis);
  const ControlParams params = unlimited();
  const Twist ta = camera_twist(a, params);
  const Twist tb = camera_twist(b, params);
  CHECK((ta.as_vector() - tb.as_vector()).norm() < 1e-5);
}

TEST_CASE("parameter validation rejects nonpositive knobs") {
  ControlParams params = ControlParams::defaults();
  params.gain = 0.0;
  CHECK_THROWS_AS(params.validate(), ConfigError);

  params = ControlParams::defaults();
  params.joint_velocity_limits(3) = -0.5;
  CHECK_THROWS_AS(params.validate(), ConfigError);

  params = ControlParams::defaults();
  params.max_angular_speed = 0.0;
  CHECK_THROWS_AS(params.validate(), ConfigError);

  params = ControlParams::defaults();
  params.adaptive_gain = true;
  params.gain_at_infinity = 2.0;  // above gain_at_zero
  CHECK_THROWS_AS(params.validate(), ConfigError);

  params = ControlParams::defaults();
  params.joint_velocity_limits = Eigen::VectorXd::Constant(5, 1.0);
  CHECK_THROWS_AS(joint_command(KinematicChain::reference_chain(),
                                Eigen::VectorXd::Zero(7), Twist{}, params),
                  DimensionMismatch);
}
