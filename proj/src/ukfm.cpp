#include "npswab/ukfm.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "npswab/errors.hpp"

namespace npswab {

namespace {

// Symmetric positive-semidefinite square root (handles singular inputs,
// unlike a plain Cholesky factor).
Matrix6d psd_sqrt(const Matrix6d& M) {
  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(M);
  const Vector6d clamped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

// Keeps the mean rotation orthonormal against slow multiplicative drift
// without disturbing already-clean inputs.
Matrix3d renormalize(const Matrix3d& R) {
  if ((R.transpose() * R - Matrix3d::Identity()).norm() > 1e-13) {
    return nearest_rotation(R);
  }
  return R;
}

}  // namespace

UtWeights::UtWeights(int dim, double alpha) {
  const double d = static_cast<double>(dim);
  const double lambda = (alpha * alpha - 1.0) * d;
  sqrt_d_lambda = std::sqrt(d + lambda);
  wj = 1.0 / (2.0 * (d + lambda));
  wm0 = lambda / (d + lambda);
  wc0 = lambda / (d + lambda) + 3.0 - alpha * alpha;
}

UkfParams UkfParams::defaults() {
  UkfParams params;
  params.process_noise = 0.01 * Matrix6d::Identity();
  params.measurement_noise = Matrix6d::Zero();
  params.measurement_noise.topLeftCorner<3, 3>() =
      0.005 * Matrix3d::Identity();
  params.measurement_noise.bottomRightCorner<3, 3>() =
      0.05 * Matrix3d::Identity();
  return params;
}

void UkfParams::validate() const {
  if (!(alpha_state > 0.0) || !(alpha_noise > 0.0) || !(alpha_update > 0.0)) {
    throw ConfigError("sigma-point spread parameters must be positive");
  }
  const auto check_psd = [](const Matrix6d& M, const char* name,
                            double floor) {
    if ((M - M.transpose()).norm() > 1e-10) {
      throw ConfigError(std::string(name) + " covariance must be symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(M);
    if (eig.eigenvalues().minCoeff() < floor) {
      throw ConfigError(std::string(name) +
                        " covariance must be positive (semi)definite");
    }
  };
  check_psd(process_noise, "process", -1e-12);
  check_psd(measurement_noise, "measurement", 1e-12);
}

Pose process_model(const Pose& X, const Twist& command,
                   const Vector6d& twist_noise, double dt) {
  const Vector3d v = command.linear + twist_noise.head<3>();
  const Vector3d omega = command.angular + twist_noise.tail<3>();
  Pose out;
  out.position = X.position + dt * (-v - omega.cross(X.position));
  out.rotation = X.rotation * exp_so3(-dt * omega);
  return out;
}

Matrix6d repair_covariance(const Matrix6d& P) {
  const Matrix6d sym = 0.5 * (P + P.transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(sym);
  const Vector6d values = eig.eigenvalues();
  const double negative_mass = (-values.cwiseMin(0.0)).sum();
  if (negative_mass > 1e-6) {
    throw CovarianceNotPSD("covariance lost " +
                           std::to_string(negative_mass) +
                           " of negative eigenvalue mass");
  }
  const Vector6d clamped = values.cwiseMax(1e-12);
  return eig.eigenvectors() * clamped.asDiagonal() *
         eig.eigenvectors().transpose();
}

UkfState propagate(const UkfState& state, const Twist& command, double dt,
                   const UkfParams& params) {
  if (!(dt > 0.0)) {
    throw ConfigError("propagation step must be positive");
  }
  const Matrix6d P = repair_covariance(state.covariance);
  const Vector6d no_noise = Vector6d::Zero();

  UkfState out;
  out.time = state.time + dt;
  out.X = process_model(state.X, command, no_noise, dt);
  out.X.rotation = renormalize(out.X.rotation);

  // Spread of the current state uncertainty through the motion.
  const UtWeights ws(6, params.alpha_state);
  const Matrix6d root_state = ws.sqrt_d_lambda * psd_sqrt(P);
  Eigen::Matrix<double, 6, 12> chart;
  for (int j = 0; j < 6; ++j) {
    const Vector6d xi = root_state.col(j);
    chart.col(j) = inverse_retract(
        process_model(retract(state.X, xi), command, no_noise, dt), out.X);
    chart.col(6 + j) = inverse_retract(
        process_model(retract(state.X, -xi), command, no_noise, dt), out.X);
  }
  const Vector6d mean_state = ws.wj * chart.rowwise().sum();
  const Eigen::Matrix<double, 6, 12> centered =
      chart.colwise() - mean_state;
  const Matrix6d cov_state = ws.wj * (centered * centered.transpose()) +
                             ws.wc0 * (mean_state * mean_state.transpose());

  // Spread of the process noise (a twist-rate perturbation over this step,
  // so the injected state covariance scales with dt).
  const UtWeights wn(6, params.alpha_noise);
  const Matrix6d root_noise =
      wn.sqrt_d_lambda * psd_sqrt(params.process_noise / dt);
  Eigen::Matrix<double, 6, 12> noise_chart;
  for (int j = 0; j < 6; ++j) {
    const Vector6d w = root_noise.col(j);
    noise_chart.col(j) =
        inverse_retract(process_model(state.X, command, w, dt), out.X);
    noise_chart.col(6 + j) =
        inverse_retract(process_model(state.X, command, -w, dt), out.X);
  }
  const Vector6d mean_noise = wn.wj * noise_chart.rowwise().sum();
  const Eigen::Matrix<double, 6, 12> noise_centered =
      noise_chart.colwise() - mean_noise;
  const Matrix6d cov_noise =
      wn.wj * (noise_centered * noise_centered.transpose()) +
      wn.wc0 * (mean_noise * mean_noise.transpose());

  out.covariance = repair_covariance(cov_state + cov_noise);
  return out;
}

UkfState update(const UkfState& state, const Pose& measurement,
                const UkfParams& params) {
  if (!is_rotation(measurement.rotation, 1e-6)) {
    throw DegenerateMatrix("measurement rotation is not orthonormal");
  }
  const Matrix6d P = repair_covariance(state.covariance);

  // Full-pose measurement viewed in the chart at the predicted mean. The
  // sigma points map through the (identity) measurement model.
  const UtWeights wu(6, params.alpha_update);
  const Matrix6d root = wu.sqrt_d_lambda * psd_sqrt(P);
  Eigen::Matrix<double, 6, 12> seen;
  for (int j = 0; j < 6; ++j) {
    const Vector6d xi = root.col(j);
    seen.col(j) = inverse_retract(retract(state.X, xi), state.X);
    seen.col(6 + j) = inverse_retract(retract(state.X, -xi), state.X);
  }
  const Vector6d mean_seen = wu.wj * seen.rowwise().sum();
  const Eigen::Matrix<double, 6, 12> centered = seen.colwise() - mean_seen;

  Matrix6d cov_seen = wu.wj * (centered * centered.transpose()) +
                      wu.wc0 * (mean_seen * mean_seen.transpose()) +
                      params.measurement_noise;
  // Cross covariance between chart sigma points (+-root columns) and their
  // measurement-space images; the central point sits at the chart origin
  // and drops out.
  Matrix6d cross = Matrix6d::Zero();
  for (int j = 0; j < 6; ++j) {
    cross += wu.wj * (root.col(j) * centered.col(j).transpose() -
                      root.col(j) * centered.col(6 + j).transpose());
  }

  const Matrix6d gain = cross * cov_seen.inverse();
  const Vector6d innovation =
      inverse_retract(measurement, state.X) - mean_seen;

  UkfState out;
  out.time = state.time;
  out.X = retract(state.X, gain * innovation);
  out.X.rotation = renormalize(out.X.rotation);
  out.covariance =
      repair_covariance(P - gain * cov_seen * gain.transpose());
  return out;
}

UkfState step(const UkfState& state, const Twist& command, double dt,
              const std::optional<Pose>& measurement,
              const UkfParams& params) {
  UkfState out = propagate(state, command, dt, params);
  if (measurement.has_value()) {
    out = update(out, *measurement, params);
  }
  return out;
}

}  // namespace npswab
