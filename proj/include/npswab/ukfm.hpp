#pragma once

#include <optional>

#include "npswab/geometry.hpp"

namespace npswab {

/// Scaled unscented-transform weights for a given sampling dimension and
/// spread parameter alpha (beta = 2 and kappa = 0 throughout).
struct UtWeights {
  double sqrt_d_lambda;  // sigma-point scatter scale, sqrt(d + lambda)
  double wj;             // weight of each of the 2d non-central points
  double wm0;            // central-point weight in means
  double wc0;            // central-point weight in covariances

  UtWeights(int dim, double alpha);
};

/// Filter tuning. The three spread parameters control the sigma-point
/// scatter of, respectively, the state propagation, the process-noise
/// propagation and the measurement update.
struct UkfParams {
  Matrix6d process_noise;      // twist-rate noise density, per second
  Matrix6d measurement_noise;  // per-measurement pose covariance
  double alpha_state = 0.01;
  double alpha_noise = 0.1;
  double alpha_update = 0.01;

  static UkfParams defaults();
  void validate() const;  // throws ConfigError
};

/// Estimated relative target pose with its uncertainty, both expressed in
/// the (translation, rotation) chart at the mean.
struct UkfState {
  Pose X;
  Matrix6d covariance = 1e-2 * Matrix6d::Identity();
  double time = 0.0;
};

/// Exact discrete motion of a target point/attitude observed from a camera
/// moving with twist `command` (plus an optional twist-rate perturbation):
///   p <- p + dt * (-(v + w_v) - (omega + w_omega) x p)
///   R <- R * exp(-dt * (omega + w_omega))
Pose process_model(const Pose& X, const Twist& command,
                   const Vector6d& twist_noise, double dt);

/// Symmetrizes and clamps tiny negative eigenvalues; throws
/// CovarianceNotPSD when more than 1e-6 of negative mass must be removed.
Matrix6d repair_covariance(const Matrix6d& P);

/// Unscented propagation through the process model: the mean follows the
/// process exactly; covariance flows through retract/inverse_retract sigma
/// points, then inflates by the process noise scaled to the step length.
UkfState propagate(const UkfState& state, const Twist& command, double dt,
                   const UkfParams& params);

/// Unscented full-pose measurement update; the innovation is the chart
/// displacement of the measurement at the predicted mean.
UkfState update(const UkfState& state, const Pose& measurement,
                const UkfParams& params);

/// One filter tick: always propagate, update only when a measurement is
/// present (dropped frames skip the update entirely).
UkfState step(const UkfState& state, const Twist& command, double dt,
              const std::optional<Pose>& measurement,
              const UkfParams& params);

}  // namespace npswab
