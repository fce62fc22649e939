#pragma once

#include <stdexcept>
#include <string>

namespace npswab {

/// Base class for all domain errors raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// -- rotation / pose algebra ------------------------------------------------

/// Input matrix is rank deficient (smallest singular value below threshold).
struct DegenerateMatrix : Error {
  using Error::Error;
};

/// The two directions are anti-parallel; the minimal aligning rotation is
/// not unique.
struct AntiparallelVectors : Error {
  using Error::Error;
};

/// Relative rotation sits on (or numerically at) the log branch cut.
struct BranchCut : Error {
  using Error::Error;
};

/// Operand dimensions do not match the operation contract.
struct DimensionMismatch : Error {
  using Error::Error;
};

// -- perception -------------------------------------------------------------

/// Observation carries no depth sample where one is required.
struct MissingDepth : Error {
  using Error::Error;
};

/// View ray nearly orthogonal to the prior point; the 1-D least-squares
/// depth estimate is unreliable.
struct IllConditionedRay : Error {
  using Error::Error;
};

/// Projection matrix block is too close to singular to extract a rotation.
struct DegenerateProjection : Error {
  using Error::Error;
};

/// Requested projection of a point outside the camera frustum.
struct OutOfFrustum : Error {
  using Error::Error;
};

// -- lookup table -----------------------------------------------------------

/// Every inverse-kinematics seed failed for a cell; no candidate exists.
struct NoFeasibleCandidate : Error {
  using Error::Error;
};

/// Queried cell has no stored reachable configuration (N == 0).
struct InfeasibleCell : Error {
  using Error::Error;
};

// -- filtering --------------------------------------------------------------

/// Covariance lost positive semi-definiteness beyond the repairable band.
struct CovarianceNotPSD : Error {
  using Error::Error;
};

// -- configuration / io -----------------------------------------------------

/// Malformed configuration or data file. Carries a file/line diagnostic.
struct ConfigError : Error {
  using Error::Error;
};

/// Filesystem write failure.
struct WriteError : Error {
  using Error::Error;
};

}  // namespace npswab
