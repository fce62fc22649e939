#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npswab/geometry.hpp"

namespace npswab {

/// Linear shape model: vertices(beta) = mean + reshape(basis * beta).
/// Face frame: x lateral, y down, z out of the face.
struct MorphableFaceModel {
  Eigen::MatrixXd mean;   // V x 3, metres
  Eigen::MatrixXd basis;  // 3V x B; row 3v+a moves vertex v along axis a
  std::vector<int> nostril_vertices;  // {left, right}; first is the target
  int center_vertex = 0;

  int n_vertices() const { return static_cast<int>(mean.rows()); }
  int coeff_dim() const { return static_cast<int>(basis.cols()); }

  /// All vertices for shape coefficients beta (throws DimensionMismatch).
  Eigen::MatrixXd vertices(const Eigen::VectorXd& beta) const;
  /// Same computation restricted to a subset of vertex rows; bit-identical
  /// to slicing the full result.
  Eigen::MatrixXd vertices_subset(const Eigen::VectorXd& beta,
                                  const std::vector<int>& indices) const;
};

/// Sinusoidal head sway: all axes share one base frequency (so the motion
/// is exactly periodic) with fixed per-axis phase offsets.
struct HeadJitter {
  double linear_amplitude = 0.003;   // metres
  double angular_amplitude = 0.010;  // radians
  double frequency = 0.2;            // Hz; period = 1/frequency
};

struct GroundTruthFace {
  Eigen::VectorXd beta;
  Pose base_pose = Pose::identity();  // face frame -> world, before sway
  HeadJitter jitter;
  double time = 0.0;

  /// World pose at the current time (base pose composed with the sway).
  Pose pose() const;
};

/// Advance the head-sway clock; zero amplitudes leave the pose unchanged.
GroundTruthFace step_head_motion(const GroundTruthFace& face, double dt);

struct CameraModel {
  Matrix3d K = Matrix3d::Identity();  // upper-triangular intrinsics, pixels
  int width = 848;
  int height = 480;
  double near = 0.16;        // metres; closer surfaces give no depth sample
  double far = 3.0;          // metres; farther surfaces give no depth sample
  double depth_sigma = 0.002;  // sensor depth noise floor, metres
  Pose pose;                 // camera frame -> world

  void validate() const;  // throws ConfigError
  double mean_focal() const { return 0.5 * (K(0, 0) + K(1, 1)); }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const;
  /// Pinhole projection; throws OutOfFrustum when behind the camera or
  /// outside the image bounds.
  Eigen::Vector2d project(const Eigen::Vector3d& world) const;
};

/// Per-stage observation noise.
struct NoiseSpec {
  double sigma_pos = 0.0;  // metres, positional channels
  double sigma_rot = 0.0;  // radians, rotational channels
  double p_drop = 0.0;     // probability an observation is dropped
};

struct FaceObservation {
  Eigen::Matrix<double, 3, 4> P = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Vector2d nostril_pixel = Eigen::Vector2d::Zero();
  std::optional<double> nostril_depth;       // metres; absent out of range
  Eigen::Vector3d center_estimate = Eigen::Vector3d::Zero();  // camera frame
  bool valid = false;
  double timestamp = 0.0;
};

/// Swab placement scatter: tip offset magnitude and axis tilt angle.
struct SwabPerturbSpec {
  double offset_mean = 0.0052;               // metres
  double offset_std = 0.0014;                // metres
  double angle_mean = 3.5 * M_PI / 180.0;    // radians
  double angle_std = 1.4 * M_PI / 180.0;     // radians
};

struct SwabObservation {
  Eigen::Vector2d tip_pixel = Eigen::Vector2d::Zero();
  Eigen::Vector2d shaft_pixel = Eigen::Vector2d::Zero();
  // Schematic (nominal, unperturbed) keypoints in the camera frame.
  Eigen::Vector3d tip_schematic = Eigen::Vector3d::Zero();
  Eigen::Vector3d shaft_schematic = Eigen::Vector3d::Zero();
  // Simulation ground truth (the perturbed points the pixels came from),
  // kept for analysis; estimators must not read these.
  Eigen::Vector3d true_tip = Eigen::Vector3d::Zero();
  Eigen::Vector3d true_shaft = Eigen::Vector3d::Zero();
};

/// Deterministic synthetic face: fixed template mean (~0.18 m tall, nostrils
/// below and between the eyes), seeded orthogonal shape basis, seeded
/// coefficients with norm <= 1.
std::pair<MorphableFaceModel, GroundTruthFace> synthesize_face(
    std::uint64_t seed);

/// Noisy emulation of the face-regression front end for one frame.
FaceObservation project_face(const MorphableFaceModel& model,
                             const GroundTruthFace& face,
                             const CameraModel& camera,
                             const NoiseSpec& noise, double t,
                             std::uint64_t noise_seed);

/// Keypoint observation of a physically perturbed swab: pixels are exact
/// projections of the perturbed points; schematic estimates stay nominal.
SwabObservation observe_swab(const CameraModel& camera,
                             const Eigen::Vector3d& tip_nominal,
                             const Eigen::Vector3d& shaft_nominal,
                             const SwabPerturbSpec& spec,
                             std::uint64_t placement_error_seed);

/// Full scene parameter set, loadable from a key/value file.
struct SceneConfig {
  CameraModel camera;
  NoiseSpec stage2{0.0082, 0.030, 0.05};
  NoiseSpec stage3{0.0023, 0.017, 0.05};
  SwabPerturbSpec swab;
  HeadJitter jitter;
  std::uint64_t seed = 1;

  static SceneConfig defaults();
  static SceneConfig from_file(const std::string& path);
};

}  // namespace npswab
