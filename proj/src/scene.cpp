#include "npswab/scene.hpp"

#include <cmath>

#include "npswab/config.hpp"
#include "npswab/errors.hpp"
#include "npswab/rng.hpp"

namespace npswab {

namespace {

// Fixed 64-vertex template head, metres, face frame (x lateral, y down,
// z out of the face). Featured vertices first, then an ellipsoid shell.
constexpr int kNumVertices = 64;
constexpr int kLeftEye = 0;
constexpr int kRightEye = 1;
constexpr int kLeftNostril = 2;
constexpr int kRightNostril = 3;
constexpr int kCenter = 4;  // nose bridge, the face origin vertex

Eigen::MatrixXd template_mean() {
  Eigen::MatrixXd mean(kNumVertices, 3);
  int v = 0;
  auto put = [&](double x, double y, double z) {
    mean.row(v++) = Eigen::Vector3d(x, y, z);
  };
  put(-0.032, -0.030, 0.012);  // left eye
  put(0.032, -0.030, 0.012);   // right eye
  put(-0.009, 0.026, 0.028);   // left nostril
  put(0.009, 0.026, 0.028);    // right nostril
  put(0.0, 0.0, 0.020);        // nose bridge / face center
  put(0.0, 0.020, 0.036);      // nose tip
  put(0.0, 0.052, 0.024);      // upper lip
  put(0.0, 0.072, 0.016);      // chin ridge
  // Ellipsoid shell: rings of 8 vertices at 7 heights.
  const double half_height = 0.090;  // total face height 0.18 m
  const double half_width = 0.065;
  const double depth = 0.055;
  for (int ring = 0; ring < 7; ++ring) {
    const double y = -half_height + 2.0 * half_height * ring / 6.0;
    const double shrink =
        std::sqrt(std::max(0.0, 1.0 - std::pow(y / half_height, 2.0))) + 0.15;
    for (int k = 0; k < 8; ++k) {
      const double a = 2.0 * M_PI * k / 8.0;
      put(half_width * shrink * std::cos(a), y,
          depth * shrink * std::sin(a) * 0.5 + 0.002);
    }
  }
  return mean;
}

}  // namespace

namespace {

// Shared per-vertex kernel; both evaluation paths route through the same
// expression so subset results are bit-identical to full results.
inline Eigen::RowVector3d displaced_vertex(const Eigen::MatrixXd& mean,
                                           const Eigen::MatrixXd& basis,
                                           const Eigen::VectorXd& beta,
                                           int v) {
  return mean.row(v) + (basis.middleRows<3>(3 * v) * beta).transpose();
}

}  // namespace

Eigen::MatrixXd MorphableFaceModel::vertices(
    const Eigen::VectorXd& beta) const {
  if (beta.size() != coeff_dim()) {
    throw DimensionMismatch("shape coefficient vector has " +
                            std::to_string(beta.size()) + " entries, model " +
                            std::to_string(coeff_dim()));
  }
  Eigen::MatrixXd out(n_vertices(), 3);
  for (int v = 0; v < n_vertices(); ++v) {
    out.row(v) = displaced_vertex(mean, basis, beta, v);
  }
  return out;
}

Eigen::MatrixXd MorphableFaceModel::vertices_subset(
    const Eigen::VectorXd& beta, const std::vector<int>& indices) const {
  if (beta.size() != coeff_dim()) {
    throw DimensionMismatch("shape coefficient vector has " +
                            std::to_string(beta.size()) + " entries, model " +
                            std::to_string(coeff_dim()));
  }
  Eigen::MatrixXd out(indices.size(), 3);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int v = indices[i];
    if (v < 0 || v >= n_vertices()) {
      throw DimensionMismatch("vertex index " + std::to_string(v) +
                              " out of range");
    }
    out.row(i) = displaced_vertex(mean, basis, beta, v);
  }
  return out;
}

Pose GroundTruthFace::pose() const {
  const double w = 2.0 * M_PI * jitter.frequency;
  // Per-axis phase offsets keep the sway three-dimensional while every
  // channel shares the base period.
  const Eigen::Vector3d lin =
      jitter.linear_amplitude *
      Eigen::Vector3d(std::sin(w * time), std::sin(w * time + 2.0),
                      std::sin(w * time + 4.0));
  const Eigen::Vector3d ang =
      jitter.angular_amplitude *
      Eigen::Vector3d(std::sin(w * time + 1.0), std::sin(w * time + 3.0),
                      std::sin(w * time + 5.0));
  Pose out;
  out.position = base_pose.position + lin;
  out.rotation = base_pose.rotation * exp_so3(ang);
  return out;
}

GroundTruthFace step_head_motion(const GroundTruthFace& face, double dt) {
  if (!(dt > 0.0)) {
    throw ConfigError("head motion step must be positive");
  }
  GroundTruthFace out = face;
  out.time += dt;
  return out;
}

void CameraModel::validate() const {
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 ||
      K(2, 2) != 1.0) {
    throw ConfigError("camera intrinsics must be upper-triangular with "
                      "K(2,2) = 1");
  }
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) {
    throw ConfigError("camera focal lengths must be positive");
  }
  if (!(near < far) || !(near > 0.0)) {
    throw ConfigError("camera depth range requires 0 < near < far");
  }
  if (width <= 0 || height <= 0) {
    throw ConfigError("camera resolution must be positive");
  }
}

Eigen::Vector3d CameraModel::to_camera(const Eigen::Vector3d& world) const {
  return pose.rotation.transpose() * (world - pose.position);
}

Eigen::Vector2d CameraModel::project(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d x = to_camera(world);
  if (!(x.z() > 1e-9)) {
    throw OutOfFrustum("point is behind the camera");
  }
  const Eigen::Vector2d pixel(K(0, 0) * x.x() / x.z() + K(0, 2),
                              K(1, 1) * x.y() / x.z() + K(1, 2));
  if (pixel.x() < 0.0 || pixel.x() >= width || pixel.y() < 0.0 ||
      pixel.y() >= height) {
    throw OutOfFrustum("point projects outside the image");
  }
  return pixel;
}

std::pair<MorphableFaceModel, GroundTruthFace> synthesize_face(
    std::uint64_t seed) {
  MorphableFaceModel model;
  model.mean = template_mean();
  model.nostril_vertices = {kLeftNostril, kRightNostril};
  model.center_vertex = kCenter;

  const int rows = 3 * kNumVertices;
  const int B = 8;
  Rng rng(derive_seed(seed, 0x6661));
  Eigen::MatrixXd W(rows, B);
  for (int c = 0; c < B; ++c) {
    for (int r = 0; r < rows; ++r) {
      W(r, c) = rng.normal();
    }
  }
  // Gram-Schmidt: mutually orthogonal columns.
  for (int c = 0; c < B; ++c) {
    for (int prev = 0; prev < c; ++prev) {
      W.col(c) -= W.col(prev).dot(W.col(c)) /
                  W.col(prev).squaredNorm() * W.col(prev);
    }
    W.col(c).normalize();
  }
  // Scale so that no single vertex can move more than 0.04 m for any
  // coefficient vector with norm <= 1 (block spectral norm is bounded by
  // the block Frobenius norm).
  double max_block = 0.0;
  for (int v = 0; v < kNumVertices; ++v) {
    max_block = std::max(max_block, W.middleRows<3>(3 * v).norm());
  }
  W *= 0.04 / max_block;
  model.basis = W;

  GroundTruthFace face;
  Eigen::VectorXd beta(B);
  for (int i = 0; i < B; ++i) {
    beta[i] = rng.normal();
  }
  beta.normalize();
  beta *= std::pow(rng.uniform01(), 1.0 / B);  // uniform in the unit ball
  face.beta = beta;
  return {std::move(model), std::move(face)};
}

FaceObservation project_face(const MorphableFaceModel& model,
                             const GroundTruthFace& face,
                             const CameraModel& camera,
                             const NoiseSpec& noise, double t,
                             std::uint64_t noise_seed) {
  camera.validate();
  Rng rng(noise_seed);
  FaceObservation obs;
  obs.timestamp = t;

  const Pose face_pose = face.pose();
  const std::vector<int> wanted = {model.nostril_vertices.at(0),
                                   model.center_vertex};
  const Eigen::MatrixXd pts = model.vertices_subset(face.beta, wanted);
  const Eigen::Vector3d nostril_world = face_pose.act(pts.row(0).transpose());
  const Eigen::Vector3d center_world = face_pose.act(pts.row(1).transpose());

  const Eigen::Vector3d nostril_cam = camera.to_camera(nostril_world);
  const Eigen::Vector3d center_cam = camera.to_camera(center_world);
  const Eigen::Vector2d nostril_px = camera.project(nostril_world);
  camera.project(center_world);  // frustum check for the face center

  const double f = camera.mean_focal();
  const double z_bar = center_cam.z();

  // Weak-projection regression emulation: the apparent rotation of an
  // off-axis face is the true rotation pre-multiplied by the sight-line
  // rotation; scale couples in the mean depth.
  const double phi_x = std::atan2(center_cam.y(), center_cam.z());
  const double phi_y = std::atan2(center_cam.x(), center_cam.z());
  const Matrix3d view_tilt = exp_so3(Eigen::Vector3d(phi_x, phi_y, 0.0));
  const Matrix3d face_in_cam =
      camera.pose.rotation.transpose() * face_pose.rotation;
  const double s = f / z_bar;

  Eigen::Matrix<double, 3, 4> P;
  P.leftCols<3>() = s * view_tilt * face_in_cam;
  P.col(3) = s * center_cam;
  const double sigma_elem = std::sqrt(2.0) * s * noise.sigma_rot;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      P(r, c) += rng.normal(0.0, c < 3 ? sigma_elem : s * noise.sigma_pos);
    }
  }
  obs.P = P;

  // Pixel noise sized so the back-projected lateral error is sigma_pos.
  const double pixel_sigma = f * noise.sigma_pos / nostril_cam.z();
  obs.nostril_pixel = nostril_px + Eigen::Vector2d(rng.normal(0.0, pixel_sigma),
                                                   rng.normal(0.0, pixel_sigma));
  const double depth_sigma =
      std::hypot(camera.depth_sigma, noise.sigma_pos);
  const double noisy_depth = nostril_cam.z() + rng.normal(0.0, depth_sigma);
  if (nostril_cam.z() >= camera.near && nostril_cam.z() <= camera.far) {
    obs.nostril_depth = noisy_depth;
  }

  obs.center_estimate =
      center_cam + rng.normal_vec3(noise.sigma_pos);

  obs.valid = rng.uniform01() >= noise.p_drop;
  return obs;
}

SwabObservation observe_swab(const CameraModel& camera,
                             const Eigen::Vector3d& tip_nominal,
                             const Eigen::Vector3d& shaft_nominal,
                             const SwabPerturbSpec& spec,
                             std::uint64_t placement_error_seed) {
  camera.validate();
  if ((tip_nominal - shaft_nominal).norm() < 1e-9) {
    throw IllConditionedRay("swab keypoints coincide");
  }
  Rng rng(placement_error_seed);

  const Eigen::Vector3d axis = (tip_nominal - shaft_nominal).normalized();
  // Orthonormal frame around the swab axis.
  const Eigen::Vector3d ref =
      std::abs(axis.z()) < 0.9 ? Eigen::Vector3d::UnitZ()
                               : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d u = axis.cross(ref).normalized();
  const Eigen::Vector3d v = axis.cross(u);

  // Tip displaced laterally; axis tilted about a random transverse axis.
  const double offset = std::abs(rng.normal(spec.offset_mean, spec.offset_std));
  const double dir_angle = rng.uniform(0.0, 2.0 * M_PI);
  const Eigen::Vector3d tip_true =
      tip_nominal + offset * (std::cos(dir_angle) * u + std::sin(dir_angle) * v);

  const double tilt = std::abs(rng.normal(spec.angle_mean, spec.angle_std));
  const double tilt_dir = rng.uniform(0.0, 2.0 * M_PI);
  const Eigen::Vector3d tilt_axis =
      std::cos(tilt_dir) * u + std::sin(tilt_dir) * v;
  const Eigen::Vector3d axis_true = exp_so3(tilt * tilt_axis) * axis;
  const Eigen::Vector3d shaft_true =
      tip_true - (tip_nominal - shaft_nominal).norm() * axis_true;

  SwabObservation obs;
  obs.tip_pixel = camera.project(tip_true);
  obs.shaft_pixel = camera.project(shaft_true);
  obs.tip_schematic = camera.to_camera(tip_nominal);
  obs.shaft_schematic = camera.to_camera(shaft_nominal);
  obs.true_tip = camera.to_camera(tip_true);
  obs.true_shaft = camera.to_camera(shaft_true);
  return obs;
}

SceneConfig SceneConfig::defaults() {
  SceneConfig cfg;
  cfg.camera.K << 617.0, 0.0, 424.0, 0.0, 617.0, 240.0, 0.0, 0.0, 1.0;
  cfg.camera.width = 848;
  cfg.camera.height = 480;
  cfg.camera.near = 0.16;
  cfg.camera.far = 3.0;
  cfg.camera.depth_sigma = 0.002;
  return cfg;
}

SceneConfig SceneConfig::from_file(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  SceneConfig cfg = SceneConfig::defaults();
  cfg.camera.K(0, 0) = kv.get_double_or("camera.fx", cfg.camera.K(0, 0));
  cfg.camera.K(1, 1) = kv.get_double_or("camera.fy", cfg.camera.K(1, 1));
  cfg.camera.K(0, 2) = kv.get_double_or("camera.cx", cfg.camera.K(0, 2));
  cfg.camera.K(1, 2) = kv.get_double_or("camera.cy", cfg.camera.K(1, 2));
  cfg.camera.width = kv.get_int_or("camera.width", cfg.camera.width);
  cfg.camera.height = kv.get_int_or("camera.height", cfg.camera.height);
  cfg.camera.near = kv.get_double_or("camera.near", cfg.camera.near);
  cfg.camera.far = kv.get_double_or("camera.far", cfg.camera.far);
  cfg.camera.depth_sigma =
      kv.get_double_or("camera.depth_sigma", cfg.camera.depth_sigma);

  cfg.stage2.sigma_pos =
      kv.get_double_or("noise.stage2.sigma_pos", cfg.stage2.sigma_pos);
  cfg.stage2.sigma_rot =
      kv.get_double_or("noise.stage2.sigma_rot", cfg.stage2.sigma_rot);
  cfg.stage3.sigma_pos =
      kv.get_double_or("noise.stage3.sigma_pos", cfg.stage3.sigma_pos);
  cfg.stage3.sigma_rot =
      kv.get_double_or("noise.stage3.sigma_rot", cfg.stage3.sigma_rot);
  const double dropout = kv.get_double_or("noise.dropout", cfg.stage2.p_drop);
  if (dropout < 0.0 || dropout > 1.0) {
    throw ConfigError(kv.name() + ": noise.dropout must lie in [0, 1]");
  }
  cfg.stage2.p_drop = dropout;
  cfg.stage3.p_drop = dropout;

  cfg.swab.offset_mean =
      kv.get_double_or("swab.offset_mean", cfg.swab.offset_mean);
  cfg.swab.offset_std =
      kv.get_double_or("swab.offset_std", cfg.swab.offset_std);
  if (kv.has("swab.angle_mean_deg")) {
    cfg.swab.angle_mean = kv.get_double("swab.angle_mean_deg") * M_PI / 180.0;
  }
  if (kv.has("swab.angle_std_deg")) {
    cfg.swab.angle_std = kv.get_double("swab.angle_std_deg") * M_PI / 180.0;
  }

  cfg.jitter.linear_amplitude =
      kv.get_double_or("jitter.linear_amplitude", cfg.jitter.linear_amplitude);
  cfg.jitter.angular_amplitude = kv.get_double_or(
      "jitter.angular_amplitude", cfg.jitter.angular_amplitude);
  cfg.jitter.frequency =
      kv.get_double_or("jitter.frequency", cfg.jitter.frequency);

  cfg.seed = static_cast<std::uint64_t>(kv.get_int_or(
      "seed", static_cast<int>(cfg.seed)));
  kv.check_all_consumed();
  cfg.camera.validate();
  return cfg;
}

}  // namespace npswab
