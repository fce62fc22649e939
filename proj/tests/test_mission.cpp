#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "npswab/errors.hpp"
#include "npswab/geometry.hpp"
#include "npswab/kinematics.hpp"
#include "npswab/lut.hpp"
#include "npswab/mission.hpp"
#include "npswab/perception.hpp"
#include "npswab/rng.hpp"
#include "npswab/scene.hpp"

using namespace npswab;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "npswab_mission_test";
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

ConeStartSpec single_cell_spec(double phi, double r, double z) {
  ConeStartSpec spec;
  spec.phi_min = phi - 0.01;
  spec.phi_max = phi + 0.01;
  spec.r_min = r - 0.01;
  spec.r_max = r + 0.01;
  spec.z_min = z - 0.01;
  spec.z_max = z + 0.01;
  spec.n_phi = spec.n_r = spec.n_z = 1;
  return spec;
}

ConeEndSpec small_end_spec() {
  ConeEndSpec spec;
  spec.n_phi = 2;
  spec.n_zeta = 4;
  spec.n_theta_x = 1;
  spec.n_theta_y = 1;
  return spec;  // 8 targets
}

const KinematicChain& chain() {
  static const KinematicChain instance = KinematicChain::reference_chain();
  return instance;
}

/// Shared one-cell station table in front of which all test faces sit. The
/// radius matches the outermost ring of the full-size grid, which is the
/// ring every sampled face is assigned to.
constexpr double kTestCellRadius = 0.68 - 0.5 * 0.20 / 3;  // 0.6467

const LutTable& test_table() {
  static const LutTable table =
      build_table(chain(), single_cell_spec(0.0, kTestCellRadius, 1.4),
                  small_end_spec(), 32, 99);
  return table;
}

/// All stochastic scene effects turned off.
SceneConfig noiseless_scene() {
  SceneConfig scene = SceneConfig::defaults();
  scene.stage2 = NoiseSpec{0.0, 0.0, 0.0};
  scene.stage3 = NoiseSpec{0.0, 0.0, 0.0};
  scene.swab = SwabPerturbSpec{0.0, 0.0, 0.0, 0.0};
  scene.jitter.linear_amplitude = 0.0;
  scene.jitter.angular_amplitude = 0.0;
  scene.camera.depth_sigma = 0.0;
  return scene;
}

/// Face placed dead ahead of the test cell on its pitched viewing ray,
/// perfectly aligned with the station heading (the zero-scatter case of the
/// placement sampler).
Pose centered_face_pose(double depth = 0.32) {
  const ConeStartSpec& spec = test_table().start_spec;
  const double pitch = spec.pitch;
  Matrix3d station = Matrix3d::Zero();
  station.col(0) = Vector3d(0.0, -1.0, 0.0);
  station.col(1) = Vector3d(std::sin(pitch), 0.0, -std::cos(pitch));
  station.col(2) = Vector3d(std::cos(pitch), 0.0, std::sin(pitch));
  Pose face;
  face.position = Vector3d(kTestCellRadius + depth * std::cos(pitch), 0.0,
                           1.4 + depth * std::sin(pitch) + 0.03);
  face.rotation = station * desired_face_alignment(pitch);
  return face;
}

RelativeTarget error_of(double position_norm, double rotation_angle) {
  RelativeTarget e;
  e.translation = Vector3d(position_norm, 0.0, 0.0);
  e.rotation = exp_so3(Vector3d(0.0, rotation_angle, 0.0));
  return e;
}

LutTable infeasible_table() {
  LutTable table;
  table.start_spec = single_cell_spec(0.0, kTestCellRadius, 1.4);
  table.end_spec = small_end_spec();
  table.seed = 7;
  table.candidates_per_cell = 1;
  table.entries.resize(1);
  table.entries[0].start_pose = table.start_spec.cell_pose(0, 0, 0);
  table.entries[0].q_best = Eigen::VectorXd::Zero(chain().dof());
  table.entries[0].reach_count = 0;
  table.entries[0].total_targets = 8;
  return table;
}

}  // namespace

TEST_CASE("stage transition debounces threshold crossings") {
  StageContext ctx;
  ctx.stage = Stage::Approach;
  ctx.thresholds = StageThresholds{0.010, 2.0 * M_PI / 180.0};
  ctx.required_streak = 3;

  const RelativeTarget good = error_of(0.004, 0.6 * M_PI / 180.0);
  const RelativeTarget bad_pos = error_of(0.020, 0.6 * M_PI / 180.0);
  const RelativeTarget bad_rot = error_of(0.004, 3.0 * M_PI / 180.0);

  SUBCASE("errors above either threshold keep the stage and reset streak") {
    StageContext c = stage_transition(ctx, good);
    CHECK(c.stage == Stage::Approach);
    CHECK(c.streak == 1);
    c = stage_transition(c, bad_pos);
    CHECK(c.stage == Stage::Approach);
    CHECK(c.streak == 0);
    c = stage_transition(c, good);
    c = stage_transition(c, bad_rot);
    CHECK(c.streak == 0);
  }

  SUBCASE("a full streak advances exactly one stage") {
    StageContext c = ctx;
    for (int i = 0; i < 2; ++i) {
      c = stage_transition(c, good);
      CHECK(c.stage == Stage::Approach);
    }
    c = stage_transition(c, good);
    CHECK(c.stage == Stage::FinalAlign);
    CHECK(c.streak == 0);
  }

  SUBCASE("a single dip below thresholds does not advance") {
    StageContext c = stage_transition(ctx, good);
    c = stage_transition(c, bad_pos);
    c = stage_transition(c, good);
    c = stage_transition(c, good);
    CHECK(c.stage == Stage::Approach);  // streak broken mid-way
    CHECK(c.streak == 2);
  }

  SUBCASE("the terminal stage is absorbing") {
    StageContext c = ctx;
    c.stage = Stage::Done;
    c = stage_transition(c, good);
    CHECK(c.stage == Stage::Done);
  }
}

TEST_CASE("face placement samples stay inside the pre-approach shell") {
  ConeStartSpec spec;  // full-size station grid
  Rng rng(2024);
  const double phi_span = spec.phi_max - spec.phi_min;
  const double z_span = spec.z_max - spec.z_min;
  const double r_outer =
      spec.r_max - 0.5 * (spec.r_max - spec.r_min) / spec.n_r;
  const double ct = std::cos(spec.pitch), st = std::sin(spec.pitch);

  for (int i = 0; i < 200; ++i) {
    const Pose face = sample_face_pose(spec, rng);
    const double r = std::hypot(face.position.x(), face.position.y());
    const double phi = std::atan2(face.position.y(), face.position.x());
    CHECK(r >= r_outer + 0.30 * ct - 1e-12);
    CHECK(r <= r_outer + 0.35 * ct + 1e-12);
    CHECK(phi >= spec.phi_min + phi_span / 6.0 - 1e-12);
    CHECK(phi <= spec.phi_max - phi_span / 6.0 + 1e-12);
    CHECK(face.position.z() >= spec.z_min + 0.35 * z_span + 0.30 * st + 0.03 -
                                   1e-12);
    // The climb above the station is subtracted from the top of the band, so
    // the face itself stays inside the central band of the grid.
    CHECK(face.position.z() <= spec.z_max - 0.35 * z_span + 1e-12);
    CHECK((face.rotation.transpose() * face.rotation - Matrix3d::Identity())
              .norm() < 1e-12);
    CHECK(face.rotation.determinant() == doctest::Approx(1.0));
    // Upright and looking roughly inward: the face normal (+z out of the
    // face) opposes the radial direction.
    const Vector3d radial(std::cos(phi), std::sin(phi), 0.0);
    CHECK(face.rotation.col(2).dot(radial) < -0.8);
  }

  Rng a(77), b(77);
  const Pose pa = sample_face_pose(spec, a);
  const Pose pb = sample_face_pose(spec, b);
  CHECK((pa.position - pb.position).norm() == 0.0);
  CHECK((pa.rotation - pb.rotation).norm() == 0.0);
}

TEST_CASE("noiseless static trial reaches the nostril") {
  MissionParams params;
  params.face_pose = centered_face_pose();
  const TrialResult result =
      run_trial(chain(), test_table(), noiseless_scene(), 11, params);

  CHECK(result.outcome == TrialOutcome::Success);
  CHECK(result.reached_nostril);
  CHECK(result.terminal_distance < 1e-3);
  CHECK(std::abs(result.terminal_pitch_error_deg) < 0.5);
  CHECK(std::abs(result.terminal_yaw_error_deg) < 0.5);
  CHECK(result.duration > 1.0);
  CHECK(result.duration < 40.0);
  CHECK(result.approach_noise.samples > 0);
  CHECK(result.final_align_noise.samples > 0);
  // Noiseless estimates track truth to numerical precision.
  CHECK(result.approach_noise.raw_position_std < 1e-6);
  CHECK(result.final_align_noise.filtered_position_std < 1e-6);
  CHECK(result.extension > 0.0);
}

TEST_CASE("trials are deterministic and logs byte-identical") {
  const fs::path dir = temp_dir();
  MissionParams params;
  params.face_pose = centered_face_pose();

  MissionParams first = params;
  first.log_path = (dir / "run_a.csv").string();
  MissionParams second = params;
  second.log_path = (dir / "run_b.csv").string();

  const TrialResult a =
      run_trial(chain(), test_table(), noiseless_scene(), 42, first);
  const TrialResult b =
      run_trial(chain(), test_table(), noiseless_scene(), 42, second);

  CHECK(a.outcome == b.outcome);
  CHECK(a.terminal_distance == b.terminal_distance);
  CHECK(a.terminal_pitch_error_deg == b.terminal_pitch_error_deg);
  CHECK(a.terminal_yaw_error_deg == b.terminal_yaw_error_deg);
  CHECK(a.duration == b.duration);
  CHECK(a.extension == b.extension);
  CHECK(a.approach_noise.samples == b.approach_noise.samples);
  CHECK(read_bytes(first.log_path) == read_bytes(second.log_path));
}

TEST_CASE("trial log records a consistent closed-loop history") {
  const fs::path dir = temp_dir();
  MissionParams params;
  params.face_pose = centered_face_pose();
  params.log_path = (dir / "history.csv").string();
  const TrialResult result =
      run_trial(chain(), test_table(), noiseless_scene(), 5, params);
  CHECK(result.outcome == TrialOutcome::Success);

  std::ifstream in(params.log_path);
  REQUIRE(in.good());
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header.rfind("t,stage,raw_px", 0) == 0);

  const int dof = chain().dof();
  const int n_cols = 2 + 6 + 6 + 1 + 6 + dof + dof;
  const Eigen::VectorXd lower = chain().lower_limits();
  const Eigen::VectorXd upper = chain().upper_limits();
  std::vector<double> prev_q, prev_vq;
  double prev_t = 0.0;
  int prev_stage = 0;
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    REQUIRE(static_cast<int>(cells.size()) == n_cols);

    const double t = std::stod(cells[0]);
    const int stage = std::stoi(cells[1]);
    CHECK(stage >= 1);
    CHECK(stage <= 3);
    std::vector<double> q(dof), vq(dof);
    for (int i = 0; i < dof; ++i) {
      vq[i] = std::stod(cells[n_cols - 2 * dof + i]);
      q[i] = std::stod(cells[n_cols - dof + i]);
    }
    if (rows > 0) {
      CHECK(stage >= prev_stage);  // stages never move backward
      const double dt = t - prev_t;
      CHECK(dt == doctest::Approx(0.01).epsilon(1e-6));
      for (int i = 0; i < dof; ++i) {
        // Logged joint state integrates the logged joint velocities,
        // clamped to the position limits.
        const double expected =
            std::clamp(prev_q[i] + prev_vq[i] * dt, lower[i], upper[i]);
        CHECK(q[i] == doctest::Approx(expected).epsilon(1e-6));
      }
    }
    prev_q = q;
    prev_vq = vq;
    prev_t = t;
    prev_stage = stage;
    ++rows;
  }
  CHECK(rows > 200);
  CHECK(prev_stage == 3);  // ends in final alignment
}

TEST_CASE("infeasible placements are reported without running") {
  MissionParams params;
  params.face_pose = centered_face_pose();
  const TrialResult result =
      run_trial(chain(), infeasible_table(), noiseless_scene(), 3, params);
  CHECK(result.outcome == TrialOutcome::LutInfeasible);
  CHECK_FALSE(result.reached_nostril);
  CHECK(result.duration == 0.0);
}

TEST_CASE("stages that cannot converge time out") {
  MissionParams params;
  params.face_pose = centered_face_pose();
  params.stage_timeout = 0.05;  // shorter than any debounce window
  const TrialResult result =
      run_trial(chain(), test_table(), noiseless_scene(), 8, params);
  CHECK(result.outcome == TrialOutcome::StageTimeout);
  CHECK_FALSE(result.reached_nostril);
}

TEST_CASE("workspace extension sweeps a monotone prefix") {
  const Eigen::VectorXd q = test_table().entries[0].q_best;
  const double full = workspace_extension(chain(), q, 0.2, 0.30, 0.005);
  CHECK(full > 0.05);
  CHECK(full <= 0.30 + 1e-12);
  // The sweep warm-starts each step from the previous solution, so a capped
  // sweep reproduces the head of the full one exactly.
  const double capped = workspace_extension(chain(), q, 0.2, 0.05, 0.005);
  CHECK(capped == doctest::Approx(std::min(full, 0.05)).epsilon(1e-12));
  // The reported reach is a whole number of steps.
  const double steps = full / 0.005;
  CHECK(std::abs(steps - std::round(steps)) < 1e-9);

  // A contorted start near the joint limits cannot extend as far.
  const Eigen::VectorXd upper = chain().upper_limits();
  Eigen::VectorXd cramped = chain().home();
  for (int i = 0; i < cramped.size(); ++i) {
    cramped[i] = 0.97 * (i % 2 == 0 ? 1.0 : -1.0) * upper[i];
  }
  const double limited = workspace_extension(chain(), cramped, 0.2);
  CHECK(limited < full);
}

TEST_CASE("outcome scoring aggregates trials") {
  SUBCASE("an empty batch is rejected") {
    CHECK_THROWS_AS(score_outcomes({}), DimensionMismatch);
  }

  TrialResult success;
  success.outcome = TrialOutcome::Success;
  success.reached_nostril = true;
  success.terminal_distance = 0.0012;
  success.terminal_pitch_error_deg = 1.5;
  success.terminal_yaw_error_deg = -2.0;
  success.duration = 12.0;
  success.extension = 0.180;
  success.approach_noise = StageNoiseStats{0.008, 0.002, 0.03, 0.01, 100};

  SUBCASE("a single successful trial reports its own statistics") {
    const BatchSummary s = score_outcomes({success});
    CHECK(s.n_trials == 1);
    CHECK(s.n_success == 1);
    CHECK(s.success_rate == 1.0);
    CHECK(s.mean_pitch_error_deg == doctest::Approx(1.5));
    CHECK(s.std_pitch_error_deg == 0.0);
    CHECK(s.mean_yaw_error_deg == doctest::Approx(-2.0));
    CHECK(s.mean_terminal_distance == doctest::Approx(0.0012));
    CHECK(s.median_extension == doctest::Approx(0.180));
    CHECK(s.extension_reach_rate_130mm == 1.0);
    CHECK(s.approach_noise.raw_position_std == doctest::Approx(0.008));
    CHECK(s.approach_noise.position_ratio() == doctest::Approx(4.0));
  }

  SUBCASE("mixed outcomes are counted and filtered correctly") {
    TrialResult missed = success;
    missed.outcome = TrialOutcome::MissedTarget;
    missed.reached_nostril = false;
    missed.terminal_pitch_error_deg = 99.0;  // must not enter angle stats
    missed.extension = 0.080;
    TrialResult infeasible;
    infeasible.outcome = TrialOutcome::LutInfeasible;
    TrialResult timeout = success;
    timeout.outcome = TrialOutcome::StageTimeout;
    timeout.extension = 0.120;

    const BatchSummary s =
        score_outcomes({success, missed, infeasible, timeout});
    CHECK(s.n_trials == 4);
    CHECK(s.n_success == 1);
    CHECK(s.n_missed == 1);
    CHECK(s.n_infeasible == 1);
    CHECK(s.n_timeout == 1);
    CHECK(s.success_rate == doctest::Approx(0.25));
    CHECK(s.mean_pitch_error_deg == doctest::Approx(1.5));
    CHECK(s.extensions.size() == 3);  // infeasible trials have no terminal
    CHECK(s.median_extension == doctest::Approx(0.120));
    CHECK(s.extension_reach_rate_130mm == doctest::Approx(1.0 / 3.0));
  }

  SUBCASE("noise pooling is sample-weighted in variance") {
    TrialResult other = success;
    other.approach_noise = StageNoiseStats{0.016, 0.002, 0.03, 0.01, 300};
    const BatchSummary s = score_outcomes({success, other});
    const double expect =
        std::sqrt((100.0 * 0.008 * 0.008 + 300.0 * 0.016 * 0.016) / 400.0);
    CHECK(s.approach_noise.raw_position_std == doctest::Approx(expect));
    CHECK(s.approach_noise.samples == 400);
  }

  SUBCASE("scoring is idempotent") {
    const BatchSummary s1 = score_outcomes({success});
    const BatchSummary s2 = score_outcomes({success});
    CHECK(s1.to_text() == s2.to_text());
  }
}

TEST_CASE("noisy trial converges with attenuated filtered errors") {
  const SceneConfig scene = SceneConfig::defaults();
  MissionParams params;  // sampled face placement
  const TrialResult result =
      run_trial(chain(), test_table(), scene, 2718, params);

  CHECK(result.outcome == TrialOutcome::Success);
  CHECK(result.terminal_distance < 0.005);
  CHECK(result.duration < 50.0);
  CHECK(result.approach_noise.samples > 50);
  CHECK(result.final_align_noise.samples > 50);
  // The filter must beat the raw decoder by a clear margin on approach.
  CHECK(result.approach_noise.position_ratio() > 2.5);
  CHECK(result.approach_noise.rotation_ratio() > 2.0);
  CHECK(result.final_align_noise.position_ratio() > 1.5);
}

TEST_CASE("batch runs are reproducible across thread counts") {
  const fs::path dir_a = temp_dir() / "batch_a";
  const fs::path dir_b = temp_dir() / "batch_b";
  fs::create_directories(dir_a);
  fs::create_directories(dir_b);

  MissionParams params;
  params.face_pose = centered_face_pose();
  const std::vector<TrialResult> serial =
      run_batch(chain(), test_table(), noiseless_scene(), 100, 3, params, 1,
                dir_a.string());
  const std::vector<TrialResult> threaded =
      run_batch(chain(), test_table(), noiseless_scene(), 100, 3, params, 2,
                dir_b.string());

  REQUIRE(serial.size() == 3);
  REQUIRE(threaded.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(serial[i].seed == 100 + static_cast<std::uint64_t>(i));
    CHECK(serial[i].outcome == threaded[i].outcome);
    CHECK(serial[i].terminal_distance == threaded[i].terminal_distance);
    CHECK(serial[i].duration == threaded[i].duration);
    CHECK(serial[i].extension == threaded[i].extension);
    const std::string name = "trial_" + std::to_string(serial[i].seed) + ".csv";
    CHECK(read_bytes((dir_a / name).string()) ==
          read_bytes((dir_b / name).string()));
  }
  CHECK(score_outcomes(serial).to_text() == score_outcomes(threaded).to_text());
}

TEST_CASE("mission parameters are validated") {
  const MissionParams good;
  CHECK_NOTHROW(good.validate());

  MissionParams p = good;
  p.observation_rate = 120.0;  // faster than control
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.control_rate = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.debounce_ticks = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.final_align.position = -0.001;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.success_distance = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.extension_step = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.control.gain = -0.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.filter.alpha_state = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
