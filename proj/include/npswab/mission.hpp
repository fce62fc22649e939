#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "npswab/geometry.hpp"
#include "npswab/kinematics.hpp"
#include "npswab/lut.hpp"
#include "npswab/pbvs.hpp"
#include "npswab/perception.hpp"
#include "npswab/rng.hpp"
#include "npswab/scene.hpp"
#include "npswab/ukfm.hpp"

namespace npswab {

/// Trial phases, in execution order. `Done` is the terminal marker after the
/// final alignment converges; logs only ever show 1-3.
enum class Stage { Sentry = 1, Approach = 2, FinalAlign = 3, Done = 4 };

enum class TrialOutcome {
  Success,        // converged and the tip ended within the success radius
  MissedTarget,   // converged but the tip ended outside the success radius
  LutInfeasible,  // no feasible start configuration for the face position
  StageTimeout,   // a stage failed to converge within its time budget
};

struct StageThresholds {
  double position = 0.010;  // metres
  double rotation = 2.0 * M_PI / 180.0;  // radians
};

/// Progress tracker for the error-driven stages. Advancing requires the
/// filtered error to sit below both thresholds for `required_streak`
/// consecutive ticks; the stage index never moves backward.
struct StageContext {
  Stage stage = Stage::Sentry;
  double entry_time = 0.0;  // seconds, trial clock
  StageThresholds thresholds;
  double timeout = 60.0;    // seconds per stage
  int required_streak = 10;
  int streak = 0;
};

/// Debounced stage advance on one tick's filtered error. Keeps thresholds
/// and entry time unchanged; the trial loop re-seeds them after an advance.
StageContext stage_transition(const StageContext& ctx,
                              const RelativeTarget& filtered_error);

/// Steady-state noise measured over the trailing 40% of a stage's accepted
/// observations: per-axis deviation of the raw and filtered pose estimates
/// from the simulator truth, averaged over the three axes of each block.
struct StageNoiseStats {
  double raw_position_std = 0.0;       // metres
  double filtered_position_std = 0.0;  // metres
  double raw_rotation_std = 0.0;       // radians
  double filtered_rotation_std = 0.0;  // radians
  int samples = 0;

  double position_ratio() const {
    return filtered_position_std > 0.0
               ? raw_position_std / filtered_position_std
               : 0.0;
  }
  double rotation_ratio() const {
    return filtered_rotation_std > 0.0
               ? raw_rotation_std / filtered_rotation_std
               : 0.0;
  }
};

struct TrialResult {
  TrialOutcome outcome = TrialOutcome::StageTimeout;
  bool reached_nostril = false;
  double terminal_distance = std::numeric_limits<double>::infinity();  // m
  double terminal_pitch_error_deg = 0.0;  // achieved minus nominal approach
  double terminal_yaw_error_deg = 0.0;
  double duration = 0.0;                  // simulated seconds
  double extension = 0.0;                 // workspace extension achieved, m
  std::string log_path;                   // empty when logging was off
  std::uint64_t seed = 0;
  StageNoiseStats approach_noise;
  StageNoiseStats final_align_noise;
};

struct MissionParams {
  double control_rate = 100.0;      // Hz
  double observation_rate = 30.0;   // Hz; must not exceed the control rate
  StageThresholds approach{0.010, 2.0 * M_PI / 180.0};
  StageThresholds final_align{0.003, 1.0 * M_PI / 180.0};
  int debounce_ticks = 10;
  double stage_timeout = 60.0;      // seconds
  double stage1_joint_speed = 1.0;  // rad/s, synchronized joint move
  double success_distance = 0.005;  // metres, tip-to-nostril criterion
  double standoff = 0.30;           // metres, camera-to-nostril at stage 2
  double approach_pitch = 0.2;      // radians, nostril approach elevation
  double outlier_threshold = 0.5;   // radians, decoded-rotation jump gate
  double extension_step = 0.005;    // metres
  double extension_max = 0.30;      // metres
  ControlParams control;
  UkfParams filter = UkfParams::defaults();
  std::optional<Pose> face_pose;    // explicit placement; sampled when absent
  std::string log_path;             // per-tick CSV; empty disables logging

  void validate() const;  // throws ConfigError
};

/// Face placement drawn from the pre-approach shell: positioned ahead of the
/// station band, upright, looking horizontally inward, with a small random
/// orientation scatter.
Pose sample_face_pose(const ConeStartSpec& spec, Rng& rng);

/// One full trial: sentry move from the table, then visual approach and
/// final alignment; deterministic in (seed, configs, table).
TrialResult run_trial(const KinematicChain& chain, const LutTable& table,
                      const SceneConfig& scene, std::uint64_t seed,
                      const MissionParams& params = MissionParams{});

/// Largest tip displacement d <= max_extend, swept in `step` increments,
/// reachable from q_terminal by iterated IK along the current heading
/// re-pitched `pitch` radians upward, without limit or collision violations.
double workspace_extension(const KinematicChain& chain,
                           const Eigen::VectorXd& q_terminal,
                           double pitch = 0.2, double max_extend = 0.30,
                           double step = 0.005);

/// Seeds base_seed + i for i in [0, count). `n_threads <= 0` picks hardware
/// concurrency; results are ordered by trial index regardless of threading.
/// When `log_dir` is nonempty each trial writes `trial_<seed>.csv` there.
std::vector<TrialResult> run_batch(const KinematicChain& chain,
                                   const LutTable& table,
                                   const SceneConfig& scene,
                                   std::uint64_t base_seed, int count,
                                   const MissionParams& params = MissionParams{},
                                   int n_threads = 1,
                                   const std::string& log_dir = "");

struct BatchSummary {
  int n_trials = 0;
  int n_success = 0;
  int n_missed = 0;
  int n_infeasible = 0;
  int n_timeout = 0;
  double success_rate = 0.0;
  double mean_pitch_error_deg = 0.0;
  double std_pitch_error_deg = 0.0;
  double mean_yaw_error_deg = 0.0;
  double std_yaw_error_deg = 0.0;
  double mean_duration = 0.0;
  double mean_terminal_distance = 0.0;
  StageNoiseStats approach_noise;     // sample-weighted means over trials
  StageNoiseStats final_align_noise;
  std::vector<double> extensions;     // one per trial with a terminal config
  double median_extension = 0.0;
  double extension_reach_rate_130mm = 0.0;

  std::string to_text() const;              // human-readable table
  void write_csv(const std::string& path) const;  // throws WriteError
};

/// Aggregate statistics over a batch; angle statistics cover successful
/// trials, extension statistics every trial that reached a terminal
/// configuration. Throws DimensionMismatch on an empty list.
BatchSummary score_outcomes(const std::vector<TrialResult>& results);

}  // namespace npswab
