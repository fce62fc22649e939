#include "npswab/mission.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>
#include <vector>

#include "npswab/errors.hpp"

namespace npswab {
namespace {

// Independent random-stream tags within one trial seed.
constexpr std::uint64_t kPlacementStream = 0x706c6163;  // face placement
constexpr std::uint64_t kFaceStream = 0x66616365;       // face shape
constexpr std::uint64_t kObservationStream = 0x6f627376;
constexpr std::uint64_t kSwabStream = 0x73776162;       // per-trial mount error

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Per-tick CSV writer; a blank cell means "not available this tick".
class TrialLog {
 public:
  TrialLog(const std::string& path, int dof) : dof_(dof) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    if (!out_) throw WriteError("cannot open trial log " + path);
    out_ << "t,stage";
    const char* pose_cols[] = {"px", "py", "pz", "rx", "ry", "rz"};
    for (const char* c : pose_cols) out_ << ",raw_" << c;
    for (const char* c : pose_cols) out_ << ",filt_" << c;
    out_ << ",cov_trace,vc_vx,vc_vy,vc_vz,vc_wx,vc_wy,vc_wz";
    for (int i = 1; i <= dof_; ++i) out_ << ",vq_" << i;
    for (int i = 1; i <= dof_; ++i) out_ << ",q_" << i;
    out_ << "\n";
  }

  bool enabled() const { return out_.is_open(); }

  void row(double t, int stage, const std::optional<Vector6d>& raw,
           const std::optional<Vector6d>& filtered,
           std::optional<double> cov_trace, const std::optional<Twist>& vc,
           const Eigen::VectorXd& vq, const Eigen::VectorXd& q) {
    if (!enabled()) return;
    out_ << format_value(t) << ',' << stage;
    auto emit6 = [&](const std::optional<Vector6d>& v) {
      for (int i = 0; i < 6; ++i) {
        out_ << ',';
        if (v) out_ << format_value((*v)(i));
      }
    };
    emit6(raw);
    emit6(filtered);
    out_ << ',';
    if (cov_trace) out_ << format_value(*cov_trace);
    emit6(vc ? std::optional<Vector6d>(vc->as_vector()) : std::nullopt);
    for (int i = 0; i < dof_; ++i) out_ << ',' << format_value(vq(i));
    for (int i = 0; i < dof_; ++i) out_ << ',' << format_value(q(i));
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  int dof_;
};

Vector6d pose_chart(const Pose& pose) {
  Vector6d v;
  v << pose.position, log_so3(pose.rotation);
  return v;
}

// Steady-state estimation-error samples for one stage; reduced over the
// trailing 40% so the convergence transient does not pollute the statistic.
struct NoiseBuffer {
  std::vector<Vector3d> raw_pos, raw_rot, filt_pos, filt_rot;

  void push(const Vector3d& rp, const Vector3d& rr, const Vector3d& fp,
            const Vector3d& fr) {
    raw_pos.push_back(rp);
    raw_rot.push_back(rr);
    filt_pos.push_back(fp);
    filt_rot.push_back(fr);
  }

  static double tail_std(const std::vector<Vector3d>& samples) {
    const int n = static_cast<int>(samples.size());
    const int start = (n * 3) / 5;
    const int count = n - start;
    if (count < 2) return 0.0;
    Vector3d mean = Vector3d::Zero();
    for (int i = start; i < n; ++i) mean += samples[i];
    mean /= count;
    Vector3d var = Vector3d::Zero();
    for (int i = start; i < n; ++i) {
      var += (samples[i] - mean).cwiseAbs2();
    }
    var /= (count - 1);
    return var.cwiseSqrt().mean();
  }

  StageNoiseStats stats() const {
    StageNoiseStats s;
    s.samples = static_cast<int>(raw_pos.size());
    s.raw_position_std = tail_std(raw_pos);
    s.raw_rotation_std = tail_std(raw_rot);
    s.filtered_position_std = tail_std(filt_pos);
    s.filtered_rotation_std = tail_std(filt_rot);
    return s;
  }
};

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / (v.size() - 1));
}

}  // namespace

void MissionParams::validate() const {
  if (!(control_rate > 0.0) || !(observation_rate > 0.0) ||
      observation_rate > control_rate + 1e-9) {
    throw ConfigError(
        "rates must be positive with observation_rate <= control_rate");
  }
  for (const StageThresholds* th : {&approach, &final_align}) {
    if (!(th->position > 0.0) || !(th->rotation > 0.0)) {
      throw ConfigError("stage thresholds must be positive");
    }
  }
  if (debounce_ticks < 1) throw ConfigError("debounce_ticks must be >= 1");
  if (!(stage_timeout > 0.0)) throw ConfigError("stage_timeout must be > 0");
  if (!(stage1_joint_speed > 0.0)) {
    throw ConfigError("stage1_joint_speed must be > 0");
  }
  if (!(success_distance > 0.0) || !(standoff > 0.0)) {
    throw ConfigError("success_distance and standoff must be > 0");
  }
  if (!(extension_step > 0.0) || !(extension_max >= extension_step)) {
    throw ConfigError("extension sweep must have 0 < step <= max");
  }
  control.validate();
  filter.validate();
}

StageContext stage_transition(const StageContext& ctx,
                              const RelativeTarget& filtered_error) {
  StageContext next = ctx;
  if (ctx.stage == Stage::Done) return next;
  const double pos = filtered_error.translation.norm();
  const double rot = log_so3(filtered_error.rotation).norm();
  if (pos < ctx.thresholds.position && rot < ctx.thresholds.rotation) {
    ++next.streak;
    if (next.streak >= ctx.required_streak) {
      next.stage = static_cast<Stage>(static_cast<int>(ctx.stage) + 1);
      next.streak = 0;
    }
  } else {
    next.streak = 0;
  }
  return next;
}

Pose sample_face_pose(const ConeStartSpec& spec, Rng& rng) {
  // The sentry camera pitches upward and has a narrow vertical field of
  // view, so the face must sit on a station's viewing ray, not merely at
  // station height: centered in yaw and height on the central band of the
  // grid, pushed `depth` metres along the pitched forward axis of the
  // outermost station ring, and lifted slightly so the nostril (below the
  // face center) stays well inside the image.
  const double phi_span = spec.phi_max - spec.phi_min;
  const double phi = rng.uniform(spec.phi_min + phi_span / 6.0,
                                 spec.phi_max - phi_span / 6.0);
  // The depth band is pinched from both sides by the arm: closer faces pull
  // the stand-off pose inside the arm's folding range, farther ones push the
  // extension sweep past its outstretched reach.
  const double depth = rng.uniform(0.30, 0.35);
  // Keep the face itself — the point the station table is queried with —
  // inside the central band of the grid. The face rides `depth * sin(pitch)
  // + 0.03` above its station, so that climb comes off the top of the band;
  // otherwise high placements snap to the uppermost ring of stations, whose
  // extension fan grazes the edge of the arm's reach.
  const double z_span = spec.z_max - spec.z_min;
  const double climb = depth * std::sin(spec.pitch) + 0.03;
  const double z_view = rng.uniform(spec.z_min + 0.35 * z_span,
                                    spec.z_max - 0.35 * z_span - climb);
  const double r_outer =
      spec.r_max - 0.5 * (spec.r_max - spec.r_min) / spec.n_r;

  const double cp = std::cos(phi), sp = std::sin(phi);
  const double ct = std::cos(spec.pitch), st = std::sin(spec.pitch);
  Matrix3d station_rotation;
  station_rotation.col(0) = Vector3d(sp, -cp, 0.0);
  station_rotation.col(1) = Vector3d(st * cp, st * sp, -ct);
  station_rotation.col(2) = Vector3d(ct * cp, ct * sp, st);

  Pose face;
  const double r_face = r_outer + depth * ct;
  face.position =
      Vector3d(r_face * cp, r_face * sp, z_view + depth * st + 0.03);
  // At convergence the camera sees the face as desired_face_alignment();
  // composing that view with the station heading yields an upright face
  // looking horizontally inward. Scatter the orientation around it.
  const Vector3d wobble(rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12),
                        rng.uniform(-0.12, 0.12));
  face.rotation =
      station_rotation * desired_face_alignment(spec.pitch) * exp_so3(wobble);
  return face;
}

double workspace_extension(const KinematicChain& chain,
                           const Eigen::VectorXd& q_terminal, double pitch,
                           double max_extend, double step) {
  // Extension heading: current horizontal bearing of the swab, re-pitched.
  const Vector3d axis = chain.swab_axis(q_terminal);
  Vector3d heading(axis.x(), axis.y(), 0.0);
  if (heading.norm() < 1e-9) heading = Vector3d(1, 0, 0);
  heading.normalize();
  const Vector3d direction =
      std::cos(pitch) * heading + std::sin(pitch) * Vector3d::UnitZ();

  const Pose flange0 = chain.forward_kinematics(q_terminal);
  Eigen::VectorXd q = q_terminal;
  double reached = 0.0;
  for (double d = step; d <= max_extend + 1e-12; d += step) {
    Pose target = flange0;
    target.position = flange0.position + d * direction;
    const IkResult res = chain.solve_ik(target, q);
    if (!res.ok()) break;
    if (!chain.within_limits(res.q)) break;
    if (chain.check_self_collision(res.q)) break;
    q = res.q;
    reached = d;
  }
  return reached;
}

TrialResult run_trial(const KinematicChain& chain, const LutTable& table,
                      const SceneConfig& scene, std::uint64_t seed,
                      const MissionParams& params) {
  params.validate();
  TrialResult result;
  result.seed = seed;
  result.log_path = params.log_path;

  const double dt = 1.0 / params.control_rate;
  const double obs_interval = 1.0 / params.observation_rate;
  const int dof = chain.dof();

  auto [model, face] = synthesize_face(derive_seed(seed, kFaceStream));
  face.jitter = scene.jitter;
  if (params.face_pose) {
    face.base_pose = *params.face_pose;
  } else {
    Rng placement(derive_seed(seed, kPlacementStream));
    face.base_pose = sample_face_pose(table.start_spec, placement);
  }
  const Eigen::MatrixXd nostril_rows =
      model.vertices_subset(face.beta, model.nostril_vertices);
  const Vector3d nostril_local = nostril_rows.row(0).transpose();

  const std::uint64_t obs_seed = derive_seed(seed, kObservationStream);
  const std::uint64_t swab_seed = derive_seed(seed, kSwabStream);

  TrialLog log(params.log_path, dof);
  const Eigen::VectorXd zero_vq = Eigen::VectorXd::Zero(dof);

  Eigen::VectorXd q = chain.home();
  double t = 0.0;

  // ---- Stage 1: table lookup and direct joint move to the station. ----
  const LutEntry* entry = nullptr;
  try {
    entry = &table.query(face.base_pose.position);
  } catch (const InfeasibleCell&) {
    result.outcome = TrialOutcome::LutInfeasible;
    return result;
  }

  {
    const Eigen::VectorXd dq = entry->q_best - q;
    const double magnitude = dq.cwiseAbs().maxCoeff();
    const int move_ticks = std::max(
        1, static_cast<int>(
               std::ceil(magnitude / (params.stage1_joint_speed * dt))));
    const Eigen::VectorXd vq = dq / (move_ticks * dt);
    const Eigen::VectorXd q0 = q;
    for (int k = 1; k <= move_ticks; ++k) {
      log.row(t, 1, std::nullopt, std::nullopt, std::nullopt, std::nullopt,
              vq, q);
      q = (k == move_ticks) ? entry->q_best
                            : Eigen::VectorXd(q0 + vq * (k * dt));
      face = step_head_motion(face, dt);
      t += dt;
    }
  }

  // ---- Stages 2-3: perceive -> filter -> control -> integrate. ----
  StageContext ctx;
  ctx.stage = Stage::Approach;
  ctx.entry_time = t;
  ctx.thresholds = params.approach;
  ctx.timeout = params.stage_timeout;
  ctx.required_streak = params.debounce_ticks;

  UkfState state;
  bool filter_ready = false;
  OutlierGate gate(params.outlier_threshold);
  std::optional<SwabPose> swab_fit;
  std::optional<Vector3d> swab_true_tip, swab_true_axis;
  NoiseBuffer approach_buf, final_buf;

  double next_obs = t;
  std::uint64_t frame = 0;
  bool timed_out = false;
  // Terminal refinement: after the final-stage gate trips, keep servoing
  // until the error floor (position below settle_floor, or no new minimum
  // for settle_patience seconds), so the terminal pose is the loop's best
  // rather than the gate-crossing pose.
  const double settle_floor = 5e-4;
  const double settle_patience = 0.5;
  bool settling = false;
  double settle_best = std::numeric_limits<double>::infinity();
  double settle_best_time = 0.0;

  while (true) {
    if (t - ctx.entry_time > ctx.timeout) {
      timed_out = true;
      break;
    }

    CameraModel camera = scene.camera;
    camera.pose = chain.camera_pose(q);
    const Pose face_now = face.pose();
    const Pose truth{camera.to_camera(face_now.act(nostril_local)),
                     camera.pose.rotation.transpose() * face_now.rotation};

    std::optional<Vector6d> raw_chart;
    const bool observe = t + 1e-9 >= next_obs;
    if (observe) {
      next_obs += obs_interval;
      ++frame;
      const bool final_stage = ctx.stage == Stage::FinalAlign;
      const NoiseSpec& noise = final_stage ? scene.stage3 : scene.stage2;
      try {
        const FaceObservation obs = project_face(
            model, face, camera, noise, t, derive_seed(obs_seed, frame));
        const DecodedFacePose decoded = decode_face(obs, camera.K);
        if (decoded.valid && gate.accept(decoded.rotation)) {
          const Pose measurement{decoded.nostril, decoded.rotation};
          raw_chart = pose_chart(measurement);
          if (!filter_ready) {
            state = UkfState{};
            state.X = measurement;
            state.time = t;
            filter_ready = true;
          } else {
            state = update(state, measurement, params.filter);
          }
          NoiseBuffer& buf = final_stage ? final_buf : approach_buf;
          buf.push(measurement.position - truth.position,
                   log_so3(truth.rotation.transpose() * measurement.rotation),
                   state.X.position - truth.position,
                   log_so3(truth.rotation.transpose() * state.X.rotation));
        }
      } catch (const Error&) {
        // Frame unusable (frustum/degeneracy): treat as a dropped frame.
      }
      if (final_stage) {
        try {
          const SwabObservation sobs = observe_swab(
              camera, chain.swab_tip_position(q), chain.swab_shaft_position(q),
              scene.swab, swab_seed);
          swab_fit = fit_swab(sobs, camera.K);
          swab_true_tip = camera.pose.act(sobs.true_tip);
          const Vector3d axis_cam = (sobs.true_tip - sobs.true_shaft);
          swab_true_axis = camera.pose.rotation * axis_cam.normalized();
        } catch (const Error&) {
          // Keep the previous fit; tip and camera are rigidly coupled.
        }
      }
    }

    Twist commanded;
    ControlCommand command;
    command.joint_velocities = zero_vq;
    std::optional<Vector6d> filt_chart;
    std::optional<double> cov_trace;

    if (filter_ready) {
      filt_chart = pose_chart(state.X);
      cov_trace = state.covariance.trace();
      const DecodedFacePose filtered{state.X.rotation, state.X.position, true};

      auto stage_error = [&](Stage stage) {
        if (stage == Stage::FinalAlign) {
          SwabPose swab;
          if (swab_fit) {
            swab = *swab_fit;
          } else {
            // No fit yet: schematic keypoints from the joint state.
            swab.tip = camera.to_camera(chain.swab_tip_position(q));
            swab.shaft = camera.to_camera(chain.swab_shaft_position(q));
            swab.direction = (swab.tip - swab.shaft).normalized();
          }
          return relative_target_stage3(filtered, swab,
                                        params.approach_pitch);
        }
        return relative_target_stage2(filtered, params.standoff,
                                      params.approach_pitch);
      };

      RelativeTarget error = stage_error(ctx.stage);

      if (settling) {
        const double pos = error.translation.norm();
        if (pos < settle_best * (1.0 - 1e-3)) {
          settle_best = pos;
          settle_best_time = t;
        }
        if (pos < settle_floor || t - settle_best_time > settle_patience) {
          break;  // terminal pose reached
        }
      } else {
        const StageContext advanced = stage_transition(ctx, error);
        if (advanced.stage != ctx.stage) {
          ctx = advanced;
          ctx.entry_time = t;
          if (ctx.stage == Stage::FinalAlign) {
            ctx.thresholds = params.final_align;
            error = stage_error(ctx.stage);
          } else if (ctx.stage == Stage::Done) {
            // Gate passed; refine on the final-stage error until the floor.
            ctx.stage = Stage::FinalAlign;
            settling = true;
            settle_best = error.translation.norm();
            settle_best_time = t;
          }
        } else {
          ctx = advanced;
        }
      }

      commanded = camera_twist(error, params.control);
      command = joint_command(chain, q, commanded, params.control);
    }

    log.row(t, static_cast<int>(ctx.stage), raw_chart, filt_chart, cov_trace,
            filter_ready ? std::optional<Twist>(commanded) : std::nullopt,
            command.joint_velocities, q);

    if (filter_ready) {
      state = propagate(state, commanded, dt, params.filter);
    }
    q = chain.clamp_to_limits(q + command.joint_velocities * dt);
    face = step_head_motion(face, dt);
    t += dt;
  }

  // ---- Terminal scoring. ----
  result.duration = t;
  result.approach_noise = approach_buf.stats();
  result.final_align_noise = final_buf.stats();

  // Physical tip: the per-trial mount perturbation applied at the terminal
  // configuration (recomputed; falls back to the last sighting, then to the
  // schematic tip).
  Vector3d tip_world = chain.swab_tip_position(q);
  Vector3d axis_world = chain.swab_axis(q);
  CameraModel camera = scene.camera;
  camera.pose = chain.camera_pose(q);
  try {
    const SwabObservation sobs =
        observe_swab(camera, chain.swab_tip_position(q),
                     chain.swab_shaft_position(q), scene.swab, swab_seed);
    tip_world = camera.pose.act(sobs.true_tip);
    axis_world =
        camera.pose.rotation *
        (sobs.true_tip - sobs.true_shaft).normalized();
  } catch (const Error&) {
    if (swab_true_tip) tip_world = *swab_true_tip;
    if (swab_true_axis) axis_world = *swab_true_axis;
  }

  const Pose face_final = face.pose();
  const Vector3d nostril_world = face_final.act(nostril_local);
  result.terminal_distance = (tip_world - nostril_world).norm();
  result.reached_nostril =
      !timed_out && result.terminal_distance < params.success_distance;

  const Vector3d a = face_final.rotation.transpose() * axis_world;
  const double yaw = std::atan2(a.x(), -a.z());
  const double pitch = std::atan2(-a.y(), std::hypot(a.x(), a.z()));
  result.terminal_yaw_error_deg = yaw * 180.0 / M_PI;
  result.terminal_pitch_error_deg =
      (pitch - params.approach_pitch) * 180.0 / M_PI;

  result.extension =
      workspace_extension(chain, q, params.approach_pitch,
                          params.extension_max, params.extension_step);

  result.outcome = timed_out ? TrialOutcome::StageTimeout
                   : result.reached_nostril ? TrialOutcome::Success
                                            : TrialOutcome::MissedTarget;
  return result;
}

std::vector<TrialResult> run_batch(const KinematicChain& chain,
                                   const LutTable& table,
                                   const SceneConfig& scene,
                                   std::uint64_t base_seed, int count,
                                   const MissionParams& params, int n_threads,
                                   const std::string& log_dir) {
  if (count < 1) throw ConfigError("trial count must be >= 1");
  if (n_threads <= 0) {
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads <= 0) n_threads = 1;
  }
  n_threads = std::min(n_threads, count);

  std::vector<TrialResult> results(count);
  std::atomic<int> cursor{0};
  auto worker = [&]() {
    while (true) {
      const int i = cursor.fetch_add(1);
      if (i >= count) return;
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
      MissionParams local = params;
      if (!log_dir.empty()) {
        local.log_path = log_dir + "/trial_" + std::to_string(seed) + ".csv";
      }
      results[i] = run_trial(chain, table, scene, seed, local);
    }
  };

  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  return results;
}

BatchSummary score_outcomes(const std::vector<TrialResult>& results) {
  if (results.empty()) {
    throw DimensionMismatch("score_outcomes needs at least one trial");
  }
  BatchSummary summary;
  summary.n_trials = static_cast<int>(results.size());

  std::vector<double> pitches, yaws, durations, distances;
  auto merge_noise = [](StageNoiseStats& acc, const StageNoiseStats& s) {
    if (s.samples <= 0) return;
    const double w_old = acc.samples, w_new = s.samples;
    const double w = w_old + w_new;
    auto blend = [&](double a, double b) {
      return std::sqrt((w_old * a * a + w_new * b * b) / w);
    };
    acc.raw_position_std = blend(acc.raw_position_std, s.raw_position_std);
    acc.filtered_position_std =
        blend(acc.filtered_position_std, s.filtered_position_std);
    acc.raw_rotation_std = blend(acc.raw_rotation_std, s.raw_rotation_std);
    acc.filtered_rotation_std =
        blend(acc.filtered_rotation_std, s.filtered_rotation_std);
    acc.samples = static_cast<int>(w);
  };

  for (const TrialResult& r : results) {
    switch (r.outcome) {
      case TrialOutcome::Success:
        ++summary.n_success;
        break;
      case TrialOutcome::MissedTarget:
        ++summary.n_missed;
        break;
      case TrialOutcome::LutInfeasible:
        ++summary.n_infeasible;
        break;
      case TrialOutcome::StageTimeout:
        ++summary.n_timeout;
        break;
    }
    if (r.outcome == TrialOutcome::Success) {
      pitches.push_back(r.terminal_pitch_error_deg);
      yaws.push_back(r.terminal_yaw_error_deg);
      distances.push_back(r.terminal_distance);
    }
    if (r.outcome != TrialOutcome::LutInfeasible) {
      durations.push_back(r.duration);
      summary.extensions.push_back(r.extension);
    }
    merge_noise(summary.approach_noise, r.approach_noise);
    merge_noise(summary.final_align_noise, r.final_align_noise);
  }

  summary.success_rate =
      static_cast<double>(summary.n_success) / summary.n_trials;
  summary.mean_pitch_error_deg = mean_of(pitches);
  summary.std_pitch_error_deg = std_of(pitches);
  summary.mean_yaw_error_deg = mean_of(yaws);
  summary.std_yaw_error_deg = std_of(yaws);
  summary.mean_duration = mean_of(durations);
  summary.mean_terminal_distance = mean_of(distances);

  if (!summary.extensions.empty()) {
    std::vector<double> sorted = summary.extensions;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    summary.median_extension = (n % 2 == 1)
                                   ? sorted[n / 2]
                                   : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    int reach = 0;
    for (double d : sorted) {
      if (d >= 0.130 - 1e-9) ++reach;
    }
    summary.extension_reach_rate_130mm = static_cast<double>(reach) / n;
  }
  return summary;
}

std::string BatchSummary::to_text() const {
  std::ostringstream out;
  out << "trials:            " << n_trials << "\n"
      << "success:           " << n_success << " (" << format_value(100.0 * success_rate)
      << "%)\n"
      << "missed target:     " << n_missed << "\n"
      << "table infeasible:  " << n_infeasible << "\n"
      << "stage timeout:     " << n_timeout << "\n"
      << "terminal distance: " << format_value(1e3 * mean_terminal_distance)
      << " mm mean over successes\n"
      << "pitch error:       " << format_value(mean_pitch_error_deg) << " +/- "
      << format_value(std_pitch_error_deg) << " deg\n"
      << "yaw error:         " << format_value(mean_yaw_error_deg) << " +/- "
      << format_value(std_yaw_error_deg) << " deg\n"
      << "mean duration:     " << format_value(mean_duration) << " s\n"
      << "approach noise:    raw " << format_value(1e3 * approach_noise.raw_position_std)
      << " mm / filt " << format_value(1e3 * approach_noise.filtered_position_std)
      << " mm (ratio " << format_value(approach_noise.position_ratio())
      << "), rot ratio " << format_value(approach_noise.rotation_ratio()) << "\n"
      << "final-align noise: raw " << format_value(1e3 * final_align_noise.raw_position_std)
      << " mm / filt " << format_value(1e3 * final_align_noise.filtered_position_std)
      << " mm (ratio " << format_value(final_align_noise.position_ratio())
      << "), rot ratio " << format_value(final_align_noise.rotation_ratio()) << "\n"
      << "extension median:  " << format_value(1e3 * median_extension) << " mm\n"
      << "extension >=130mm: " << format_value(100.0 * extension_reach_rate_130mm)
      << "%\n";
  return out.str();
}

void BatchSummary::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw WriteError("cannot open summary " + path);
  out << "n_trials,n_success,n_missed,n_infeasible,n_timeout,success_rate,"
         "mean_pitch_error_deg,std_pitch_error_deg,mean_yaw_error_deg,"
         "std_yaw_error_deg,mean_duration,mean_terminal_distance,"
         "approach_raw_pos_std,approach_filt_pos_std,approach_raw_rot_std,"
         "approach_filt_rot_std,final_raw_pos_std,final_filt_pos_std,"
         "final_raw_rot_std,final_filt_rot_std,median_extension,"
         "extension_reach_rate_130mm\n";
  out << n_trials << ',' << n_success << ',' << n_missed << ','
      << n_infeasible << ',' << n_timeout << ',' << format_value(success_rate)
      << ',' << format_value(mean_pitch_error_deg) << ','
      << format_value(std_pitch_error_deg) << ','
      << format_value(mean_yaw_error_deg) << ','
      << format_value(std_yaw_error_deg) << ','
      << format_value(mean_duration) << ','
      << format_value(mean_terminal_distance) << ','
      << format_value(approach_noise.raw_position_std) << ','
      << format_value(approach_noise.filtered_position_std) << ','
      << format_value(approach_noise.raw_rotation_std) << ','
      << format_value(approach_noise.filtered_rotation_std) << ','
      << format_value(final_align_noise.raw_position_std) << ','
      << format_value(final_align_noise.filtered_position_std) << ','
      << format_value(final_align_noise.raw_rotation_std) << ','
      << format_value(final_align_noise.filtered_rotation_std) << ','
      << format_value(median_extension) << ','
      << format_value(extension_reach_rate_130mm) << '\n';
  if (!out) throw WriteError("failed writing summary " + path);
}

}  // namespace npswab
