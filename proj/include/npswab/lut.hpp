#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "npswab/geometry.hpp"
#include "npswab/kinematics.hpp"

namespace npswab {

/// Cylindrical-shell region of pre-approach poses, discretized into a dense
/// (yaw, radius, height) grid. Poses look radially outward with a fixed
/// upward pitch.
struct ConeStartSpec {
  double phi_min = -M_PI / 4.0;
  double phi_max = M_PI / 4.0;
  double r_min = 0.48;
  double r_max = 0.68;
  double z_min = 1.0;
  double z_max = 1.85;
  double pitch = 0.2;  // upward tilt of every pose's forward axis, radians
  int n_phi = 9;
  int n_r = 3;
  int n_z = 9;

  void validate() const;  // throws ConfigError
  int n_cells() const { return n_phi * n_r * n_z; }
  int cell_index(int iphi, int ir, int iz) const {
    return (iphi * n_r + ir) * n_z + iz;
  }
  /// Pose at the center of cell (iphi, ir, iz): position on the cylinder,
  /// forward axis (+z column) pointing outward at yaw phi, pitched up.
  Pose cell_pose(int iphi, int ir, int iz) const;
  /// O(1) nearest-cell lookup for an arbitrary world position (clamped to
  /// the grid bounds).
  int nearest_cell(const Eigen::Vector3d& position) const;
};

/// Spherical-cap fan of displaced/tilted goal poses at distance `d` ahead of
/// a start pose, with small local tilts about the transverse axes.
struct ConeEndSpec {
  double d = 0.35;
  double phi_max = 15.0 * M_PI / 180.0;  // polar half-angle of the cap
  double theta_min = -10.0 * M_PI / 180.0;
  double theta_max = 10.0 * M_PI / 180.0;
  int n_phi = 3;
  int n_zeta = 8;
  int n_theta_x = 3;
  int n_theta_y = 3;

  void validate() const;  // throws ConfigError
  int n_targets() const { return n_phi * n_zeta * n_theta_x * n_theta_y; }
};

struct LutEntry {
  Pose start_pose;
  Eigen::VectorXd q_best;
  std::uint32_t reach_count = 0;
  std::uint32_t total_targets = 0;

  bool feasible() const { return reach_count > 0; }
};

struct LutTable {
  ConeStartSpec start_spec;
  ConeEndSpec end_spec;
  std::uint64_t seed = 0;
  std::uint32_t candidates_per_cell = 0;
  std::vector<LutEntry> entries;  // dense, indexed by ConeStartSpec::cell_index

  /// Entry of the cell nearest to `face_position` (clamped to the grid).
  /// Throws InfeasibleCell when that cell has no feasible configuration.
  const LutEntry& query(const Eigen::Vector3d& face_position) const;

  void save(const std::string& path) const;          // throws WriteError
  static LutTable load(const std::string& path);     // throws ConfigError
  void export_csv(const std::string& path) const;    // throws WriteError
};

/// One pose per grid cell, ordered by ConeStartSpec::cell_index.
std::vector<Pose> sample_cone_start(const ConeStartSpec& spec);

/// Goal poses fanned out ahead of `start`, ordered polar-major
/// (phi, zeta, theta_x, theta_y).
std::vector<Pose> sample_cone_end(const ConeEndSpec& spec, const Pose& start);

/// IK solutions for `start` from `count` uniform-within-limits random seeds;
/// failures dropped. Throws NoFeasibleCandidate when every seed fails.
std::vector<Eigen::VectorXd> generate_candidates(const KinematicChain& chain,
                                                 const Pose& start, int count,
                                                 std::uint64_t rng_seed);

/// Number of targets reachable by solve_ik when seeded at q.
int grade_candidate(const KinematicChain& chain, const Eigen::VectorXd& q,
                    const std::vector<Pose>& targets);

/// Dense table build: per cell, generate candidates, grade each against that
/// cell's goal fan, keep the best (ties to the lower candidate index).
/// Cells are independent with per-cell derived RNG streams, so any thread
/// count produces the identical table. n_threads <= 0 picks the hardware
/// concurrency.
LutTable build_table(const KinematicChain& chain,
                     const ConeStartSpec& start_spec,
                     const ConeEndSpec& end_spec, int candidates_per_cell,
                     std::uint64_t seed, int n_threads = 1);

}  // namespace npswab
