#include "npswab/lut.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "npswab/errors.hpp"
#include "npswab/rng.hpp"

namespace npswab {

namespace {

constexpr char kMagic[8] = {'N', 'P', 'S', 'W', 'L', 'U', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

double linspace_at(double lo, double hi, int n, int i) {
  if (n == 1) {
    return 0.5 * (lo + hi);
  }
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

int clamp_bin(double value, double lo, double hi, int n) {
  const double t = (value - lo) / (hi - lo);
  const int i = static_cast<int>(std::floor(t * n));
  return std::clamp(i, 0, n - 1);
}

// Little-endian fixed-width scalar I/O so tables are byte-identical across
// machines.
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

class ByteReader {
 public:
  ByteReader(std::string data, std::string name)
      : data_(std::move(data)), name_(std::move(name)) {}

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    }
    return v;
  }

  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    }
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  void raw(char* dst, std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw ConfigError(name_ + ": truncated table file");
    }
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  bool exhausted() const { return pos_ == data_.size(); }
  const std::string& name() const { return name_; }

 private:
  unsigned char byte() {
    if (pos_ >= data_.size()) {
      throw ConfigError(name_ + ": truncated table file");
    }
    return static_cast<unsigned char>(data_[pos_++]);
  }

  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void ConeStartSpec::validate() const {
  if (!(phi_min < phi_max) || !(r_min < r_max) || !(z_min < z_max)) {
    throw ConfigError("start region: every min bound must be below its max");
  }
  if (n_phi < 1 || n_r < 1 || n_z < 1) {
    throw ConfigError("start region: grid resolutions must be >= 1");
  }
  if (!(r_min > 0.0)) {
    throw ConfigError("start region: r_min must be positive");
  }
}

Pose ConeStartSpec::cell_pose(int iphi, int ir, int iz) const {
  const double phi = phi_min + (phi_max - phi_min) * (iphi + 0.5) / n_phi;
  const double r = r_min + (r_max - r_min) * (ir + 0.5) / n_r;
  const double z = z_min + (z_max - z_min) * (iz + 0.5) / n_z;
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double ct = std::cos(pitch), st = std::sin(pitch);
  Pose pose;
  pose.position = Eigen::Vector3d(r * cp, r * sp, z);
  // Columns: lateral, down-ish, forward (radially outward, pitched up).
  pose.rotation.col(0) = Eigen::Vector3d(sp, -cp, 0.0);
  pose.rotation.col(1) = Eigen::Vector3d(st * cp, st * sp, -ct);
  pose.rotation.col(2) = Eigen::Vector3d(ct * cp, ct * sp, st);
  return pose;
}

int ConeStartSpec::nearest_cell(const Eigen::Vector3d& position) const {
  const double phi = std::atan2(position.y(), position.x());
  const double r = std::hypot(position.x(), position.y());
  const int iphi = clamp_bin(phi, phi_min, phi_max, n_phi);
  const int ir = clamp_bin(r, r_min, r_max, n_r);
  const int iz = clamp_bin(position.z(), z_min, z_max, n_z);
  return cell_index(iphi, ir, iz);
}

void ConeEndSpec::validate() const {
  if (!(d > 0.0)) {
    throw ConfigError("goal fan: distance d must be positive");
  }
  if (!(theta_min < theta_max)) {
    throw ConfigError("goal fan: theta_min must be below theta_max");
  }
  if (!(phi_max >= 0.0)) {
    throw ConfigError("goal fan: polar half-angle must be non-negative");
  }
  if (n_phi < 1 || n_zeta < 1 || n_theta_x < 1 || n_theta_y < 1) {
    throw ConfigError("goal fan: sample counts must be >= 1");
  }
}

std::vector<Pose> sample_cone_start(const ConeStartSpec& spec) {
  spec.validate();
  std::vector<Pose> poses;
  poses.reserve(spec.n_cells());
  for (int iphi = 0; iphi < spec.n_phi; ++iphi) {
    for (int ir = 0; ir < spec.n_r; ++ir) {
      for (int iz = 0; iz < spec.n_z; ++iz) {
        poses.push_back(spec.cell_pose(iphi, ir, iz));
      }
    }
  }
  return poses;
}

std::vector<Pose> sample_cone_end(const ConeEndSpec& spec, const Pose& start) {
  spec.validate();
  std::vector<Pose> poses;
  poses.reserve(spec.n_targets());
  for (int ip = 0; ip < spec.n_phi; ++ip) {
    const double phi = spec.n_phi == 1
                           ? 0.5 * spec.phi_max
                           : spec.phi_max * ip / (spec.n_phi - 1);
    for (int iz = 0; iz < spec.n_zeta; ++iz) {
      const double zeta = 2.0 * M_PI * iz / spec.n_zeta;
      const Eigen::Vector3d disp =
          spec.d * Eigen::Vector3d(std::sin(phi) * std::cos(zeta),
                                   std::sin(phi) * std::sin(zeta),
                                   std::cos(phi));
      for (int ix = 0; ix < spec.n_theta_x; ++ix) {
        const double tx =
            linspace_at(spec.theta_min, spec.theta_max, spec.n_theta_x, ix);
        for (int iy = 0; iy < spec.n_theta_y; ++iy) {
          const double ty =
              linspace_at(spec.theta_min, spec.theta_max, spec.n_theta_y, iy);
          const Matrix3d local =
              exp_so3(Eigen::Vector3d(tx, 0, 0)) *
              exp_so3(Eigen::Vector3d(0, ty, 0));
          Pose pose;
          pose.position = start.position + start.rotation * disp;
          pose.rotation = start.rotation * local;
          poses.push_back(pose);
        }
      }
    }
  }
  return poses;
}

namespace {

// Smallest distance to a position limit across all joints, normalized by
// each joint's half-range (1 = dead centre, 0 = pressed against a stop).
double limit_clearance(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const Eigen::VectorXd lo = chain.lower_limits();
  const Eigen::VectorXd hi = chain.upper_limits();
  double worst = 1.0;
  for (int i = 0; i < chain.dof(); ++i) {
    const double margin = std::min(q(i) - lo(i), hi(i) - q(i));
    worst = std::min(worst, margin / (0.5 * (hi(i) - lo(i))));
  }
  return worst;
}

// The IK iteration clamps at the stops, so raw solutions routinely park a
// joint exactly on a position limit — a posture with no room to maneuver
// once the servo loop takes over. Walk the solution toward mid-range through
// the pose-holding null space, re-anchoring with a fresh IK solve after each
// step so the flange pose (and the limit/collision guarantees of solve_ik)
// are preserved exactly.
Eigen::VectorXd relax_toward_midrange(const KinematicChain& chain,
                                      const Pose& pose, Eigen::VectorXd q) {
  const Eigen::VectorXd lo = chain.lower_limits();
  const Eigen::VectorXd hi = chain.upper_limits();
  const Eigen::VectorXd mid = 0.5 * (lo + hi);
  const Eigen::MatrixXd identity =
      Eigen::MatrixXd::Identity(chain.dof(), chain.dof());
  Eigen::VectorXd best = q;
  double best_clearance = limit_clearance(chain, q);
  for (int iter = 0; iter < 20 && best_clearance <= 0.2; ++iter) {
    const Eigen::Matrix<double, 6, Eigen::Dynamic> J = chain.jacobian(q);
    const Eigen::MatrixXd pinv = pseudo_inverse(J, 1e-6);
    Eigen::VectorXd step = (identity - pinv * J) * (mid - q);
    const double norm = step.norm();
    if (norm < 1e-6) break;  // no null-space room left to improve
    step *= std::min(1.0, 0.05 / norm);  // short steps stay near the fibre
    const IkResult res = chain.solve_ik(pose, q + step);
    if (!res.ok()) break;
    q = res.q;
    const double clearance = limit_clearance(chain, q);
    if (clearance > best_clearance) {
      best = q;
      best_clearance = clearance;
    }
  }
  return best;
}

}  // namespace

std::vector<Eigen::VectorXd> generate_candidates(const KinematicChain& chain,
                                                 const Pose& start, int count,
                                                 std::uint64_t rng_seed) {
  if (count < 1) {
    throw ConfigError("candidate count must be >= 1");
  }
  Rng rng(rng_seed);
  const Eigen::VectorXd lo = chain.lower_limits();
  const Eigen::VectorXd hi = chain.upper_limits();
  std::vector<Eigen::VectorXd> candidates;
  for (int c = 0; c < count; ++c) {
    Eigen::VectorXd seed_q(chain.dof());
    for (int i = 0; i < chain.dof(); ++i) {
      seed_q[i] = rng.uniform(lo[i], hi[i]);
    }
    const IkResult res = chain.solve_ik(start, seed_q);
    if (res.ok()) {
      candidates.push_back(relax_toward_midrange(chain, start, res.q));
    }
  }
  if (candidates.empty()) {
    throw NoFeasibleCandidate("no random seed produced a valid configuration "
                              "for the requested pose");
  }
  return candidates;
}

int grade_candidate(const KinematicChain& chain, const Eigen::VectorXd& q,
                    const std::vector<Pose>& targets) {
  int reached = 0;
  for (const Pose& target : targets) {
    if (chain.solve_ik(target, q).ok()) {
      ++reached;
    }
  }
  return reached;
}


LutTable build_table(const KinematicChain& chain,
                     const ConeStartSpec& start_spec,
                     const ConeEndSpec& end_spec, int candidates_per_cell,
                     std::uint64_t seed, int n_threads) {
  start_spec.validate();
  end_spec.validate();
  if (candidates_per_cell < 1) {
    throw ConfigError("candidates per cell must be >= 1");
  }

  LutTable table;
  table.start_spec = start_spec;
  table.end_spec = end_spec;
  table.seed = seed;
  table.candidates_per_cell = static_cast<std::uint32_t>(candidates_per_cell);
  table.entries.resize(start_spec.n_cells());

  const std::uint32_t total =
      static_cast<std::uint32_t>(end_spec.n_targets());

  auto build_cell = [&](int cell) {
    const int iz = cell % start_spec.n_z;
    const int ir = (cell / start_spec.n_z) % start_spec.n_r;
    const int iphi = cell / (start_spec.n_z * start_spec.n_r);
    const Pose pose = start_spec.cell_pose(iphi, ir, iz);

    LutEntry entry;
    entry.start_pose = pose;
    entry.q_best = chain.home();
    entry.reach_count = 0;
    entry.total_targets = total;

    std::vector<Eigen::VectorXd> candidates;
    try {
      candidates = generate_candidates(
          chain, pose, candidates_per_cell,
          derive_seed(seed, static_cast<std::uint64_t>(cell)));
    } catch (const NoFeasibleCandidate&) {
      table.entries[cell] = std::move(entry);
      return;
    }

    const std::vector<Pose> targets = sample_cone_end(end_spec, pose);
    int best = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const int n = grade_candidate(chain, candidates[i], targets);
      if (n > best) {  // strict: ties keep the earlier candidate
        best = n;
        entry.q_best = candidates[i];
      }
    }
    entry.reach_count = static_cast<std::uint32_t>(std::max(best, 0));
    table.entries[cell] = std::move(entry);
  };

  int workers = n_threads;
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(workers, 1);
  }
  workers = std::min(workers, start_spec.n_cells());

  if (workers == 1) {
    for (int cell = 0; cell < start_spec.n_cells(); ++cell) {
      build_cell(cell);
    }
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      while (true) {
        const int cell = next.fetch_add(1);
        if (cell >= start_spec.n_cells()) {
          return;
        }
        build_cell(cell);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  return table;
}

const LutEntry& LutTable::query(const Eigen::Vector3d& face_position) const {
  const int cell = start_spec.nearest_cell(face_position);
  const LutEntry& entry = entries[static_cast<std::size_t>(cell)];
  if (!entry.feasible()) {
    throw InfeasibleCell("nearest cell " + std::to_string(cell) +
                         " has no feasible configuration");
  }
  return entry;
}

void LutTable::save(const std::string& path) const {
  std::string blob;
  blob.reserve(144 + entries.size() * 68);
  blob.append(kMagic, sizeof(kMagic));
  put_u32(blob, kVersion);

  put_f64(blob, start_spec.phi_min);
  put_f64(blob, start_spec.phi_max);
  put_f64(blob, start_spec.r_min);
  put_f64(blob, start_spec.r_max);
  put_f64(blob, start_spec.z_min);
  put_f64(blob, start_spec.z_max);
  put_f64(blob, start_spec.pitch);
  put_u32(blob, static_cast<std::uint32_t>(start_spec.n_phi));
  put_u32(blob, static_cast<std::uint32_t>(start_spec.n_r));
  put_u32(blob, static_cast<std::uint32_t>(start_spec.n_z));

  put_f64(blob, end_spec.d);
  put_f64(blob, end_spec.phi_max);
  put_f64(blob, end_spec.theta_min);
  put_f64(blob, end_spec.theta_max);
  put_u32(blob, static_cast<std::uint32_t>(end_spec.n_phi));
  put_u32(blob, static_cast<std::uint32_t>(end_spec.n_zeta));
  put_u32(blob, static_cast<std::uint32_t>(end_spec.n_theta_x));
  put_u32(blob, static_cast<std::uint32_t>(end_spec.n_theta_y));

  put_u64(blob, seed);
  put_u32(blob, candidates_per_cell);
  put_u32(blob, static_cast<std::uint32_t>(entries.size()));

  for (std::size_t cell = 0; cell < entries.size(); ++cell) {
    const LutEntry& e = entries[cell];
    if (e.q_best.size() != 7) {
      throw WriteError("table serialization requires 7-joint configurations");
    }
    put_u32(blob, static_cast<std::uint32_t>(cell));
    for (int i = 0; i < 7; ++i) {
      put_f64(blob, e.q_best[i]);
    }
    put_u32(blob, e.reach_count);
    put_u32(blob, e.total_targets);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw WriteError(path + ": cannot open for writing");
  }
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  out.flush();
  if (!out) {
    throw WriteError(path + ": write failed");
  }
}

LutTable LutTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(path + ": cannot open table file");
  }
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  ByteReader reader(std::move(data), path);

  char magic[8];
  reader.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError(path + ": not a joint table file (bad magic)");
  }
  const std::uint32_t version = reader.u32();
  if (version != kVersion) {
    throw ConfigError(path + ": unsupported table version " +
                      std::to_string(version));
  }

  LutTable table;
  table.start_spec.phi_min = reader.f64();
  table.start_spec.phi_max = reader.f64();
  table.start_spec.r_min = reader.f64();
  table.start_spec.r_max = reader.f64();
  table.start_spec.z_min = reader.f64();
  table.start_spec.z_max = reader.f64();
  table.start_spec.pitch = reader.f64();
  table.start_spec.n_phi = static_cast<int>(reader.u32());
  table.start_spec.n_r = static_cast<int>(reader.u32());
  table.start_spec.n_z = static_cast<int>(reader.u32());

  table.end_spec.d = reader.f64();
  table.end_spec.phi_max = reader.f64();
  table.end_spec.theta_min = reader.f64();
  table.end_spec.theta_max = reader.f64();
  table.end_spec.n_phi = static_cast<int>(reader.u32());
  table.end_spec.n_zeta = static_cast<int>(reader.u32());
  table.end_spec.n_theta_x = static_cast<int>(reader.u32());
  table.end_spec.n_theta_y = static_cast<int>(reader.u32());

  table.seed = reader.u64();
  table.candidates_per_cell = reader.u32();
  const std::uint32_t n_cells = reader.u32();

  table.start_spec.validate();
  table.end_spec.validate();
  if (n_cells != static_cast<std::uint32_t>(table.start_spec.n_cells())) {
    throw ConfigError(path + ": cell count does not match the grid spec");
  }

  table.entries.resize(n_cells);
  for (std::uint32_t cell = 0; cell < n_cells; ++cell) {
    const std::uint32_t stored_index = reader.u32();
    if (stored_index != cell) {
      throw ConfigError(path + ": entries out of order at cell " +
                        std::to_string(cell));
    }
    LutEntry& e = table.entries[cell];
    e.q_best.resize(7);
    for (int i = 0; i < 7; ++i) {
      e.q_best[i] = reader.f64();
    }
    e.reach_count = reader.u32();
    e.total_targets = reader.u32();
    if (e.reach_count > e.total_targets) {
      throw ConfigError(path + ": reach count exceeds target count at cell " +
                        std::to_string(cell));
    }
    const int iz = static_cast<int>(cell) % table.start_spec.n_z;
    const int ir = (static_cast<int>(cell) / table.start_spec.n_z) %
                   table.start_spec.n_r;
    const int iphi =
        static_cast<int>(cell) / (table.start_spec.n_z * table.start_spec.n_r);
    e.start_pose = table.start_spec.cell_pose(iphi, ir, iz);
  }
  if (!reader.exhausted()) {
    throw ConfigError(path + ": trailing bytes after the last entry");
  }
  return table;
}

void LutTable::export_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw WriteError(path + ": cannot open for writing");
  }
  out << "cell,iphi,ir,iz,phi,r,z,reach_count,total_targets";
  for (int i = 0; i < 7; ++i) {
    out << ",q" << i;
  }
  out << "\n";
  for (std::size_t cell = 0; cell < entries.size(); ++cell) {
    const int iz = static_cast<int>(cell) % start_spec.n_z;
    const int ir = (static_cast<int>(cell) / start_spec.n_z) % start_spec.n_r;
    const int iphi =
        static_cast<int>(cell) / (start_spec.n_z * start_spec.n_r);
    const double phi =
        start_spec.phi_min +
        (start_spec.phi_max - start_spec.phi_min) * (iphi + 0.5) /
            start_spec.n_phi;
    const double r = start_spec.r_min +
                     (start_spec.r_max - start_spec.r_min) * (ir + 0.5) /
                         start_spec.n_r;
    const double z = start_spec.z_min +
                     (start_spec.z_max - start_spec.z_min) * (iz + 0.5) /
                         start_spec.n_z;
    const LutEntry& e = entries[cell];
    out << cell << ',' << iphi << ',' << ir << ',' << iz << ','
        << format_g9(phi) << ',' << format_g9(r) << ',' << format_g9(z) << ','
        << e.reach_count << ',' << e.total_targets;
    for (int i = 0; i < e.q_best.size(); ++i) {
      out << ',' << format_g9(e.q_best[i]);
    }
    out << "\n";
  }
  out.flush();
  if (!out) {
    throw WriteError(path + ": write failed");
  }
}

}  // namespace npswab
