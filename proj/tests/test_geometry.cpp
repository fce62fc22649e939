#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "npswab/geometry.hpp"
#include "npswab/rng.hpp"

using namespace npswab;

namespace {

Matrix3d random_rotation(Rng& rng, double max_angle = M_PI * 0.98) {
  return exp_so3(rng.uniform(0.0, max_angle) * rng.unit_vector());
}

// Independent oracle: truncated power series of the matrix exponential.
Matrix3d series_exp(const Vector3d& w, int terms = 30) {
  const Matrix3d K = skew(w);
  Matrix3d acc = Matrix3d::Identity();
  Matrix3d pow = Matrix3d::Identity();
  double fact = 1.0;
  for (int k = 1; k < terms; ++k) {
    pow = pow * K;
    fact *= k;
    acc += pow / fact;
  }
  return acc;
}

double frob(const Matrix3d& a, const Matrix3d& b) { return (a - b).norm(); }

}  // namespace

TEST_CASE("skew matches the cross product") {
  CHECK((skew(Vector3d::UnitZ()) * Vector3d::UnitX() - Vector3d::UnitY())
            .norm() == doctest::Approx(0.0));
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vector3d a = rng.normal_vec3(2.0);
    const Vector3d b = rng.normal_vec3(2.0);
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-14);
    CHECK((skew(a) + skew(a).transpose()).norm() == 0.0);
  }
}

TEST_CASE("exp_so3 axis cases") {
  CHECK(frob(exp_so3(Vector3d::Zero()), Matrix3d::Identity()) == 0.0);
  const Matrix3d R = exp_so3({0.0, 0.0, M_PI / 2.0});
  CHECK((R * Vector3d::UnitX() - Vector3d::UnitY()).norm() < 1e-15);
}

TEST_CASE("exp_so3 agrees with a truncated power series") {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const Vector3d w = rng.uniform(0.0, M_PI) * rng.unit_vector();
    CHECK(frob(exp_so3(w), series_exp(w)) < 1e-10);
  }
  // Tiny angles exercise the series branch.
  for (int i = 0; i < 100; ++i) {
    const Vector3d w = rng.uniform(0.0, 1e-9) * rng.unit_vector();
    CHECK(frob(exp_so3(w), series_exp(w)) < 1e-15);
  }
}

TEST_CASE("log_so3 inverts exp_so3 away from the branch cut") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const Vector3d w = rng.uniform(1e-8, M_PI - 1e-4) * rng.unit_vector();
    CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-9);
  }
}

TEST_CASE("log_so3 is stable near angle pi") {
  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const Vector3d axis = rng.unit_vector();
    const double angle = M_PI - rng.uniform(0.0, 1e-7);
    const Matrix3d R = exp_so3(angle * axis);
    const Vector3d w = log_so3(R);
    CHECK(w.norm() <= M_PI + 1e-12);
    CHECK(frob(exp_so3(w), R) < 1e-9);
  }
  // Exactly pi about a coordinate axis.
  const Matrix3d R = exp_so3(M_PI * Vector3d::UnitY());
  const Vector3d w = log_so3(R);
  CHECK(std::abs(w.norm() - M_PI) < 1e-12);
  CHECK(frob(exp_so3(w), R) < 1e-12);
}

TEST_CASE("log_so3 small-angle series") {
  Rng rng(15);
  for (int i = 0; i < 200; ++i) {
    const Vector3d w = rng.uniform(0.0, 1e-7) * rng.unit_vector();
    CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-12);
  }
}

TEST_CASE("nearest_rotation returns rotations unchanged") {
  Rng rng(16);
  for (int i = 0; i < 100; ++i) {
    const Matrix3d R = random_rotation(rng);
    CHECK(frob(nearest_rotation(R), R) < 1e-12);
  }
}

TEST_CASE("nearest_rotation minimises Frobenius distance") {
  // Stochastic oracle: best of many random rotations, then greedy local
  // refinement with a shrinking axis-angle step.
  Rng rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    Matrix3d M;
    do {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) M(r, c) = rng.normal();
    } while (std::abs(M.determinant()) < 0.1);

    Matrix3d best = random_rotation(rng);
    double best_d = frob(best, M);
    for (int i = 0; i < 10000; ++i) {
      const Matrix3d R = random_rotation(rng);
      const double d = frob(R, M);
      if (d < best_d) {
        best_d = d;
        best = R;
      }
    }
    double step = 0.2;
    while (step > 1e-9) {
      bool improved = false;
      for (int a = 0; a < 3; ++a) {
        for (double s : {step, -step}) {
          Vector3d ax = Vector3d::Zero();
          ax[a] = s;
          const Matrix3d R = best * exp_so3(ax);
          const double d = frob(R, M);
          if (d < best_d) {
            best_d = d;
            best = R;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }

    const Matrix3d R = nearest_rotation(M);
    CHECK(is_rotation(R));
    CHECK(frob(R, M) <= best_d + 1e-6);
  }
}

TEST_CASE("nearest_rotation of mirror-degenerate input is proper") {
  Rng rng(18);
  for (int i = 0; i < 50; ++i) {
    Matrix3d M = random_rotation(rng);
    M.col(0) *= -1.0;  // det < 0
    const Matrix3d R = nearest_rotation(M);
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(is_rotation(R));
  }
}

TEST_CASE("nearest_rotation rejects rank-deficient input") {
  Matrix3d M = Matrix3d::Zero();
  M(0, 0) = 1.0;
  M(1, 1) = 1.0;
  CHECK_THROWS_AS(nearest_rotation(M), DegenerateMatrix);
}

TEST_CASE("minimal_rotation axis case") {
  const Matrix3d R = minimal_rotation(Vector3d::UnitX(), Vector3d::UnitY());
  CHECK((R * Vector3d::UnitX() - Vector3d::UnitY()).norm() < 1e-15);
  CHECK(rotation_angle(R) == doctest::Approx(M_PI / 2.0));
  const Vector3d axis = log_so3(R).normalized();
  CHECK((axis - Vector3d::UnitZ()).norm() < 1e-12);
}

TEST_CASE("minimal_rotation maps v to n with angle arccos(v.n)") {
  Rng rng(19);
  for (int i = 0; i < 2000; ++i) {
    const Vector3d v = rng.unit_vector();
    Vector3d n = rng.unit_vector();
    if (v.dot(n) <= -1.0 + 1e-5) n = -n;
    const Matrix3d R = minimal_rotation(v, n);
    CHECK((R * v - n).norm() < 1e-9);
    CHECK(std::abs(rotation_angle(R) - std::acos(std::clamp(v.dot(n), -1.0,
                                                            1.0))) < 1e-12);
    CHECK(is_rotation(R));
  }
}

TEST_CASE("minimal_rotation angle is minimal over an axis grid") {
  // Oracle: scan a dense set of axes; for each axis able to map v onto n,
  // find the smallest angle doing so. No admissible axis should beat ours.
  Rng rng(20);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector3d v = rng.unit_vector();
    Vector3d n = rng.unit_vector();
    if (v.dot(n) <= -0.9) n = -n;
    const double ours = rotation_angle(minimal_rotation(v, n));

    double best = M_PI;
    const int na = 4000;
    for (int i = 0; i < na; ++i) {
      // Fibonacci sphere axis sample.
      const double z = 1.0 - 2.0 * (i + 0.5) / na;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = i * 2.399963229728653;
      const Vector3d a{r * std::cos(phi), r * std::sin(phi), z};
      for (int k = 1; k <= 720; ++k) {
        const double th = k * (M_PI / 720.0);
        if (th >= best) break;
        if ((exp_so3(th * a) * v - n).norm() < 2e-3) {
          best = th;
          break;
        }
      }
    }
    CHECK(ours <= best + 2e-3);
  }
}

TEST_CASE("minimal_rotation rejects anti-parallel directions") {
  CHECK_THROWS_AS(minimal_rotation(Vector3d::UnitX(), -Vector3d::UnitX()),
                  AntiparallelVectors);
}

TEST_CASE("retract identity and pure translation") {
  Rng rng(21);
  const Pose X{rng.normal_vec3(1.0), random_rotation(rng)};
  const Pose Y = retract(X, Vector6d::Zero());
  CHECK((Y.position - X.position).norm() == 0.0);
  CHECK(frob(Y.rotation, X.rotation) == 0.0);

  Pose A;
  A.position = {1.0, 0.0, 0.0};
  const Vector6d xi = inverse_retract(A, Pose::identity());
  Vector6d expect;
  expect << 1.0, 0.0, 0.0, 0.0, 0.0, 0.0;
  CHECK((xi - expect).norm() < 1e-15);
}

TEST_CASE("inverse_retract of a pose around itself is zero") {
  Rng rng(22);
  for (int i = 0; i < 100; ++i) {
    const Pose X{rng.normal_vec3(2.0), random_rotation(rng)};
    CHECK(inverse_retract(X, X).norm() < 1e-12);
  }
}

TEST_CASE("retract / inverse_retract round trip") {
  Rng rng(23);
  for (int i = 0; i < 500; ++i) {
    const Pose X{rng.normal_vec3(2.0), random_rotation(rng)};
    Vector6d xi;
    xi << rng.normal_vec3(1.0), rng.uniform(0.0, 3.0) * rng.unit_vector();
    const Vector6d back = inverse_retract(retract(X, xi), X);
    CHECK((back - xi).norm() < 1e-9);
  }
}

TEST_CASE("inverse_retract raises at the rotation branch cut") {
  Pose X;
  X.rotation = exp_so3((M_PI - 1e-9) * Vector3d::UnitX());
  CHECK_THROWS_AS(inverse_retract(X, Pose::identity()), BranchCut);
}
