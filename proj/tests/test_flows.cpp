#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "aks/flows.hpp"
#include "aks/presets.hpp"

using namespace aks;

namespace {

Mat E(int n, int i, int j) { return unit_matrix(n, i, j); }
Mat H2() { return E(2, 0, 0) - E(2, 1, 1); }
Mat toda2(double a, double b) { return b * H2() + a * E(2, 0, 1) + E(2, 1, 0); }

// Toda sl(2) with a(0) = 1, b(0) = 0: b' = -a, a' = 2ab, H = b^2 + a = 1,
// so b = -tanh t and a = sech^2 t.
Mat toda2_exact(double t) {
  const double b = -std::tanh(t);
  return toda2(1.0 - b * b, b);
}

} // namespace

TEST_CASE("aks_vector_field examples") {
  const AKSData toda = preset_toda(2);
  CHECK(max_abs(aks_vector_field(toda, Mat::Zero(2, 2))) == 0.0);

  const double a = 0.9, b = -0.4;
  Mat expected(2, 2);
  expected << -a, 2 * a * b, 0, a;
  CHECK(max_abs(Mat(aks_vector_field(toda, toda2(a, b)) - expected)) <= 1e-15);

  // pi_A(L) = 0 makes L a fixed point
  Mat lower(2, 2);
  lower << 0.3, 0, 2.0, -0.3;
  CHECK(max_abs(aks_vector_field(toda, lower)) <= 1e-15);
}

TEST_CASE("H is conserved by the vector field pointwise") {
  std::mt19937_64 rng(44);
  for (const AKSData& aks : {preset_toda(3), preset_iwasawa(4)}) {
    for (int trial = 0; trial < 30; ++trial) {
      const Mat L = random_combination(aks.algebra().basis(), aks.n(), rng);
      CHECK(std::abs(trace_form(L, aks_vector_field(aks, L))) <= 1e-12);
    }
  }
}

TEST_CASE("integrate_lax keeps a fixed point constant") {
  const AKSData toda = preset_toda(2);
  Mat lower(2, 2);
  lower << 0.5, 0, 1.0, -0.5;
  const Trajectory traj = integrate_lax(toda, lower, 1.0, 0.1);
  CHECK(traj.size() == 11);
  for (const auto& st : traj.states) CHECK(max_abs(Mat(st.L - lower)) == 0.0);
}

TEST_CASE("integrate_lax conserves H for the Toda sl(2) chain and matches the closed form") {
  const AKSData toda = preset_toda(2);
  const Trajectory traj = integrate_lax(toda, toda2(1.0, 0.0), 3.0, 1e-3);
  for (const auto& d : traj.diagnostics) CHECK(std::abs(d.H - 1.0) <= 1e-10);
  CHECK(traj.times.back() == 3.0);
  CHECK(max_abs(Mat(traj.states.back().L - toda2_exact(3.0))) <= 1e-11);
}

TEST_CASE("integrate_lax is fourth order against factorization_solve") {
  std::mt19937_64 rng(9);
  const AKSData toda = preset_toda(3);
  const OrbitSeed seed = random_orbit_seed(toda, rng);
  const Mat L0 = orbit_point(toda, seed.h_a, seed.h_b).L;
  const Mat ref = factorization_solve(toda, L0, {2.0}).states.back().L;
  const double e1 = max_abs(Mat(integrate_lax(toda, L0, 2.0, 0.04).states.back().L - ref));
  const double e2 = max_abs(Mat(integrate_lax(toda, L0, 2.0, 0.02).states.back().L - ref));
  CHECK(e1 / e2 > 14.0);
  CHECK(e1 / e2 < 18.0);
}

TEST_CASE("integrate_lax sampling stride and validation") {
  const AKSData toda = preset_toda(2);
  LaxIntegrationOptions opts;
  opts.sample_stride = 10;
  const Trajectory traj = integrate_lax(toda, toda2(1.0, 0.0), 1.0, 0.01, opts);
  CHECK(traj.size() == 11);
  CHECK(traj.times[5] == doctest::Approx(0.5));
  CHECK_THROWS_AS(integrate_lax(toda, toda2(1.0, 0.0), 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate_lax(toda, Mat::Identity(2, 2), 1.0, 0.1), MembershipError);
}

TEST_CASE("integrate_lax aborts on a blow-up with the last good time") {
  const AKSData toda = preset_toda(2);
  // a(0) = -1: b = tan t reaches infinity at pi/2
  try {
    integrate_lax(toda, toda2(-1.0, 0.0), 3.0, 1e-3);
    FAIL("expected IntegrationAborted");
  } catch (const IntegrationAborted& e) {
    CHECK(e.last_good_time() > 1.5);
    CHECK(e.last_good_time() < 1.8);
    CHECK(e.partial().times.back() == doctest::Approx(e.last_good_time()));
  }
}

TEST_CASE("reprojection keeps the B^perp part frozen") {
  const AKSData toda = preset_toda(3);
  std::mt19937_64 rng(12);
  const OrbitSeed seed = random_orbit_seed(toda, rng);
  const Mat L0 = orbit_point(toda, seed.h_a, seed.h_b).L;
  LaxIntegrationOptions opts;
  opts.reproject = true;
  const Trajectory traj = integrate_lax(toda, L0, 1.0, 1e-2, opts);
  CHECK(moment_drift(toda, traj) <= 1e-15);
}

TEST_CASE("factorization_solve at t = 0 returns L0") {
  const AKSData toda = preset_toda(2);
  const Trajectory traj = factorization_solve(toda, toda2(1.0, 0.0), {0.0});
  CHECK(max_abs(Mat(traj.states[0].L - toda2(1.0, 0.0))) == 0.0);
}

TEST_CASE("factorization_solve agrees with fine-step RK4 and the closed form") {
  const AKSData toda = preset_toda(2);
  const Mat L0 = toda2(1.0, 0.0);
  const Trajectory fact = factorization_solve(toda, L0, {1.0});
  const Trajectory rk = integrate_lax(toda, L0, 1.0, 1e-4);
  CHECK(max_abs(Mat(fact.states.back().L - rk.states.back().L)) <= 1e-8);
  CHECK(max_abs(Mat(fact.states.back().L - toda2_exact(1.0))) <= 1e-13);
}

TEST_CASE("factorization_solve is isospectral and keeps the Toda moment exactly") {
  std::mt19937_64 rng(15);
  const AKSData toda = preset_toda(3);
  for (int trial = 0; trial < 5; ++trial) {
    const OrbitSeed seed = random_orbit_seed(toda, rng);
    const Mat L0 = orbit_point(toda, seed.h_a, seed.h_b).L;
    FactorizationOptions opts;
    opts.seed = seed;
    const Trajectory traj = factorization_solve(toda, L0, time_grid(5.0, 0.05), opts);
    CHECK(invariant_report(traj).max_drift() <= 1e-10);
    CHECK(moment_drift(toda, traj) <= 1e-12);
    CHECK(traj.factors.size() == traj.size());
  }
}

TEST_CASE("factorization_solve with restarts matches the direct solve") {
  std::mt19937_64 rng(16);
  const AKSData iw = preset_iwasawa(3);
  const OrbitSeed seed = random_orbit_seed(iw, rng, 0.4);
  const Mat L0 = orbit_point(iw, seed.h_a, seed.h_b).L;
  FactorizationOptions direct, restarted;
  direct.restart_interval = 0.0;
  direct.seed = seed;
  restarted.seed = seed;
  restarted.restart_interval = 0.5;
  const auto grid = time_grid(4.0, 0.1);
  CHECK(max_cross_error(factorization_solve(iw, L0, grid, direct),
                        factorization_solve(iw, L0, grid, restarted)) <= 1e-10);
}

TEST_CASE("long Iwasawa runs stop the orbit comparison once the factors degenerate") {
  std::mt19937_64 rng(17);
  const AKSData iw = preset_iwasawa(3);
  const OrbitSeed seed = random_orbit_seed(iw, rng, 0.5);
  FactorizationOptions opts;
  opts.seed = seed;
  const Trajectory traj = factorization_solve(iw, orbit_point(iw, seed.h_a, seed.h_b).L, time_grid(50.0, 0.5), opts);
  CHECK(traj.size() == 101);
  CHECK(traj.orbit_checks > 0);
  CHECK(traj.orbit_checks < traj.size());
  CHECK(invariant_report(traj).max_drift() <= 1e-10);
}

TEST_CASE("factorization_solve locates the Toda blow-up time") {
  // The orbit through nu = -E12 carries a < 0, where b = tan t.
  const AKSData indefinite(triangular_splitting(2), E(2, 1, 0), Mat(-E(2, 0, 1)));
  const Mat L0 = toda2(-1.0, 0.0);
  for (const double restart : {0.0, 0.25}) {
    FactorizationOptions opts;
    opts.restart_interval = restart;
    try {
      factorization_solve(indefinite, L0, time_grid(3.0, 1e-2), opts);
      FAIL("expected FactorizationBlowup");
    } catch (const FactorizationBlowup& e) {
      CHECK(e.time() == doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
      CHECK(e.last_good_time() < e.time());
      CHECK(e.partial().times.back() == e.last_good_time());
      const double t = e.partial().times.back();
      CHECK(e.partial().states.back().L(0, 0) == doctest::Approx(std::tan(t)).epsilon(1e-9));
    }
  }
}

TEST_CASE("invariant_report") {
  const AKSData toda = preset_toda(2);
  Mat lower(2, 2);
  lower << 0.5, 0, 1.0, -0.5;
  const DriftReport still = invariant_report(integrate_lax(toda, lower, 1.0, 0.1));
  CHECK(still.max_drift() == 0.0);
  CHECK(still.entries.size() == 4);   // H, trL2, c1, c2
  CHECK_THROWS_AS(invariant_report(Trajectory{}), std::invalid_argument);
}

TEST_CASE("RK4 drift on Toda sl(3) over t = 10") {
  std::mt19937_64 rng(21);
  const AKSData toda = preset_toda(3);
  const OrbitSeed seed = random_orbit_seed(toda, rng);
  const Mat L0 = orbit_point(toda, seed.h_a, seed.h_b).L;
  LaxIntegrationOptions opts;
  opts.sample_stride = 100;
  const Trajectory rk = integrate_lax(toda, L0, 10.0, 1e-3, opts);
  CHECK(invariant_report(rk).max_drift() <= 1e-8);
  const Trajectory fact = factorization_solve(toda, L0, rk.times);
  CHECK(max_cross_error(rk, fact) <= 1e-8);
}

TEST_CASE("diagnose: power traces and characteristic polynomial") {
  Mat L(3, 3);
  L << 1, 2, 0, 0, -1, 1, 3, 0, 0;
  const Diagnostics d = diagnose(L);
  // oracle: det(x I - L) evaluated directly
  for (double x : {-2.0, 0.5, 3.0}) {
    const double direct = Mat(x * Mat::Identity(3, 3) - L).determinant();
    const double poly = x * x * x + d.charpoly[0] * x * x + d.charpoly[1] * x + d.charpoly[2];
    CHECK(poly == doctest::Approx(direct).epsilon(1e-13));
  }
  CHECK(d.power_traces[0] == doctest::Approx((L * L).trace()));
  CHECK(d.H == doctest::Approx(0.5 * (L * L).trace()));
}
