#include "aks/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aks {

Diagnostics diagnose(const Mat& L) {
  const int n = static_cast<int>(L.rows());
  Diagnostics d;
  d.H = hamiltonian(L);
  std::vector<double> p(n + 1, 0.0);
  Mat power = Mat::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    power = power * L;
    p[k] = power.trace();
    if (k >= 2) d.power_traces.push_back(p[k]);
  }
  // Newton's identities: k e_k = sum_{i=1..k} (-1)^{i-1} e_{k-i} p_i.
  std::vector<double> e(n + 1, 0.0);
  e[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    double acc = 0.0;
    for (int i = 1; i <= k; ++i) acc += ((i % 2) ? 1.0 : -1.0) * e[k - i] * p[i];
    e[k] = acc / k;
    d.charpoly.push_back(((k % 2) ? -1.0 : 1.0) * e[k]);
  }
  return d;
}

void Trajectory::push(const Splitting& s, double t, const Mat& L) {
  times.push_back(t);
  states.push_back(make_lax(s, L));
  diagnostics.push_back(diagnose(L));
}

namespace {

Mat vector_field_unchecked(const Splitting& s, const Mat& L) {
  return bracket(s.project(L, Part::B), L);
}

} // namespace

Mat aks_vector_field(const AKSData& aks, const Mat& L) {
  const Splitting& s = aks.splitting();
  const Mat via_b = bracket(s.project(L, Part::B), L);
  const Mat via_a = bracket(s.project(L, Part::A), L);
  const double scale = max_abs(L);
  if (max_abs(Mat(via_b + via_a)) > 1e-12 * std::max(scale * scale, 1.0)) {
    throw InvariantViolation("aks_vector_field: the A and B forms of the flow disagree");
  }
  return via_b;
}

std::vector<double> time_grid(double t_end, double dt, int stride) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("time_grid: need dt > 0 and t_end > 0");
  const long steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
  std::vector<double> grid;
  for (long k = 0; k <= steps; k += std::max(1, stride)) grid.push_back(std::min(k * dt, t_end));
  if (grid.back() < t_end) grid.push_back(t_end);
  return grid;
}

Trajectory integrate_lax(const AKSData& aks, const Mat& L0, double t_end, double dt,
                         const LaxIntegrationOptions& options) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("integrate_lax: need dt > 0 and t_end > 0");
  const Splitting& s = aks.splitting();
  s.algebra().require_member(L0, "integrate_lax: L0");

  const long steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
  const int stride = std::max(1, options.sample_stride);
  const Mat frozen = s.project(L0, Part::BPerp);

  Trajectory traj;
  traj.push(s, 0.0, L0);
  Mat L = L0;
  double t = 0.0;
  for (long k = 1; k <= steps; ++k) {
    const double h = std::min(dt, t_end - t);
    Mat next;
    try {
      const Mat k1 = vector_field_unchecked(s, L);
      const Mat k2 = vector_field_unchecked(s, L + 0.5 * h * k1);
      const Mat k3 = vector_field_unchecked(s, L + 0.5 * h * k2);
      const Mat k4 = vector_field_unchecked(s, L + h * k3);
      next = L + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } catch (const MembershipError&) {
      // a stage left the algebra numerically: the state has overflowed
      throw IntegrationAborted("integrate_lax: state lost precision near t = " + std::to_string(t), t,
                               std::move(traj));
    }
    if (!next.allFinite()) {
      throw IntegrationAborted("integrate_lax: state became non-finite", t, std::move(traj));
    }
    if (options.reproject) next = s.project(next, Part::APerp) + frozen;
    L = std::move(next);
    t = (k == steps) ? t_end : k * dt;
    if (k % stride == 0 || k == steps) traj.push(s, t, L);
  }
  return traj;
}

namespace {

struct Step {
  bool ok = false;
  Factors<double> factors;
};

// Factor exp(s L) and require g_B in the identity component of B.
Step try_step(const Splitting& s, const Mat& L, double span, double pivot_tol) {
  Step out;
  try {
    out.factors = s.factorize(mat_exp(Mat(span * L)), pivot_tol);
  } catch (const NotInCheckedDomain&) {
    return out;
  }
  out.ok = (out.factors.g_b.diagonal().array() > 0.0).all();
  return out;
}

// The orbit formula conjugates by the accumulated factors; its rounding error
// grows like cond(g) * eps, so the comparison is only meaningful below tol.
bool resolves(const Mat& g, double tol) {
  const double rcond = Eigen::PartialPivLU<Mat>(g).rcond();
  return rcond > 0.0 && std::numeric_limits<double>::epsilon() / rcond <= tol;
}

} // namespace

Trajectory factorization_solve(const AKSData& aks, const Mat& L0, const std::vector<double>& times,
                               const FactorizationOptions& options) {
  const Splitting& s = aks.splitting();
  s.algebra().require_member(L0, "factorization_solve: L0");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("factorization_solve: times must increase");
  }

  const int n = s.n();
  Mat base_L = L0;
  double base_t = 0.0;
  Mat acc_a = options.seed ? options.seed->h_a : Mat(Mat::Identity(n, n));
  Mat acc_b = options.seed ? options.seed->h_b : Mat(Mat::Identity(n, n));

  Trajectory traj;
  double last_good = 0.0;

  auto blowup = [&](double lo, double hi) -> FactorizationBlowup {
    // Invariant: exp(lo L_base) is factorizable, exp(hi L_base) is not.
    for (int it = 0; it < options.locate_iterations && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (try_step(s, base_L, mid, options.pivot_tol).ok) lo = mid;
      else hi = mid;
    }
    const double t_fail = base_t + 0.5 * (lo + hi);
    return FactorizationBlowup("factorization_solve: exp(t L0) leaves the factorizable set at t = " +
                                   std::to_string(t_fail),
                               t_fail, last_good, std::move(traj));
  };

  for (const double t : times) {
    if (t < 0.0) throw std::invalid_argument("factorization_solve: negative time");
    if (options.restart_interval > 0.0) {
      while (t - base_t > options.restart_interval) {
        const Step step = try_step(s, base_L, options.restart_interval, options.pivot_tol);
        if (!step.ok) throw blowup(0.0, options.restart_interval);
        base_L = mat_inv(step.factors.g_a) * base_L * step.factors.g_a;
        acc_a = acc_a * step.factors.g_a;
        acc_b = step.factors.g_b * acc_b;
        base_t += options.restart_interval;
      }
    }
    const double span = t - base_t;
    const Step step = try_step(s, base_L, span, options.pivot_tol);
    if (!step.ok) {
      const double lo = std::max(0.0, last_good - base_t);
      throw blowup(lo, span);
    }
    const Mat L = mat_inv(step.factors.g_a) * base_L * step.factors.g_a;
    const Factors<double> total{acc_a * step.factors.g_a, step.factors.g_b * acc_b};

    if (options.seed && std::isfinite(options.orbit_check_tol) &&
        resolves(total.g_a, options.orbit_check_tol) && resolves(total.g_b, options.orbit_check_tol)) {
      ++traj.orbit_checks;
      const LaxElement reference = orbit_point(aks, total.g_a, total.g_b);
      const double gap = max_abs(Mat(reference.L - L));
      if (gap > options.orbit_check_tol * std::max(1.0, max_abs(L))) {
        throw InvariantViolation("factorization_solve: conjugated L0 differs from the orbit point by " +
                                 std::to_string(gap) + " at t = " + std::to_string(t));
      }
    }
    traj.push(s, t, L);
    traj.factors.push_back(total);
    last_good = t;
  }
  return traj;
}

double DriftReport::max_drift() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.drift);
  return m;
}

double DriftReport::drift(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.drift;
  throw std::out_of_range("DriftReport: no invariant named " + name);
}

DriftReport invariant_report(const Trajectory& traj) {
  if (traj.empty()) throw std::invalid_argument("invariant_report: empty trajectory");
  const Diagnostics& d0 = traj.diagnostics.front();
  DriftReport report;
  auto track = [&](const std::string& name, auto&& get) {
    const double v0 = get(d0);
    double worst = 0.0;
    for (const auto& d : traj.diagnostics) worst = std::max(worst, std::abs(get(d) - v0));
    report.entries.push_back({name, worst});
  };
  track("H", [](const Diagnostics& d) { return d.H; });
  for (std::size_t k = 0; k < d0.power_traces.size(); ++k) {
    track("trL" + std::to_string(k + 2), [k](const Diagnostics& d) { return d.power_traces[k]; });
  }
  for (std::size_t k = 0; k < d0.charpoly.size(); ++k) {
    track("c" + std::to_string(k + 1), [k](const Diagnostics& d) { return d.charpoly[k]; });
  }
  return report;
}

double max_cross_error(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_cross_error: trajectories differ in length");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i]))) {
      throw std::invalid_argument("max_cross_error: sample times differ");
    }
    worst = std::max(worst, max_abs(Mat(a.states[i].L - b.states[i].L)));
  }
  return worst;
}

double moment_drift(const AKSData& aks, const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& st : traj.states) worst = std::max(worst, max_abs(Mat(st.part_a_star - aks.mu())));
  return worst;
}

} // namespace aks
