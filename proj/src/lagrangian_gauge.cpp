#include "aks/lagrangian_gauge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aks {

namespace {

double uniform_step(const std::vector<double>& times, const char* who) {
  if (times.size() < 3) throw std::invalid_argument(std::string(who) + ": need at least 3 samples");
  const double h = times[1] - times[0];
  if (!(h > 0.0)) throw std::invalid_argument(std::string(who) + ": times must increase");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(times[i]))) {
      throw std::invalid_argument(std::string(who) + ": samples must be uniformly spaced");
    }
  }
  return h;
}

// Second-order differences: central inside, one-sided at the ends.
std::vector<Mat> sample_derivative(const std::vector<Mat>& f, double h) {
  const std::size_t m = f.size();
  std::vector<Mat> d(m);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  d[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < m; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  return d;
}

double constraint_residual(const AKSData& aks, const Currents& c) {
  const Splitting& s = aks.splitting();
  return std::max(max_abs(Mat(s.project(c.right, Part::BPerp) - aks.mu())),
                  max_abs(Mat(s.project(c.left, Part::APerp) - aks.nu())));
}

double condition(const Mat& g) { return max_abs(g) * max_abs(mat_inv(g)); }

} // namespace

void validate(const AKSData& aks, const ConfigPoint& p) {
  const Splitting& s = aks.splitting();
  const Mat body = mat_inv(p.g) * p.gdot;
  if (s.algebra().membership_residual(body) > 1e-9) {
    throw MembershipError("ConfigPoint: g^-1 gdot is not in the algebra");
  }
  if (!s.in_a(p.alpha)) throw MembershipError("ConfigPoint: alpha is not in A");
  if (!s.in_b(p.beta)) throw MembershipError("ConfigPoint: beta is not in B");
}

GaugeCurve make_gauge_curve(int n, const std::vector<double>& times, const std::function<Mat(double)>& xi,
                            const std::function<Mat(double)>& eta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("make_gauge_curve: need h > 0");
  GaugeCurve c;
  c.times = times;
  auto sample = [&](const std::function<Mat(double)>& path, double t, std::vector<Mat>& value,
                    std::vector<Mat>& rate) {
    if (!path) {
      value.push_back(Mat::Identity(n, n));
      rate.push_back(Mat::Zero(n, n));
      return;
    }
    auto e = [&](double s) { return mat_exp(path(s)); };
    value.push_back(e(t));
    rate.push_back((e(t - 2 * h) - 8.0 * e(t - h) + 8.0 * e(t + h) - e(t + 2 * h)) / (12.0 * h));
  };
  for (const double t : times) {
    sample(xi, t, c.a, c.adot);
    sample(eta, t, c.b, c.bdot);
  }
  return c;
}

GaugeCurve random_gauge_curve(const AKSData& aks, const std::vector<double>& times, std::mt19937_64& rng,
                              double scale) {
  if (times.empty()) throw std::invalid_argument("random_gauge_curve: no samples");
  const double span = std::max(times.back() - times.front(), 1e-12);
  std::uniform_real_distribution<double> u(-scale, scale);
  auto path = [&](const std::vector<Mat>& basis) -> std::function<Mat(double)> {
    if (basis.empty()) return {};
    Mat c(static_cast<Eigen::Index>(basis.size()), 3);
    for (Eigen::Index k = 0; k < c.rows(); ++k)
      for (Eigen::Index j = 0; j < 3; ++j) c(k, j) = u(rng);
    const double t0 = times.front();
    return [basis, c, t0, span](double t) {
      const double x = t - t0;
      const double w = std::sin(2.0 * std::acos(-1.0) * x / span);
      Mat m = Mat::Zero(basis[0].rows(), basis[0].cols());
      for (std::size_t k = 0; k < basis.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        m += (c(r, 0) + c(r, 1) * x + c(r, 2) * w) * basis[k];
      }
      return m;
    };
  };
  const auto xi = path(aks.little_a());
  const auto eta = path(aks.little_b());
  return make_gauge_curve(aks.n(), times, xi, eta);
}

double lagrangian(const AKSData& aks, const ConfigPoint& p) {
  validate(aks, p);
  const Mat gi = mat_inv(p.g);
  const Mat right = p.gdot * gi;
  const Mat left = gi * p.gdot;
  return 0.5 * trace_form(right, right) + trace_form(p.alpha, Mat(right - aks.mu())) +
         trace_form(p.beta, Mat(left - aks.nu())) + trace_form(p.alpha, Mat(p.g * p.beta * gi)) +
         0.5 * trace_form(p.alpha, p.alpha) + 0.5 * trace_form(p.beta, p.beta);
}

Currents currents(const AKSData& aks, const ConfigPoint& p) {
  validate(aks, p);
  const Mat gi = mat_inv(p.g);
  Currents c;
  c.right = p.gdot * gi + p.g * p.beta * gi + p.alpha;
  c.left = gi * p.gdot + p.beta + gi * p.alpha * p.g;
  const double gap = max_abs(Mat(c.left - gi * c.right * p.g));
  if (gap > 1e-12 * std::max(1.0, max_abs(c.left)) * condition(p.g)) {
    throw InvariantViolation("currents: C^l differs from g^-1 C^r g by " + std::to_string(gap));
  }
  return c;
}

double ELResiduals::max_constraint() const {
  double m = 0.0;
  for (const double r : constraint_right) m = std::max(m, r);
  for (const double r : constraint_left) m = std::max(m, r);
  return m;
}

double ELResiduals::max_evolution() const {
  double m = 0.0;
  for (const double r : evolution_right) m = std::max(m, r);
  for (const double r : evolution_left) m = std::max(m, r);
  return m;
}

ELResiduals el_residuals(const AKSData& aks, const ConfigCurve& curve) {
  if (curve.points.size() != curve.times.size()) throw std::invalid_argument("el_residuals: size mismatch");
  const double h = uniform_step(curve.times, "el_residuals");
  const Splitting& s = aks.splitting();

  std::vector<Mat> cr, cl;
  ELResiduals res;
  for (const auto& p : curve.points) {
    const Currents c = currents(aks, p);
    res.constraint_right.push_back(max_abs(Mat(s.project(c.right, Part::BPerp) - aks.mu())));
    res.constraint_left.push_back(max_abs(Mat(s.project(c.left, Part::APerp) - aks.nu())));
    cr.push_back(c.right);
    cl.push_back(c.left);
  }
  const auto dcr = sample_derivative(cr, h);
  const auto dcl = sample_derivative(cl, h);
  for (std::size_t i = 0; i < cr.size(); ++i) {
    const auto& p = curve.points[i];
    res.evolution_right.push_back(max_abs(Mat(dcr[i] - bracket(cr[i], p.alpha))));
    res.evolution_left.push_back(max_abs(Mat(dcl[i] - bracket(p.beta, cl[i]))));
  }
  return res;
}

ConfigPoint gauge_transform(const AKSData& aks, const ConfigPoint& p, const Mat& a, const Mat& adot, const Mat& b,
                            const Mat& bdot, GaugeCheck check) {
  const Splitting& s = aks.splitting();
  if (check == GaugeCheck::Enforce) {
    if (!s.in_group_a(a) || aks.little_group_a_residual(a) > 1e-8) {
      throw MembershipError("gauge_transform: a is not in the little group of mu");
    }
    if (!s.in_group_b(b) || aks.little_group_b_residual(b) > 1e-8) {
      throw MembershipError("gauge_transform: b is not in the little group of nu");
    }
  }
  const Mat ai = mat_inv(a);
  const Mat bi = mat_inv(b);
  ConfigPoint q;
  q.g = a * p.g * bi;
  q.gdot = adot * p.g * bi + a * p.gdot * bi - a * p.g * bi * bdot * bi;
  q.alpha = a * p.alpha * ai - adot * ai;
  q.beta = b * p.beta * bi + bdot * bi;

  if (check == GaugeCheck::Enforce) {
    std::optional<Factors<double>> before;
    try {
      before = s.factorize(p.g);
    } catch (const NotInCheckedDomain&) {
    }
    if (before) {
      const Factors<double> after = s.factorize(q.g);
      const Mat ga = a * before->g_a;
      const Mat gb = before->g_b * bi;
      const double gap = std::max(max_abs(Mat(after.g_a - ga)) / std::max(1.0, max_abs(ga)),
                                  max_abs(Mat(after.g_b - gb)) / std::max(1.0, max_abs(gb)));
      if (gap > 1e-8) {
        throw InvariantViolation("gauge_transform: factors do not move to (a g_A, g_B b^-1), gap " +
                                 std::to_string(gap));
      }
    }
  }
  return q;
}

ConfigCurve gauge_transform(const AKSData& aks, const ConfigCurve& curve, const GaugeCurve& gauge,
                            GaugeCheck check) {
  if (gauge.times.size() != curve.times.size() || gauge.a.size() != curve.points.size()) {
    throw std::invalid_argument("gauge_transform: gauge curve and trajectory have different samples");
  }
  ConfigCurve out;
  out.times = curve.times;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (std::abs(gauge.times[i] - curve.times[i]) > 1e-12 * std::max(1.0, std::abs(curve.times[i]))) {
      throw std::invalid_argument("gauge_transform: sample times differ");
    }
    out.points.push_back(
        gauge_transform(aks, curve.points[i], gauge.a[i], gauge.adot[i], gauge.b[i], gauge.bdot[i], check));
  }
  return out;
}

QAssembly q_assemble_checked(const AKSData& aks, const ConfigPoint& p, double constraint_tol) {
  const Splitting& s = aks.splitting();
  const Currents c = currents(aks, p);
  QAssembly out;
  out.factors = s.factorize(p.g);
  const Mat& ga = out.factors.g_a;
  const Mat& gb = out.factors.g_b;
  const Mat q_right = mat_inv(ga) * c.right * ga;
  const Mat q_left = gb * c.left * mat_inv(gb);
  const double scale = std::max(1.0, max_abs(q_right));

  out.expression_gap = max_abs(Mat(q_right - q_left));
  if (out.expression_gap > 1e-10 * scale * condition(p.g)) {
    throw InvariantViolation("q_assemble: g_A^-1 C^r g_A and g_B C^l g_B^-1 differ by " +
                             std::to_string(out.expression_gap));
  }
  out.Q = make_lax(s, q_right);

  const double residual = constraint_residual(aks, c);
  if (residual <= constraint_tol) {
    const LaxElement reference = orbit_point(aks, ga, gb);
    out.orbit_gap = max_abs(Mat(reference.L - q_right));
    const double bound = std::max(1e-9, 10.0 * residual) * scale * std::max(condition(ga), condition(gb));
    if (*out.orbit_gap > bound) {
      throw InvariantViolation("q_assemble: Q differs from the orbit formula by " + std::to_string(*out.orbit_gap));
    }
  }
  return out;
}

LaxElement q_assemble(const AKSData& aks, const ConfigPoint& p, double constraint_tol) {
  return q_assemble_checked(aks, p, constraint_tol).Q;
}

double q_split_residual(const AKSData& aks, const ConfigCurve& curve) {
  const double h = uniform_step(curve.times, "q_split_residual");
  const Splitting& s = aks.splitting();
  std::vector<QAssembly> qs;
  for (const auto& p : curve.points) qs.push_back(q_assemble_checked(aks, p));
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < qs.size(); ++i) {
    const Mat& ga = qs[i].factors.g_a;
    const Mat gai = mat_inv(ga);
    const Mat rate = (qs[i + 1].factors.g_a - qs[i - 1].factors.g_a) / (2.0 * h);
    const Mat expected = gai * rate + gai * curve.points[i].alpha * ga;
    worst = std::max(worst, max_abs(Mat(s.project(qs[i].Q.L, Part::A) - expected)));
  }
  return worst;
}

double q_lax_residual(const AKSData& aks, const ConfigCurve& curve) {
  const double h = uniform_step(curve.times, "q_lax_residual");
  const Splitting& s = aks.splitting();
  std::vector<Mat> qs;
  for (const auto& p : curve.points) qs.push_back(q_assemble(aks, p).L);
  const auto dq = sample_derivative(qs, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    worst = std::max(worst, max_abs(Mat(dq[i] + bracket(s.project(qs[i], Part::A), qs[i]))));
  }
  return worst;
}

double action(const AKSData& aks, const ConfigCurve& curve) {
  const double h = uniform_step(curve.times, "action");
  if (curve.points.size() % 2 == 0) throw std::invalid_argument("action: Simpson's rule needs an odd sample count");
  const std::size_t last = curve.points.size() - 1;
  double sum = lagrangian(aks, curve.points.front()) + lagrangian(aks, curve.points.back());
  for (std::size_t i = 1; i < last; ++i) sum += (i % 2 ? 4.0 : 2.0) * lagrangian(aks, curve.points[i]);
  return sum * h / 3.0;
}

ConfigCurve exact_solution_curve(const AKSData& aks, const OrbitSeed& seed, const std::vector<double>& times) {
  const int n = aks.n();
  const Mat L = orbit_point(aks, seed.h_a, seed.h_b).L;
  ConfigCurve curve;
  curve.times = times;
  for (const double t : times) {
    const Mat e = mat_exp(Mat(t * L));
    curve.points.push_back({seed.h_a * e * seed.h_b, seed.h_a * L * e * seed.h_b, Mat::Zero(n, n), Mat::Zero(n, n)});
  }
  return curve;
}

} // namespace aks
