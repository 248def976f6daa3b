#include "aks/dirac_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aks {

namespace {

double condition(const Mat& g) { return max_abs(g) * max_abs(mat_inv(g)); }

PhaseGradient scaled(PhaseGradient d, double c) {
  d.right *= c;
  d.dJ *= c;
  d.d_alpha *= c;
  d.d_pi_alpha *= c;
  d.d_beta *= c;
  d.d_pi_beta *= c;
  return d;
}

PhaseGradient added(PhaseGradient a, const PhaseGradient& b) {
  a.right += b.right;
  a.dJ += b.dJ;
  a.d_alpha += b.d_alpha;
  a.d_pi_alpha += b.d_pi_alpha;
  a.d_beta += b.d_beta;
  a.d_pi_beta += b.d_pi_beta;
  return a;
}

PhasePoint advanced(const PhasePoint& p, const PhaseVelocity& v, double h) {
  return {p.g + h * v.g,           p.Jr + h * v.Jr,       p.alpha + h * v.alpha,
          p.pi_alpha + h * v.pi_alpha, p.beta + h * v.beta, p.pi_beta + h * v.pi_beta};
}

// Values of <pi_{B^perp} J - mu, .> and <pi_{A^perp} J^l - nu, .> as max-norm gaps.
double momentum_gap(const AKSData& aks, const PhasePoint& p) {
  const Splitting& s = aks.splitting();
  return std::max(max_abs(Mat(s.project(p.Jr, Part::BPerp) - aks.mu())),
                  max_abs(Mat(s.project(p.j_l(), Part::APerp) - aks.nu())));
}

// Coefficient vectors c with sum_m c_m <X^m, xi> = 0 for every xi in the little algebra,
// i.e. the annihilator of the little algebra inside the dual of the subalgebra.
Mat annihilator_coefficients(const std::vector<Mat>& little, int dim, const std::function<Vec(const Mat&)>& coords) {
  if (little.empty()) return Mat::Identity(dim, dim);
  Mat k(static_cast<Eigen::Index>(little.size()), dim);
  for (std::size_t i = 0; i < little.size(); ++i) k.row(static_cast<Eigen::Index>(i)) = coords(little[i]).transpose();
  return nullspace(k);
}

} // namespace

Mat PhasePoint::j_l() const { return mat_inv(g) * Jr * g; }

void validate(const AKSData& aks, const PhasePoint& p) {
  const Splitting& s = aks.splitting();
  mat_inv(p.g);
  s.algebra().require_member(p.Jr, "PhasePoint: J^r");
  if (!s.in_a(p.alpha)) throw MembershipError("PhasePoint: alpha is not in A");
  if (!s.in_b(p.beta)) throw MembershipError("PhasePoint: beta is not in B");
  if (!s.in_b_perp(p.pi_alpha)) throw MembershipError("PhasePoint: pi_alpha is not in B^perp");
  if (!s.in_a_perp(p.pi_beta)) throw MembershipError("PhasePoint: pi_beta is not in A^perp");
}

int phase_dimension(const AKSData& aks) {
  const Splitting& s = aks.splitting();
  return 2 * s.algebra().dim() + 2 * s.dim_a() + 2 * s.dim_b();
}

PhaseGradient PhaseGradient::zero(const AKSData& aks) {
  const Splitting& s = aks.splitting();
  const int n = s.n();
  return {Mat::Zero(n, n), Mat::Zero(n, n), Vec::Zero(s.dim_a()), Vec::Zero(s.dim_a()),
          Vec::Zero(s.dim_b()),  Vec::Zero(s.dim_b())};
}

// ---------------------------------------------------------------------------
// Observables

namespace observables {

Observable jr_component(const AKSData& aks, const Mat& T) {
  const Mat t = aks.algebra().dual_projection(T);
  return {"<J^r,T>", [T](const PhasePoint& p) { return trace_form(p.Jr, T); },
          [&aks, t](const PhasePoint&) {
            PhaseGradient d = PhaseGradient::zero(aks);
            d.dJ = t;
            return d;
          }};
}

Observable jl_component(const AKSData& aks, const Mat& T) {
  return {"<J^l,T>", [T](const PhasePoint& p) { return trace_form(p.j_l(), T); },
          [&aks, T](const PhasePoint& p) {
            const MatrixAlgebra& alg = aks.algebra();
            const Mat m = p.g * T * mat_inv(p.g);
            PhaseGradient d = PhaseGradient::zero(aks);
            d.dJ = alg.dual_projection(m);
            d.right = alg.dual_projection(bracket(m, p.Jr));
            return d;
          }};
}

Observable g_entry(const AKSData& aks, int i, int j) {
  const int n = aks.n();
  return {"g_" + std::to_string(i + 1) + std::to_string(j + 1), [i, j](const PhasePoint& p) { return p.g(i, j); },
          [&aks, i, j, n](const PhasePoint& p) {
            PhaseGradient d = PhaseGradient::zero(aks);
            d.right = aks.algebra().dual_projection(Mat(p.g * unit_matrix(n, j, i)));
            return d;
          }};
}

Observable alpha_coord(const AKSData& aks, int m) {
  const Mat dual = aks.splitting().dual_a().at(m);
  return {"alpha^" + std::to_string(m), [dual](const PhasePoint& p) { return trace_form(p.alpha, dual); },
          [&aks, m](const PhasePoint&) {
            PhaseGradient d = PhaseGradient::zero(aks);
            d.d_alpha(m) = 1.0;
            return d;
          }};
}

Observable pi_alpha_coord(const AKSData& aks, int m) {
  const Mat x = aks.splitting().basis_a().at(m);
  return {"p_" + std::to_string(m), [x](const PhasePoint& p) { return trace_form(p.pi_alpha, x); },
          [&aks, m](const PhasePoint&) {
            PhaseGradient d = PhaseGradient::zero(aks);
            d.d_pi_alpha(m) = 1.0;
            return d;
          }};
}

Observable beta_coord(const AKSData& aks, int r) {
  const Mat dual = aks.splitting().dual_b().at(r);
  return {"beta^" + std::to_string(r), [dual](const PhasePoint& p) { return trace_form(p.beta, dual); },
          [&aks, r](const PhasePoint&) {
            PhaseGradient d = PhaseGradient::zero(aks);
            d.d_beta(r) = 1.0;
            return d;
          }};
}

Observable pi_beta_coord(const AKSData& aks, int r) {
  const Mat y = aks.splitting().basis_b().at(r);
  return {"q_" + std::to_string(r), [y](const PhasePoint& p) { return trace_form(p.pi_beta, y); },
          [&aks, r](const PhasePoint&) {
            PhaseGradient d = PhaseGradient::zero(aks);
            d.d_pi_beta(r) = 1.0;
            return d;
          }};
}

Observable ltilde_component(const AKSData& aks, const Mat& T) {
  return {"<L~,T>",
          [&aks, T](const PhasePoint& p) {
            const Factors<double> f = aks.splitting().factorize(p.g);
            return trace_form(p.Jr, Mat(f.g_a * T * mat_inv(f.g_a)));
          },
          [&aks, T](const PhasePoint& p) {
            const Splitting& s = aks.splitting();
            const Factors<double> f = s.factorize(p.g);
            const Mat gai = mat_inv(f.g_a);
            const Mat lt = gai * p.Jr * f.g_a;
            PhaseGradient d = PhaseGradient::zero(aks);
            d.dJ = s.algebra().dual_projection(Mat(f.g_a * T * gai));
            // moving g by e^{sX} moves g_A by g_A pi_A(g_A^-1 X g_A) to first order
            d.right = s.algebra().dual_projection(Mat(f.g_a * s.project(bracket(T, lt), Part::BPerp) * gai));
            return d;
          }};
}

Observable ltilde_energy(const AKSData& aks) {
  return numeric("1/2<L~,L~>", [&aks](const PhasePoint& p) {
    const Factors<double> f = aks.splitting().factorize(p.g);
    const Mat lt = mat_inv(f.g_a) * p.Jr * f.g_a;
    return 0.5 * trace_form(lt, lt);
  });
}

Observable product(const Observable& f, const Observable& g) {
  Observable out{"(" + f.label + ")*(" + g.label + ")",
                 [f, g](const PhasePoint& p) { return f.eval(p) * g.eval(p); },
                 {}};
  if (f.exact && g.exact) {
    out.exact = [f, g](const PhasePoint& p) {
      return added(scaled(f.exact(p), g.eval(p)), scaled(g.exact(p), f.eval(p)));
    };
  }
  return out;
}

Observable sum(const Observable& f, const Observable& g, double scale_g) {
  Observable out{f.label + " + " + g.label,
                 [f, g, scale_g](const PhasePoint& p) { return f.eval(p) + scale_g * g.eval(p); },
                 {}};
  if (f.exact && g.exact) {
    out.exact = [f, g, scale_g](const PhasePoint& p) { return added(f.exact(p), scaled(g.exact(p), scale_g)); };
  }
  return out;
}

Observable numeric(std::string label, std::function<double(const PhasePoint&)> f) {
  return {std::move(label), std::move(f), {}};
}

} // namespace observables

// ---------------------------------------------------------------------------
// Gradients and brackets

PhaseGradient finite_difference_gradient(const AKSData& aks, const Observable& f, const PhasePoint& p) {
  const Splitting& s = aks.splitting();
  const MatrixAlgebra& alg = s.algebra();
  PhaseGradient d = PhaseGradient::zero(aks);
  const double base = 1e-6;

  auto central = [&](auto&& at) {
    const double h = at.step;
    PhasePoint plus = p, minus = p;
    at.apply(plus, h);
    at.apply(minus, -h);
    return (f.eval(plus) - f.eval(minus)) / (2.0 * h);
  };
  struct Move {
    double step;
    std::function<void(PhasePoint&, double)> apply;
  };

  const double hg = base;
  const double hj = base * std::max(1.0, max_abs(p.Jr));
  for (int a = 0; a < alg.dim(); ++a) {
    const Mat& t = alg.basis()[a];
    const double dg = central(Move{hg, [&t](PhasePoint& q, double h) { q.g = mat_exp(Mat(h * t)) * q.g; }});
    const double dj = central(Move{hj, [&t](PhasePoint& q, double h) { q.Jr += h * t; }});
    d.right += dg * alg.dual_basis()[a];
    d.dJ += dj * alg.dual_basis()[a];
  }
  const double ha = base * std::max(1.0, max_abs(p.alpha));
  const double hpa = base * std::max(1.0, max_abs(p.pi_alpha));
  for (int m = 0; m < s.dim_a(); ++m) {
    const Mat& x = s.basis_a()[m];
    const Mat& xd = s.dual_a()[m];
    d.d_alpha(m) = central(Move{ha, [&x](PhasePoint& q, double h) { q.alpha += h * x; }});
    d.d_pi_alpha(m) = central(Move{hpa, [&xd](PhasePoint& q, double h) { q.pi_alpha += h * xd; }});
  }
  const double hb = base * std::max(1.0, max_abs(p.beta));
  const double hpb = base * std::max(1.0, max_abs(p.pi_beta));
  for (int r = 0; r < s.dim_b(); ++r) {
    const Mat& y = s.basis_b()[r];
    const Mat& yd = s.dual_b()[r];
    d.d_beta(r) = central(Move{hb, [&y](PhasePoint& q, double h) { q.beta += h * y; }});
    d.d_pi_beta(r) = central(Move{hpb, [&yd](PhasePoint& q, double h) { q.pi_beta += h * yd; }});
  }
  return d;
}

PhaseGradient gradient(const AKSData& aks, const Observable& f, const PhasePoint& p, GradientMode mode) {
  PhaseGradient d = (mode == GradientMode::Auto && f.exact) ? f.exact(p) : finite_difference_gradient(aks, f, p);
  const bool finite = d.right.allFinite() && d.dJ.allFinite() && d.d_alpha.allFinite() &&
                      d.d_pi_alpha.allFinite() && d.d_beta.allFinite() && d.d_pi_beta.allFinite();
  if (!finite) throw NonFiniteResult("gradient: non-finite differential of " + f.label);
  return d;
}

double poisson_bracket(const AKSData&, const PhaseGradient& df, const PhaseGradient& dg, const PhasePoint& p) {
  return trace_form(df.right, dg.dJ) - trace_form(dg.right, df.dJ) + trace_form(p.Jr, bracket(df.dJ, dg.dJ)) +
         df.d_alpha.dot(dg.d_pi_alpha) - dg.d_alpha.dot(df.d_pi_alpha) + df.d_beta.dot(dg.d_pi_beta) -
         dg.d_beta.dot(df.d_pi_beta);
}

double poisson_bracket(const AKSData& aks, const Observable& f, const Observable& g, const PhasePoint& p,
                       GradientMode mode) {
  return poisson_bracket(aks, gradient(aks, f, p, mode), gradient(aks, g, p, mode), p);
}

PhaseVelocity hamiltonian_vector_field(const AKSData& aks, const PhaseGradient& dh, const PhasePoint& p) {
  const Splitting& s = aks.splitting();
  PhaseVelocity v;
  v.g = dh.dJ * p.g;
  v.Jr = bracket(dh.dJ, p.Jr) - dh.right;
  v.alpha = s.combine_a(dh.d_pi_alpha);
  v.pi_alpha = -s.combine_dual_a(dh.d_alpha);
  v.beta = s.combine_b(dh.d_pi_beta);
  v.pi_beta = -s.combine_dual_b(dh.d_beta);
  return v;
}

// ---------------------------------------------------------------------------
// Primary Hamiltonian

namespace {
void require_multipliers(const Splitting& s, const Mat& v_alpha, const Mat& v_beta) {
  if (!s.in_a(v_alpha)) throw MembershipError("primary_hamiltonian: v_alpha is not in A");
  if (!s.in_b(v_beta)) throw MembershipError("primary_hamiltonian: v_beta is not in B");
}
} // namespace

double primary_hamiltonian(const AKSData& aks, const PhasePoint& p, const Mat& v_alpha, const Mat& v_beta) {
  const Splitting& s = aks.splitting();
  require_multipliers(s, v_alpha, v_beta);
  const LaxElement right = make_lax(s, p.Jr);
  const LaxElement left = make_lax(s, p.j_l());
  return 0.5 * trace_form(p.Jr, p.Jr) + trace_form(p.alpha, Mat(aks.mu() - right.part_a_star)) +
         trace_form(p.beta, Mat(aks.nu() - left.part_b_star)) + trace_form(v_alpha, p.pi_alpha) +
         trace_form(v_beta, p.pi_beta);
}

PhaseGradient primary_hamiltonian_gradient(const AKSData& aks, const PhasePoint& p, const Mat& v_alpha,
                                           const Mat& v_beta) {
  const Splitting& s = aks.splitting();
  const MatrixAlgebra& alg = s.algebra();
  require_multipliers(s, v_alpha, v_beta);
  const Mat gbg = p.g * p.beta * mat_inv(p.g);
  const Mat jl = p.j_l();
  PhaseGradient d = PhaseGradient::zero(aks);
  d.dJ = alg.dual_projection(Mat(p.Jr - p.alpha - gbg));
  d.right = alg.dual_projection(bracket(p.Jr, gbg));
  for (int m = 0; m < s.dim_a(); ++m) d.d_alpha(m) = trace_form(s.basis_a()[m], Mat(aks.mu() - p.Jr));
  d.d_pi_alpha = s.coords_a(v_alpha);
  for (int r = 0; r < s.dim_b(); ++r) d.d_beta(r) = trace_form(s.basis_b()[r], Mat(aks.nu() - jl));
  d.d_pi_beta = s.coords_b(v_beta);
  return d;
}

Observable primary_hamiltonian_observable(const AKSData& aks, const Mat& v_alpha, const Mat& v_beta) {
  return {"H_P", [&aks, v_alpha, v_beta](const PhasePoint& p) { return primary_hamiltonian(aks, p, v_alpha, v_beta); },
          [&aks, v_alpha, v_beta](const PhasePoint& p) {
            return primary_hamiltonian_gradient(aks, p, v_alpha, v_beta);
          }};
}

// ---------------------------------------------------------------------------
// Constraints

const char* to_string(ConstraintKind kind) {
  switch (kind) {
  case ConstraintKind::PrimaryPiAlpha:
    return "primary-pi_alpha";
  case ConstraintKind::PrimaryPiBeta:
    return "primary-pi_beta";
  case ConstraintKind::SecondaryJr:
    return "secondary-J^r";
  case ConstraintKind::SecondaryJl:
    return "secondary-J^l";
  case ConstraintKind::SecondaryAlpha:
    return "secondary-alpha";
  case ConstraintKind::SecondaryBeta:
    return "secondary-beta";
  }
  return "unknown";
}

std::size_t ConstraintSet::count(ConstraintKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(constraints.begin(), constraints.end(), [kind](const Constraint& c) { return c.kind == kind; }));
}

Vec ConstraintSet::values(const PhasePoint& p) const {
  Vec v(static_cast<Eigen::Index>(constraints.size()));
  for (std::size_t a = 0; a < constraints.size(); ++a) v(static_cast<Eigen::Index>(a)) = constraints[a].phi(p);
  return v;
}

double ConstraintSet::max_violation(const PhasePoint& p) const {
  return constraints.empty() ? 0.0 : values(p).cwiseAbs().maxCoeff();
}

ConstraintSet build_constraints(const AKSData& aks) {
  const Splitting& s = aks.splitting();
  ConstraintSet cs;
  auto add = [&cs](ConstraintKind kind, Observable phi) {
    phi.label = std::string(to_string(kind)) + "[" + std::to_string(cs.count(kind)) + "]";
    cs.constraints.push_back({kind, std::move(phi)});
  };

  for (int m = 0; m < s.dim_a(); ++m) add(ConstraintKind::PrimaryPiAlpha, observables::pi_alpha_coord(aks, m));
  for (int r = 0; r < s.dim_b(); ++r) add(ConstraintKind::PrimaryPiBeta, observables::pi_beta_coord(aks, r));
  for (int m = 0; m < s.dim_a(); ++m) {
    const Mat& x = s.basis_a()[m];
    const Observable jr = observables::jr_component(aks, x);
    const double offset = trace_form(aks.mu(), x);
    add(ConstraintKind::SecondaryJr,
        {"", [jr, offset](const PhasePoint& p) { return jr.eval(p) - offset; }, jr.exact});
  }
  for (int r = 0; r < s.dim_b(); ++r) {
    const Mat& y = s.basis_b()[r];
    const Observable jl = observables::jl_component(aks, y);
    const double offset = trace_form(aks.nu(), y);
    add(ConstraintKind::SecondaryJl,
        {"", [jl, offset](const PhasePoint& p) { return jl.eval(p) - offset; }, jl.exact});
  }

  const Mat rho = annihilator_coefficients(aks.little_a(), s.dim_a(), [&s](const Mat& x) { return s.coords_a(x); });
  for (Eigen::Index k = 0; k < rho.cols(); ++k) {
    const Vec c = rho.col(k);
    const Mat r = s.combine_dual_a(c);
    add(ConstraintKind::SecondaryAlpha, {"", [r](const PhasePoint& p) { return trace_form(p.alpha, r); },
                                         [&aks, c](const PhasePoint&) {
                                           PhaseGradient d = PhaseGradient::zero(aks);
                                           d.d_alpha = c;
                                           return d;
                                         }});
  }
  const Mat sigma = annihilator_coefficients(aks.little_b(), s.dim_b(), [&s](const Mat& y) { return s.coords_b(y); });
  for (Eigen::Index k = 0; k < sigma.cols(); ++k) {
    const Vec c = sigma.col(k);
    const Mat r = s.combine_dual_b(c);
    add(ConstraintKind::SecondaryBeta, {"", [r](const PhasePoint& p) { return trace_form(p.beta, r); },
                                        [&aks, c](const PhasePoint&) {
                                          PhaseGradient d = PhaseGradient::zero(aks);
                                          d.d_beta = c;
                                          return d;
                                        }});
  }
  return cs;
}

namespace {
std::vector<PhaseGradient> constraint_gradients(const AKSData& aks, const ConstraintSet& cs, const PhasePoint& p,
                                                GradientMode mode) {
  std::vector<PhaseGradient> out;
  out.reserve(cs.size());
  for (const auto& c : cs.constraints) out.push_back(gradient(aks, c.phi, p, mode));
  return out;
}

Mat bracket_matrix(const AKSData& aks, const std::vector<PhaseGradient>& d, const PhasePoint& p) {
  const auto k = static_cast<Eigen::Index>(d.size());
  Mat c = Mat::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = a + 1; b < k; ++b) {
      c(a, b) = poisson_bracket(aks, d[a], d[b], p);
      c(b, a) = -c(a, b);
    }
  return c;
}
} // namespace

Mat constraint_matrix(const AKSData& aks, const ConstraintSet& cs, const PhasePoint& p) {
  return bracket_matrix(aks, constraint_gradients(aks, cs, p, GradientMode::Auto), p);
}

Classification classify_constraints(const AKSData& aks, const ConstraintSet& cs,
                                    const std::vector<PhasePoint>& points, double threshold) {
  if (points.empty()) throw std::invalid_argument("classify_constraints: no sample points");
  const auto k = static_cast<Eigen::Index>(cs.size());
  Classification cls;
  cls.phase_dimension = phase_dimension(aks);
  if (k == 0) {
    cls.first_class = Mat::Zero(0, 0);
    cls.second_class = Mat::Zero(0, 0);
    return cls;
  }
  Mat stacked(k * static_cast<Eigen::Index>(points.size()), k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double violation = cs.max_violation(points[i]);
    if (violation > 1e-10) {
      throw std::invalid_argument("classify_constraints: sample point " + std::to_string(i) +
                                  " is off the constraint surface by " + std::to_string(violation));
    }
    stacked.middleRows(static_cast<Eigen::Index>(i) * k, k) = constraint_matrix(aks, cs, points[i]);
  }
  Eigen::JacobiSVD<Mat> svd(stacked, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double cut = threshold * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  cls.second_class = svd.matrixV().leftCols(rank);
  cls.first_class = svd.matrixV().rightCols(k - rank);
  for (Eigen::Index a = 0; a < k; ++a) {
    const double leak = rank ? cls.second_class.row(a).norm() : 0.0;
    cls.constraint_is_first_class.push_back(leak <= 1e-8);
  }
  return cls;
}

double dirac_bracket(const AKSData& aks, const Observable& f, const Observable& g, const ConstraintSet& cs,
                     const Classification& cls, const PhasePoint& p, GradientMode mode) {
  const PhaseGradient df = gradient(aks, f, p, mode);
  const PhaseGradient dg = gradient(aks, g, p, mode);
  const double plain = poisson_bracket(aks, df, dg, p);
  const Mat& w = cls.second_class;
  if (w.cols() == 0) return plain;
  if (w.rows() != static_cast<Eigen::Index>(cs.size())) {
    throw std::invalid_argument("dirac_bracket: classification does not match the constraint set");
  }

  const auto dphi = constraint_gradients(aks, cs, p, mode);
  const Mat css = w.transpose() * bracket_matrix(aks, dphi, p) * w;
  Vec u_f(static_cast<Eigen::Index>(cs.size())), u_g(static_cast<Eigen::Index>(cs.size()));
  for (std::size_t a = 0; a < cs.size(); ++a) {
    u_f(static_cast<Eigen::Index>(a)) = poisson_bracket(aks, df, dphi[a], p);
    u_g(static_cast<Eigen::Index>(a)) = poisson_bracket(aks, dphi[a], dg, p);
  }

  Eigen::JacobiSVD<Mat> svd(css, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double cut = 1e-8 * std::max(1.0, sv(0));
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  if (rank != w.cols()) {
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    throw IllConditioned("dirac_bracket: second-class block has rank " + std::to_string(rank) + ", expected " +
                             std::to_string(w.cols()),
                         cond);
  }
  const Vec sol = svd.solve(Vec(w.transpose() * u_g));
  return plain - (w.transpose() * u_f).dot(sol);
}

// ---------------------------------------------------------------------------
// L~, gauge actions, constrained points

LaxElement ltilde(const AKSData& aks, const PhasePoint& p) {
  const Splitting& s = aks.splitting();
  const Factors<double> f = s.factorize(p.g);
  const Mat via_right = mat_inv(f.g_a) * p.Jr * f.g_a;
  const Mat via_left = f.g_b * p.j_l() * mat_inv(f.g_b);
  const double scale = std::max(1.0, max_abs(via_right));
  const double gap = max_abs(Mat(via_right - via_left));
  if (gap > 1e-10 * scale * condition(p.g)) {
    throw InvariantViolation("ltilde: g_A^-1 J^r g_A and g_B J^l g_B^-1 differ by " + std::to_string(gap));
  }
  const double off_surface = momentum_gap(aks, p);
  if (off_surface <= 1e-9) {
    const double orbit_gap = max_abs(Mat(orbit_point(aks, f.g_a, f.g_b).L - via_right));
    const double bound = std::max(1e-9, 10.0 * off_surface) * scale * std::max(condition(f.g_a), condition(f.g_b));
    if (orbit_gap > bound) {
      throw InvariantViolation("ltilde: L~ differs from the orbit formula by " + std::to_string(orbit_gap));
    }
  }
  return make_lax(s, via_right);
}

PhasePoint gauge_actions(const AKSData& aks, const PhasePoint& p, const Mat& X, const Mat& Y, const Mat& a,
                         const Mat& b) {
  const Splitting& s = aks.splitting();
  if (!aks.in_little_a(X)) throw MembershipError("gauge_actions: X is not in the little algebra of mu");
  if (!aks.in_little_b(Y)) throw MembershipError("gauge_actions: Y is not in the little algebra of nu");
  if (!s.in_group_a(a) || aks.little_group_a_residual(a) > 1e-8) {
    throw MembershipError("gauge_actions: a is not in the little group of mu");
  }
  if (!s.in_group_b(b) || aks.little_group_b_residual(b) > 1e-8) {
    throw MembershipError("gauge_actions: b is not in the little group of nu");
  }
  const Mat ai = mat_inv(a);
  const Mat bi = mat_inv(b);
  PhasePoint q = p;
  q.alpha = p.alpha + X;
  q.beta = p.beta + Y;
  q.g = a * p.g * bi;
  q.Jr = a * p.Jr * ai;

  const ConstraintSet cs = build_constraints(aks);
  const double before = cs.max_violation(p);
  if (before <= 1e-9) {
    const double after = cs.max_violation(q);
    if (after > 1e-8 * std::max(1.0, max_abs(q.Jr)) * condition(a) * condition(b)) {
      throw InvariantViolation("gauge_actions: constraint surface not preserved, violation " + std::to_string(after));
    }
  }
  try {
    const Factors<double> f = s.factorize(p.g);
    const Factors<double> h = s.factorize(q.g);
    const Mat ga = a * f.g_a, gb = f.g_b * bi;
    const double gap = std::max(max_abs(Mat(h.g_a - ga)) / std::max(1.0, max_abs(ga)),
                                max_abs(Mat(h.g_b - gb)) / std::max(1.0, max_abs(gb)));
    if (gap > 1e-8) {
      throw InvariantViolation("gauge_actions: factors do not move to (a g_A, g_B b^-1), gap " + std::to_string(gap));
    }
  } catch (const NotInCheckedDomain&) {
  }
  return q;
}

PhasePoint constrained_point(const AKSData& aks, const Mat& g_a, const Mat& g_b, const Mat& alpha, const Mat& beta) {
  if (!aks.in_little_a(alpha)) throw MembershipError("constrained_point: alpha is not in the little algebra of mu");
  if (!aks.in_little_b(beta)) throw MembershipError("constrained_point: beta is not in the little algebra of nu");
  const Splitting& s = aks.splitting();
  const int n = s.n();
  const Mat L = orbit_point(aks, g_a, g_b).L;
  return {g_a * g_b, g_a * L * mat_inv(g_a), alpha, Mat::Zero(n, n), beta, Mat::Zero(n, n)};
}

PhasePoint random_constrained_point(const AKSData& aks, std::mt19937_64& rng, double scale) {
  const Splitting& s = aks.splitting();
  const int n = s.n();
  const Mat g_a = random_exp(s.basis_a(), n, rng, scale);
  const Mat g_b = random_exp(s.basis_b(), n, rng, scale);
  const Mat alpha = aks.little_a().empty() ? Mat(Mat::Zero(n, n)) : random_combination(aks.little_a(), n, rng, scale);
  const Mat beta = aks.little_b().empty() ? Mat(Mat::Zero(n, n)) : random_combination(aks.little_b(), n, rng, scale);
  return constrained_point(aks, g_a, g_b, alpha, beta);
}

PhasePoint random_phase_point(const AKSData& aks, std::mt19937_64& rng, double scale) {
  const Splitting& s = aks.splitting();
  const int n = s.n();
  PhasePoint p;
  p.g = random_exp(s.basis_a(), n, rng, scale) * random_exp(s.basis_b(), n, rng, scale);
  p.Jr = random_combination(s.algebra().basis(), n, rng, scale);
  p.alpha = random_combination(s.basis_a(), n, rng, scale);
  p.pi_alpha = random_combination(s.dual_a(), n, rng, scale);
  p.beta = random_combination(s.basis_b(), n, rng, scale);
  p.pi_beta = random_combination(s.dual_b(), n, rng, scale);
  return p;
}

// ---------------------------------------------------------------------------
// Constrained dynamics

double ConstrainedTrajectory::max_drift() const {
  double m = 0.0;
  for (const double d : drift) m = std::max(m, d);
  return m;
}

ConstrainedTrajectory constrained_integrate(const AKSData& aks, const PhasePoint& p0, const Mat& v_alpha,
                                            const Mat& v_beta, double t_end, double dt,
                                            const ConstrainedOptions& options) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("constrained_integrate: need dt > 0 and t_end > 0");
  validate(aks, p0);
  if (!aks.in_little_a(v_alpha)) throw MembershipError("constrained_integrate: v_alpha is not in the little algebra");
  if (!aks.in_little_b(v_beta)) throw MembershipError("constrained_integrate: v_beta is not in the little algebra");
  const ConstraintSet cs = build_constraints(aks);
  if (cs.max_violation(p0) > 1e-9) {
    throw std::invalid_argument("constrained_integrate: initial point is off the constraint surface");
  }

  auto velocity = [&](const PhasePoint& p) {
    return hamiltonian_vector_field(aks, primary_hamiltonian_gradient(aks, p, v_alpha, v_beta), p);
  };
  ConstrainedTrajectory traj;
  auto record = [&](double t, const PhasePoint& p) {
    const double drift = cs.max_violation(p);
    if (drift > options.drift_limit) {
      throw ConstraintDrift("constrained_integrate: constraint drift " + std::to_string(drift) + " at t = " +
                                std::to_string(t),
                            t, drift);
    }
    traj.times.push_back(t);
    traj.points.push_back(p);
    traj.ltilde.push_back(ltilde(aks, p));
    traj.drift.push_back(drift);
  };

  const long steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
  const int stride = std::max(1, options.sample_stride);
  PhasePoint p = p0;
  record(0.0, p);
  double t = 0.0;
  for (long k = 1; k <= steps; ++k) {
    const double h = std::min(dt, t_end - t);
    const PhaseVelocity k1 = velocity(p);
    const PhaseVelocity k2 = velocity(advanced(p, k1, 0.5 * h));
    const PhaseVelocity k3 = velocity(advanced(p, k2, 0.5 * h));
    const PhaseVelocity k4 = velocity(advanced(p, k3, h));
    PhaseVelocity mean;
    mean.g = (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g) / 6.0;
    mean.Jr = (k1.Jr + 2.0 * k2.Jr + 2.0 * k3.Jr + k4.Jr) / 6.0;
    mean.alpha = (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha) / 6.0;
    mean.pi_alpha = (k1.pi_alpha + 2.0 * k2.pi_alpha + 2.0 * k3.pi_alpha + k4.pi_alpha) / 6.0;
    mean.beta = (k1.beta + 2.0 * k2.beta + 2.0 * k3.beta + k4.beta) / 6.0;
    mean.pi_beta = (k1.pi_beta + 2.0 * k2.pi_beta + 2.0 * k3.pi_beta + k4.pi_beta) / 6.0;
    p = advanced(p, mean, h);
    t = (k == steps) ? t_end : k * dt;
    if (k % stride == 0 || k == steps) record(t, p);
  }
  return traj;
}

} // namespace aks
