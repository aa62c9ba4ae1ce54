#include "dualsim/projectors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace dualsim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegenerateTol = 1e-12;
constexpr double kUnitCircleTol = 1e-7;

// The single-contact problem restricted to the plane (D lambda + v)_n = 0,
// with the objective 1/2 x^T D x + x^T (v + s), in polar coordinates over the
// tangential reaction.
struct PolarProblem {
  Mat3 D;
  Vec3 w;
  double mu;
  double Dnn, d, e;
  double a_plane;  // -v_n
  double a;        // -mu v_n
  Mat2 Dhat;
  Vec2 vhat;

  explicit PolarProblem(const LocalContactProblem& p)
      : D(p.D), w(p.v + p.s), mu(p.mu), Dnn(p.D(2, 2)), d(p.D(2, 0)), e(p.D(2, 1)) {
    a_plane = -p.v[2];
    a = mu * a_plane;
    const Vec2 dT(d, e);
    Dhat = p.D.topLeftCorner<2, 2>() - dT * dT.transpose() / Dnn;
    Dhat = 0.5 * (Dhat + Dhat.transpose()).eval();
    vhat = w.head<2>() - dT * w[2] / Dnn;
  }

  double f(double phi) const { return Dnn + mu * (d * std::cos(phi) + e * std::sin(phi)); }
  double radius(double phi) const { return a / f(phi); }
  bool feasible(double phi) const {
    const double fv = f(phi);
    return fv > 0.0 && std::isfinite(a / fv);
  }

  Vec3 lambda_at(double phi) const {
    const double r = radius(phi);
    Vec3 l;
    l[0] = r * std::cos(phi);
    l[1] = r * std::sin(phi);
    l[2] = (a_plane - d * l[0] - e * l[1]) / Dnn;
    const double t = std::hypot(l[0], l[1]);
    if (t > mu * l[2] && t > 0.0) l.head<2>() *= std::max(0.0, mu * l[2]) / t;
    return l;
  }

  double objective(double phi) const {
    const double r = radius(phi);
    const Vec2 c(std::cos(phi), std::sin(phi));
    return 0.5 * r * r * c.dot(Dhat * c) + r * c.dot(vhat);
  }

  // f^3 / a times the derivative of the objective along the conic: same sign
  // as the derivative wherever the angle is feasible.
  double gradient(double phi) const {
    const double cs = std::cos(phi), sn = std::sin(phi);
    const Vec2 c(cs, sn);
    const Vec2 dc(-sn, cs);
    const double fv = Dnn + mu * (d * cs + e * sn);
    const double df = mu * (-d * sn + e * cs);
    const double Q = c.dot(Dhat * c);
    const double dQ = 2.0 * dc.dot(Dhat * c);
    const double L = c.dot(vhat);
    const double dL = dc.dot(vhat);
    return a * (-df * Q + 0.5 * fv * dQ) + fv * (-df * L + fv * dL);
  }

  double full_objective(const Vec3& l) const { return 0.5 * l.dot(D * l) + l.dot(w); }
};

struct FeasibleRange {
  bool full_circle;
  double lo, hi;
};

FeasibleRange feasible_range(const ConicSection& c) {
  return {c.full_circle, c.interval_lo, c.interval_hi};
}

// Sign-bracketed bisection on the gradient, terminating on the reaction gap.
double bisect(const PolarProblem& P, double lo, double hi, double eps) {
  double g_lo = P.gradient(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = P.gradient(mid);
    if ((g_mid < 0.0) == (g_lo < 0.0) && g_mid != 0.0) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
    if ((P.lambda_at(lo) - P.lambda_at(hi)).norm() < eps) break;
  }
  return 0.5 * (lo + hi);
}

// Brute-force scan of the feasible range for sign changes of the gradient,
// each refined by bisection; returns the angle with the lowest objective.
double scan_feasible(const PolarProblem& P, const FeasibleRange& R, int intervals,
                     double eps) {
  double lo = R.lo, hi = R.hi;
  if (!R.full_circle) {
    const double inset = 1e-9 * (hi - lo);
    lo += inset;
    hi -= inset;
  }
  const double step = (hi - lo) / intervals;
  double best_phi = lo;
  double best_obj = std::numeric_limits<double>::infinity();
  double prev = lo;
  double g_prev = P.gradient(prev);
  auto consider = [&](double phi) {
    if (!P.feasible(phi)) return;
    const double obj = P.objective(phi);
    if (obj < best_obj) {
      best_obj = obj;
      best_phi = phi;
    }
  };
  consider(lo);
  for (int i = 1; i <= intervals; ++i) {
    const double phi = lo + i * step;
    const double g = P.gradient(phi);
    consider(phi);
    if ((g < 0.0) != (g_prev < 0.0)) consider(bisect(P, prev, phi, eps));
    prev = phi;
    g_prev = g;
  }
  return best_phi;
}

Vec3 degenerate_solution(const PolarProblem& P, const ConicSection& c) {
  if (c.r_dmu > 1.0) return Vec3::Zero();
  Vec3 best = Vec3::Zero();
  double best_obj = 0.0;
  for (double phi : {c.phi0 - c.dphi, c.phi0 + c.dphi}) {
    const Vec3 u(std::cos(phi), std::sin(phi), 1.0 / P.mu);
    const double uDu = u.dot(P.D * u);
    const double r = std::max(0.0, -u.dot(P.w) / uDu);
    const Vec3 l = r * u;
    const double obj = P.full_objective(l);
    if (obj < best_obj) {
      best_obj = obj;
      best = l;
    }
  }
  return best;
}

std::vector<double> quartic_angles(const PolarProblem& P) {
  // The scaled gradient is a trigonometric polynomial of degree two, so five
  // uniform samples determine its coefficients exactly.
  double A0 = 0.0, A1 = 0.0, B1 = 0.0, A2 = 0.0, B2 = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double t = 2.0 * kPi * k / 5.0;
    const double g = P.gradient(t);
    A0 += g / 5.0;
    A1 += 0.4 * g * std::cos(t);
    B1 += 0.4 * g * std::sin(t);
    A2 += 0.4 * g * std::cos(2.0 * t);
    B2 += 0.4 * g * std::sin(2.0 * t);
  }
  using C = std::complex<double>;
  // Multiplying by 2 x^2 with x = exp(i phi) gives a quartic in x.
  std::vector<C> coeff = {C(A2, B2), C(A1, B1), C(2.0 * A0, 0.0), C(A1, -B1), C(A2, -B2)};
  double scale = 0.0;
  for (const C& c : coeff) scale = std::max(scale, std::abs(c));
  std::vector<double> out;
  if (!(scale > 0.0)) return out;
  for (C& c : coeff) c /= scale;
  // coeff[k] multiplies x^k; strip vanishing leading and trailing terms.
  int hi = 4, lo = 0;
  while (hi > lo && std::abs(coeff[hi]) < 1e-14) --hi;
  while (lo < hi && std::abs(coeff[lo]) < 1e-14) ++lo;
  const int n = hi - lo;
  if (n <= 0) return out;
  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) companion(i, n - 1) = -coeff[lo + i] / coeff[hi];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(companion, false);
  if (es.info() != Eigen::Success) return out;
  auto g_poly = [&](double phi) {
    return A0 + A1 * std::cos(phi) + B1 * std::sin(phi) + A2 * std::cos(2.0 * phi) +
           B2 * std::sin(2.0 * phi);
  };
  auto dg_poly = [&](double phi) {
    return -A1 * std::sin(phi) + B1 * std::cos(phi) - 2.0 * A2 * std::sin(2.0 * phi) +
           2.0 * B2 * std::cos(2.0 * phi);
  };
  for (int i = 0; i < n; ++i) {
    const C x = es.eigenvalues()[i];
    if (std::abs(std::abs(x) - 1.0) > kUnitCircleTol) continue;
    double phi = std::arg(x);
    for (int it = 0; it < 8; ++it) {
      const double dg = dg_poly(phi);
      if (dg == 0.0) break;
      const double step = g_poly(phi) / dg;
      if (!std::isfinite(step) || std::abs(step) > 1e-3) break;
      phi -= step;
      if (std::abs(step) < 1e-16) break;
    }
    out.push_back(phi);
  }
  return out;
}

template <typename SlipSolver>
LocalSolution solve_nb(const LocalContactProblem& p, SlipSolver slip) {
  LocalSolution sol;
  const double Dnn = p.D(2, 2);
  const double vn = p.v[2];
  if (vn > kDegenerateTol) {
    sol.branch = LocalBranch::kOpen;
    return sol;
  }
  if (std::abs(p.mu) <= kDegenerateTol) {
    sol.branch = LocalBranch::kFrictionless;
    sol.lambda = Vec3(0.0, 0.0, std::max(0.0, -vn / Dnn));
    return sol;
  }
  const PolarProblem P(p);
  // Unconstrained minimizer on the plane.
  const Vec2 lt = -P.Dhat.ldlt().solve(P.vhat);
  const Vec3 l0(lt[0], lt[1], (P.a_plane - P.d * lt[0] - P.e * lt[1]) / Dnn);
  if (std::isfinite(l0[2]) && in_coulomb_cone(l0, p.mu, 0.0)) {
    sol.branch = LocalBranch::kSticking;
    sol.lambda = l0;
    return sol;
  }
  const ConicSection c = conic_decompose(p);
  if (std::abs(vn) <= kDegenerateTol) {
    sol.branch = LocalBranch::kDegenerate;
    sol.lambda = degenerate_solution(P, c);
    return sol;
  }
  sol.branch = LocalBranch::kSlipping;
  sol.lambda = slip(P, c, l0, &sol.used_fallback);
  return sol;
}

}  // namespace

ConicSection conic_decompose(const LocalContactProblem& p) {
  if (!(p.mu > 0.0)) throw Error("conic_decompose: friction coefficient must be positive");
  ConicSection c;
  c.d_n = p.D.row(2).transpose();
  c.v_fn = p.v[2];
  const double Dnn = p.D(2, 2);
  const double rho = std::hypot(p.D(2, 0), p.D(2, 1));
  if (rho == 0.0) {
    c.r_dmu = std::numeric_limits<double>::infinity();
    c.phi0 = 0.0;
    c.dphi = kPi;
    c.full_circle = true;
    c.interval_lo = 0.0;
    c.interval_hi = 2.0 * kPi;
    return c;
  }
  c.r_dmu = (Dnn * Dnn) / (p.mu * p.mu * rho * rho);
  c.phi0 = std::atan2(p.D(2, 1), p.D(2, 0));
  const double ratio = Dnn / (p.mu * rho);
  if (ratio > 1.0) {
    c.full_circle = true;
    c.dphi = kPi;
  } else {
    c.full_circle = false;
    c.dphi = std::acos(-ratio);
  }
  c.interval_lo = c.phi0 - c.dphi;
  c.interval_hi = c.phi0 + c.dphi;
  return c;
}

LocalSolution local_nb_quartic_detailed(const LocalContactProblem& p) {
  return solve_nb(p, [](const PolarProblem& P, const ConicSection& c, const Vec3&,
                        bool* fallback) {
    double best_phi = 0.0;
    double best_obj = std::numeric_limits<double>::infinity();
    for (double phi : quartic_angles(P)) {
      if (!P.feasible(phi)) continue;
      const double obj = P.objective(phi);
      if (obj < best_obj) {
        best_obj = obj;
        best_phi = phi;
      }
    }
    if (!std::isfinite(best_obj)) {
      *fallback = true;
      best_phi = scan_feasible(P, feasible_range(c), 128, 1e-14);
    }
    return P.lambda_at(best_phi);
  });
}

LocalSolution local_nb_bisection_detailed(const LocalContactProblem& p,
                                          const BisectionConfig& cfg) {
  return solve_nb(p, [&cfg](const PolarProblem& P, const ConicSection& c, const Vec3& l0,
                            bool* fallback) {
    const double phi_e = std::atan2(l0[1], l0[0]);
    if (P.feasible(phi_e)) {
      const double r_e = P.radius(phi_e);
      const double lt = std::hypot(l0[0], l0[1]);
      double dphi_los = lt > 0.0 ? std::acos(std::min(1.0, r_e / lt)) : 0.0;
      double g0 = P.gradient(phi_e);
      const double g_start = g0;
      double s0 = g0 < 0.0 ? -1.0 : 1.0;
      double alpha = -(dphi_los > 0.0 ? std::min(dphi_los, cfg.beta1) : cfg.beta1) * s0;
      double prev = phi_e;
      bool found = false;
      double phi_f = phi_e;
      if (g0 != 0.0) {
        for (int i = 1; i <= cfg.max_expansions; ++i) {
          const double phi = prev + alpha;
          const bool feas = P.feasible(phi);
          const double g = feas ? P.gradient(phi) : 0.0;
          if (feas && g * g0 < 0.0) {
            phi_f = phi;
            found = true;
            break;
          }
          const double past = std::abs(phi_e - phi) - dphi_los;
          if (!feas) {
            // Back off instead of stepping deeper into the infeasible region.
            alpha *= 0.5;
          } else if (past < 0.0) {
            alpha *= cfg.beta2;
          } else {
            alpha = -cfg.beta3 * s0;
            g0 = g;
            s0 = g < 0.0 ? -1.0 : 1.0;
            prev = phi;
          }
        }
      } else {
        return P.lambda_at(phi_e);
      }
      if (found && g_start * P.gradient(phi_f) < 0.0) {
        const double lo = std::min(phi_e, phi_f);
        const double hi = std::max(phi_e, phi_f);
        return P.lambda_at(bisect(P, lo, hi, cfg.eps));
      }
    }
    *fallback = true;
    return P.lambda_at(scan_feasible(P, feasible_range(c), cfg.scan_intervals, cfg.eps));
  });
}

Vec3 local_nb_quartic(const LocalContactProblem& p) {
  return local_nb_quartic_detailed(p).lambda;
}

Vec3 local_nb_bisection(const LocalContactProblem& p, const BisectionConfig& config) {
  return local_nb_bisection_detailed(p, config).lambda;
}

}  // namespace dualsim
