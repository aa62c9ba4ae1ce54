#include "dualsim/projectors.hpp"
#include "dualsim/solvers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dualsim;

namespace {

LocalContactProblem random_problem(std::mt19937_64& rng, bool closing = true) {
  std::uniform_real_distribution<double> u(0.05, 1.5);
  LocalContactProblem p;
  p.D = oracle::random_spd3(rng);
  p.v = oracle::random_vec3(rng);
  if (closing) p.v[2] = -std::abs(p.v[2]) - 0.01;
  p.mu = u(rng);
  return p;
}

// Single-contact NCP natural map: lambda - P_K(lambda - (D lambda + v + Gamma)).
double local_natural_map(const LocalContactProblem& p, const Vec3& l) {
  Vec3 w = p.D * l + p.v;
  w[2] += p.mu * w.head<2>().norm();
  return (l - project_coulomb(l - w, p.mu)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("orthant and disk") {
  CHECK(project_orthant(-1.0) == 0.0);
  CHECK(project_orthant(2.5) == 2.5);
  CHECK(project_disk(Vec2(3, 4), 1.0).isApprox(Vec2(0.6, 0.8)));
  CHECK(project_disk(Vec2(0.1, 0.1), 1.0) == Vec2(0.1, 0.1));
  CHECK(project_disk(Vec2(1, 1), 0.0).norm() == 0.0);
}

TEST_CASE("Coulomb projection branches") {
  CHECK(project_coulomb(Vec3(0, 0, 1), 0.7) == Vec3(0, 0, 1));
  CHECK(project_coulomb(Vec3(1, 0, -2), 0.7).norm() == 0.0);
  CHECK(project_coulomb(Vec3(1, 0, 0), 1.0).isApprox(Vec3(0.5, 0, 0.5)));
  CHECK(project_coulomb(Vec3(1, 2, 3), 0.0).isApprox(Vec3(0, 0, 3)));
  CHECK(project_coulomb(Vec3(1, 2, -3), 0.0).norm() == 0.0);
  CHECK(project_lorentz(Vec3(1, 0, 0)).isApprox(Vec3(0.5, 0, 0.5)));
}

TEST_CASE("Coulomb projection is the nearest cone point") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> mu_d(0.05, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const double mu = mu_d(rng);
    const Vec3 x = oracle::random_vec3(rng, 2.0);
    const Vec3 p = project_coulomb(x, mu);
    CHECK(oracle::in_cone(p, mu, 1e-12));
    CHECK((project_coulomb(p, mu) - p).norm() < 1e-14);
    // The residual lies in the polar cone, orthogonal to the projection.
    CHECK(std::abs((x - p).dot(p)) < 1e-12 * (1.0 + x.squaredNorm()));
    for (int k = 0; k < 20; ++k) {
      const Vec3 y = oracle::sample_in_cone(rng, mu);
      CHECK((x - p).norm() <= (x - y).norm() + 1e-12);
    }
  }
}

TEST_CASE("dual Coulomb projection matches the Moreau decomposition") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 1000; ++i) {
    const double mu = 0.1 + std::fmod(0.01 * i, 1.5);
    const Vec3 x = oracle::random_vec3(rng);
    const Vec3 p = project_dual_coulomb(x, mu);
    // x = P_K*(x) + P_polar(K*)(x) and the polar of K* is -K.
    const Vec3 q = -project_coulomb(-x, mu);
    CHECK((p + q - x).norm() < 1e-12);
    CHECK(std::hypot(p[0], p[1]) <= p[2] / mu + 1e-12);
  }
}

TEST_CASE("composite cone projection") {
  ConeSpec cone;
  cone.joint_dims = {2};
  cone.limit_rows = 2;
  cone.contact_mus = {1.0};
  VecX x(7);
  x << -5, 6, -1, 2, 1, 0, 0;
  const VecX p = project_cone(x, cone);
  CHECK(p.head(2) == x.head(2));
  CHECK(p[2] == 0.0);
  CHECK(p[3] == 2.0);
  CHECK(p.tail(3).isApprox(Vec3(0.5, 0, 0.5)));
  const VecX d = project_dual_cone(x, cone);
  CHECK(d.head(2).norm() == 0.0);
  CHECK(d[2] == 0.0);
  CHECK(d[3] == 2.0);
}

TEST_CASE("local CCP step") {
  LocalContactProblem p;
  p.mu = 0.7;
  p.v = Vec3(0, 0, 1);
  // Separating: the step moves lambda_n negative, which projects to zero.
  CHECK(local_ccp(p, Vec3::Zero()).norm() == 0.0);
  p.v = Vec3(0, 0, -1);
  const Vec3 fixed(0, 0, 1);  // D lambda + v = 0 there.
  CHECK(local_ccp(p, fixed).isApprox(fixed));
  p.mu = 0.0;
  p.v = Vec3(0.3, -0.2, 0.5);
  Vec3 l(0.2, 0.1, 0.4);
  for (int i = 0; i < 5; ++i) l = local_ccp(p, l);
  CHECK(l.norm() == 0.0);
}

TEST_CASE("local NCP step") {
  LocalContactProblem p;
  p.D = Vec3(1, 1, 2).asDiagonal();
  p.v = Vec3(0, 0, -1);
  p.mu = 0.5;
  const Vec3 l = local_ncp(p, Vec3::Zero());
  CHECK(l[2] == doctest::Approx(0.5));
  CHECK(l.head<2>().norm() == 0.0);
  p.v = Vec3(1, 1, 1);
  CHECK(local_ncp(p, Vec3(1, 1, 0)).norm() == 0.0);
}

TEST_CASE("local NCP fixed point solves diagonal problems") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 200; ++i) {
    LocalContactProblem p = random_problem(rng);
    // The tangential step uses the smaller diagonal, so equal tangential
    // entries keep the plain fixed-point iteration contractive.
    const Vec3 r = oracle::random_vec3(rng).cwiseAbs().array() + 0.2;
    p.D = Vec3(r[0], r[0], r[2]).asDiagonal();
    Vec3 l = Vec3::Zero();
    for (int k = 0; k < 200; ++k) l = local_ncp(p, l);
    const Vec3 ref = oracle::brute_force_local(p);
    CHECK((l - ref).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + ref.norm()));
  }
}

TEST_CASE("conic decomposition") {
  LocalContactProblem p;
  p.mu = 0.5;
  p.D = Vec3(1, 2, 3).asDiagonal();
  ConicSection c = conic_decompose(p);
  CHECK(std::isinf(c.r_dmu));
  CHECK(c.full_circle);
  CHECK(c.interval_hi - c.interval_lo == doctest::Approx(2.0 * oracle::kPi));

  p.D = Mat3::Identity();
  p.D(2, 0) = p.D(0, 2) = 0.3;
  p.D(2, 1) = p.D(1, 2) = 0.4;
  p.D(2, 2) = 0.5 * 0.5;  // mu times |(0.3, 0.4)|
  c = conic_decompose(p);
  CHECK(c.r_dmu == doctest::Approx(1.0));

  std::mt19937_64 rng(43);
  int open_sections = 0;
  for (int i = 0; i < 2000; ++i) {
    LocalContactProblem q = random_problem(rng);
    q.mu = 1.5 + i % 4;
    const ConicSection s = conic_decompose(q);
    if (s.full_circle) continue;
    ++open_sections;
    auto f = [&](double phi) {
      return q.D(2, 2) + q.mu * (q.D(2, 0) * std::cos(phi) + q.D(2, 1) * std::sin(phi));
    };
    CHECK(std::abs(f(s.interval_lo)) < 1e-9);
    CHECK(std::abs(f(s.interval_hi)) < 1e-9);
    CHECK(f(s.phi0) > 0.0);
  }
  CHECK(open_sections > 10);
}

TEST_CASE("quartic local solver branches") {
  std::mt19937_64 rng(47);
  LocalContactProblem p = random_problem(rng);
  p.v[2] = 0.3;
  CHECK(local_nb_quartic(p).norm() == 0.0);
  CHECK(local_nb_quartic_detailed(p).branch == LocalBranch::kOpen);

  p = random_problem(rng);
  p.mu = 0.0;
  const Vec3 l = local_nb_quartic(p);
  CHECK(l.head<2>().norm() == 0.0);
  CHECK(l[2] == doctest::Approx(-p.v[2] / p.D(2, 2)));
}

TEST_CASE("quartic local solver matches the brute-force minimizer") {
  std::mt19937_64 rng(53);
  int slipping = 0;
  for (int i = 0; i < 500; ++i) {
    const LocalContactProblem p = random_problem(rng);
    const LocalSolution s = local_nb_quartic_detailed(p);
    const Vec3 ref = oracle::brute_force_local(p);
    CHECK((s.lambda - ref).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, ref.norm()));
    if (s.branch == LocalBranch::kSlipping) {
      // On the maximum-compression plane and on the cone boundary.
      CHECK(std::abs((p.D * s.lambda + p.v)[2]) < 1e-9 * std::max(1.0, s.lambda.norm()));
      CHECK(std::abs(s.lambda.head<2>().norm() - p.mu * s.lambda[2]) <
            1e-9 * std::max(1.0, s.lambda.norm()));
    }
    CHECK(oracle::local_objective(p, s.lambda) <= oracle::local_objective(p, ref) + 1e-10);
    slipping += s.branch == LocalBranch::kSlipping;
  }
  CHECK(slipping > 50);
}

TEST_CASE("bisection local solver matches the quartic solver") {
  std::mt19937_64 rng(59);
  for (int i = 0; i < 500; ++i) {
    const LocalContactProblem p = random_problem(rng, i % 5 != 0);
    const Vec3 a = local_nb_quartic(p);
    const Vec3 b = local_nb_bisection(p);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, a.norm()));
  }
}

TEST_CASE("sticking contacts skip the search") {
  LocalContactProblem p;
  p.D = Mat3::Identity();
  p.v = Vec3(0.01, 0.0, -1.0);
  p.mu = 1.0;
  const LocalSolution q = local_nb_quartic_detailed(p);
  const LocalSolution b = local_nb_bisection_detailed(p, BisectionConfig{});
  CHECK(q.branch == LocalBranch::kSticking);
  CHECK(b.branch == LocalBranch::kSticking);
  CHECK(q.lambda.isApprox(Vec3(-0.01, 0.0, 1.0)));
  CHECK(b.lambda == q.lambda);
}

// With no normal-tangential coupling the plane-restricted minimizer is the
// Coulomb solution. Coupled problems are covered by the brute-force match; there
// the slip direction is not exactly opposite to the reaction.
TEST_CASE("decoupled single-contact solution satisfies the residual triple") {
  std::mt19937_64 rng(61);
  ConeSpec cone;
  for (int i = 0; i < 200; ++i) {
    LocalContactProblem p = random_problem(rng);
    p.D(2, 0) = p.D(0, 2) = p.D(2, 1) = p.D(1, 2) = 0.0;
    CHECK(local_natural_map(p, local_nb_quartic(p)) < 1e-8 * std::max(1.0, p.v.norm()));
    cone.contact_mus = {p.mu};
    const Vec3 l = local_nb_quartic(p);
    const ResidualTriple r = compute_residuals(l, p.D * l + p.v, cone, ResidualMode::kNcp);
    const double scale = std::max(1.0, l.norm());
    CHECK(r.primal <= 1e-8 * scale);
    CHECK(r.dual <= 1e-8 * scale);
    CHECK(r.complementarity <= 1e-8 * scale);
  }
}
