#include <cmath>
#include <random>

#include <doctest.h>

#include "nlbvp/analysis.hpp"

using namespace nlbvp;

namespace {

const DomainSpec& kite() {
  static const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::PolylineKite);
  return d;
}

const Mesh& coarse() {
  static const Mesh m = generate_graded_mesh(kite(), 0.1, 2.0);
  return m;
}

const Mesh& fine() {
  static const Mesh m = generate_graded_mesh(kite(), 0.05, 2.0);
  return m;
}

Eigenpair phi0_at(Complex t) {
  ModelProblem p;
  p.omega0 = kite().corners().omega0;
  p.t = t;
  return eigenvector(p, 0.0);
}

// (c + d ln r) phi0(omega) about the nearer corner.
VectorXc synthetic(const Mesh& m, const Eigenpair& phi0, Complex c, Complex d) {
  VectorXc u(static_cast<Eigen::Index>(m.num_vertices()));
  const double w0 = kite().corners().omega0;
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    const Point& p = m.vertices[i];
    const bool first = p.norm() <= (p - Point(1.0, 0.0)).norm();
    const Point rel = first ? p : Point(1.0 - p.x(), p.y());
    const double r = rel.norm();
    // Gamma1 (upper) sits at omega = -omega0.
    const double omega = r > 0.0 ? -std::atan2(rel.y(), rel.x()) : 0.0;
    const double phi = 1.0 - (phi0.problem.t.real() / w0) * omega;
    u(static_cast<Eigen::Index>(i)) = r > 0.0 ? (c + d * std::log(r)) * phi : c;
  }
  return u;
}

template <typename F>
VectorXc interpolant(const Mesh& m, F f) {
  VectorXc u(static_cast<Eigen::Index>(m.num_vertices()));
  for (std::size_t i = 0; i < m.num_vertices(); ++i) u(static_cast<Eigen::Index>(i)) = f(m.vertices[i]);
  return u;
}

}  // namespace

TEST_CASE("weighted norm basics") {
  const Mesh& m = coarse();
  const VectorXc zero = VectorXc::Zero(static_cast<Eigen::Index>(m.num_vertices()));
  CHECK(weighted_norm(m, kite(), zero, {2, 0.7}) == 0.0);
  CHECK_THROWS_AS(weighted_norm(m, kite(), zero, {3, 0.0}), Error);

  // k = 0, a = 0 is the L2 norm.
  const auto f = [](const Point& p) { return Complex(std::sin(3 * p.x()) + p.y(), p.x() * p.y()); };
  const VectorXc u = interpolant(m, f);
  SmoothFunction zero_fn{[](const Point&) { return 0.0; }, [](const Point&) { return Point(0, 0); },
                         [](const Point&) { return 0.0; }};
  const double l2 = error_norms(m, u, zero_fn).l2;
  CHECK(weighted_norm(m, kite(), u, {0, 0.0}) == doctest::Approx(l2).epsilon(1e-3));
}

TEST_CASE("weighted norm of a radial bump against a 1-D integral") {
  const Mesh& m = fine();
  const double r0 = 0.02, r1 = 0.14, p = 0.5;
  const auto profile = [&](double r) {
    if (r <= r0 || r >= r1) return 0.0;
    const double s = std::sin(kPi * (r - r0) / (r1 - r0));
    return std::pow(r, p) * s * s;
  };
  const VectorXc u = interpolant(m, [&](const Point& y) { return Complex(profile(y.norm())); });
  for (double a : {0.0, 0.5, -0.3}) {
    // 2 omega0 int r^(2a) f(r)^2 r dr by Simpson.
    const int n = 20000;
    const double hstep = (r1 - r0) / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double r = r0 + i * hstep;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      sum += w * std::pow(r, 2 * a) * profile(r) * profile(r) * r;
    }
    const double exact = std::sqrt(2.0 * kite().corners().omega0 * sum * hstep / 3.0);
    CHECK(weighted_norm(m, kite(), u, {0, a}) == doctest::Approx(exact).epsilon(0.02));
  }
}

TEST_CASE("weighted norm dominates the plain norm away from the corners") {
  const Mesh& m = coarse();
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXc u = VectorXc::Zero(static_cast<Eigen::Index>(m.num_vertices()));
    for (std::size_t i = 0; i < m.num_vertices(); ++i)
      if (rho(kite(), m.vertices[i]) > 0.3) u(static_cast<Eigen::Index>(i)) = Complex(g(rng), g(rng));
    const auto support = [&](std::size_t t) {
      for (int v : m.triangles[t])
        if (u(v) != Complex(0.0)) return true;
      return false;
    };
    // rho <= 1 on the domain, so rho^(-2) >= 1.
    for (int k : {0, 1}) {
      const double weighted = weighted_norm(m, kite(), u, {k, 0.0});
      CHECK(weighted >= sobolev_norm(m, u, k, support) * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("synthetic singular fits") {
  const Mesh& m = fine();
  const Eigenpair phi0 = phi0_at(0.3);
  const auto [r_min, r_max] = default_annulus(kite());
  const VectorXc uc = synthetic(m, phi0, 2.0, 0.0);
  const VectorXc ud = synthetic(m, phi0, 0.0, 1.0);
  for (int corner : {0, 1}) {
    const SingularFit fc = fit_singular_expansion(m, kite(), uc, corner, phi0, r_min, r_max);
    CHECK(std::abs(fc.c - 2.0) <= 0.02);
    CHECK(std::abs(fc.d) <= 0.02);
    const SingularFit fd = fit_singular_expansion(m, kite(), ud, corner, phi0, r_min, r_max);
    CHECK(std::abs(fd.d - 1.0) <= 0.05);
    CHECK(fd.condition <= kFitConditionLimit);

    // Linearity.
    const Complex al(0.7, -0.2), be(-1.3, 0.4);
    const SingularFit mix = fit_singular_expansion(m, kite(), al * uc + be * ud, corner, phi0, r_min, r_max);
    const Complex c_ref = al * fc.c + be * fd.c, d_ref = al * fc.d + be * fd.d;
    CHECK(std::abs(mix.c - c_ref) <= 1e-8 * std::abs(c_ref));
    CHECK(std::abs(mix.d - d_ref) <= 1e-8 * std::abs(d_ref));

    // Annulus independence.
    for (const VectorXc* u : {&uc, &ud}) {
      const SingularFit a = fit_singular_expansion(m, kite(), *u, corner, phi0, r_min, r_max);
      const SingularFit b =
          fit_singular_expansion(m, kite(), *u, corner, phi0, 1.2 * r_min, 0.8 * r_max);
      const double tol = 3.0 * (a.residual + b.residual) * std::max(1.0, std::abs(a.c) + std::abs(a.d));
      CHECK(std::abs(a.c - b.c) <= tol);
      CHECK(std::abs(a.d - b.d) <= tol);
    }
  }
}

TEST_CASE("fit preconditions") {
  const Eigenpair phi0 = phi0_at(0.3);
  const VectorXc u = synthetic(coarse(), phi0, 1.0, 0.0);
  CHECK_THROWS_AS(fit_singular_expansion(coarse(), kite(), u, 2, phi0, 0.01, 0.1), Error);
  CHECK_THROWS_AS(fit_singular_expansion(coarse(), kite(), u, 0, phi0, 0.1, 0.01), Error);
  CHECK_THROWS_AS(fit_singular_expansion(coarse(), kite(), u, 0, phi0, 0.01, 0.5), Error);
  // Too thin to hold three element layers.
  CHECK_THROWS_AS(fit_singular_expansion(coarse(), kite(), u, 0, phi0, 0.14, 0.15), Error);
}

TEST_CASE("membership classification") {
  const Mesh& m = fine();
  const Eigenpair phi0 = phi0_at(0.3);
  const VectorXc ud = synthetic(m, phi0, 0.0, 1.0);
  CHECK(classify_solution(m, kite(), ud, 0.3).classification == "singular(d)");

  const VectorXc constant = VectorXc::Constant(static_cast<Eigen::Index>(m.num_vertices()), 3.0);
  const MembershipReport rep = classify_solution(m, kite(), constant, 0.0);
  CHECK(rep.classification == "singular(c)");
  REQUIRE(rep.fits.size() == 2);
  for (const auto& f : rep.fits) CHECK(std::abs(f.c - 3.0) <= 1e-10);

  const VectorXc zero = VectorXc::Zero(static_cast<Eigen::Index>(m.num_vertices()));
  CHECK(classify_solution(m, kite(), zero, 0.1).classification == "regular");

  CHECK_THROWS_AS(membership_report({rep.fits.front()}), Error);
  SingularFit tiny;
  tiny.residual = 1e-12;
  CHECK(significance_threshold(tiny) == 1e-8);
  tiny.residual = 1e-3;
  CHECK(significance_threshold(tiny) == doctest::Approx(1e-2));
}

TEST_CASE("compatible corner solution") {
  const Complex t = 0.1;
  const CompatibleSolution s = compatible_corner_solution(kite(), t);
  const DiffeoMap m1 = build_corner_rotation_map(kite(), CurveId::Gamma1);
  const DiffeoMap m2 = build_corner_rotation_map(kite(), CurveId::Gamma2);
  const double eps = kite().corners().eps;
  for (int j = 0; j < 2; ++j)
    for (int k = 1; k < 40; ++k) {
      const double r = eps * k / 40.0;
      const Point y1 = kite().from_polar(j, -kite().corners().omega0, r);
      const Point y2 = kite().from_polar(j, kite().corners().omega0, r);
      CHECK(std::abs(s.value(y1) - (1.0 + t) * s.value(m1(y1))) <= 1e-12);
      CHECK(std::abs(s.value(y2) - (1.0 - t) * s.value(m2(y2))) <= 1e-12);
    }
  // Laplacian by central differences.
  for (const Point& q : {Point(0.04, 0.01), Point(0.1, -0.02), Point(0.9, 0.03), Point(0.5, 0.1)}) {
    const double e = 1e-4;
    const Complex fd = (s.value(q + Point(e, 0)) + s.value(q - Point(e, 0)) + s.value(q + Point(0, e)) +
                        s.value(q - Point(0, e)) - 4.0 * s.value(q)) / (e * e);
    CHECK(std::abs(s.laplacian(q) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
  CHECK(std::abs(s.value(Point(0.5, 0.1))) == 0.0);
}
