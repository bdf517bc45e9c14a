#include <cmath>
#include <random>

#include <doctest.h>

#include "nlbvp/spectral.hpp"

using namespace nlbvp;

namespace {

ModelProblem nonlocal(double w0, Complex t) {
  ModelProblem p;
  p.omega0 = w0;
  p.t = t;
  p.kind = ModelKind::Nonlocal;
  return p;
}

ModelProblem dirichlet(double w0) {
  ModelProblem p;
  p.omega0 = w0;
  p.kind = ModelKind::Dirichlet;
  return p;
}

// 2 sinh(l w0)/l (cosh(l w0) - 1), the nonlocal determinant worked out by hand.
Complex nonlocal_det_oracle(double w0, Complex l) {
  const Complex s = std::abs(l) < 1e-300 ? Complex(w0) : std::sinh(l * w0) / l;
  return 2.0 * s * (std::cosh(l * w0) - 1.0);
}

// Brute force Dirichlet determinant with basis {cosh(l w), sinh(l w)/l}.
Complex dirichlet_det_oracle(double w0, Complex l) {
  auto s = [&](double w) { return std::abs(l) < 1e-300 ? Complex(w) : std::sinh(l * w) / l; };
  const Complex a = std::cosh(-l * w0), b = s(-w0), c = std::cosh(l * w0), d = s(w0);
  return a * d - b * c;
}

}  // namespace

TEST_CASE("determinant examples") {
  CHECK(std::abs(char_det(dirichlet(kPi / 3), 0.0) - 2.0 * kPi / 3) < 1e-14);
  for (Complex t : {Complex(0.0), Complex(0.1), Complex(0.0, 0.5), Complex(-0.7, 0.2)}) {
    CHECK(std::abs(char_det(nonlocal(kPi / 3, t), 0.0)) <= 1e-15);
    CHECK(std::abs(char_det(nonlocal(kPi / 3, t), Complex(0.0, 3.0))) < 1e-13);
  }
}

TEST_CASE("determinant matches the closed form and does not depend on t") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-4.0, 4.0), tt(-1.0, 1.0), ww(0.2, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double w0 = ww(rng);
    const Complex l(u(rng), u(rng));
    const Complex t(tt(rng), tt(rng));
    const Complex ref = nonlocal_det_oracle(w0, l);
    const Complex got = char_det(nonlocal(w0, t), l);
    CHECK(std::abs(got - ref) <= 1e-11 * std::max(1.0, std::abs(ref)));
    CHECK(std::abs(got - char_det(nonlocal(w0, 0.0), l)) <= 1e-12 * std::max(1.0, std::abs(ref)));
    const Complex dref = dirichlet_det_oracle(w0, l);
    CHECK(std::abs(char_det(dirichlet(w0), l) - dref) <= 1e-11 * std::max(1.0, std::abs(dref)));
  }
}

TEST_CASE("determinant derivative by central differences") {
  const ModelProblem p = nonlocal(1.1, 0.3);
  for (Complex l : {Complex(0.3, 0.2), Complex(-1.0, 2.0), Complex(0.0, 0.0), Complex(2.0, -0.5)}) {
    const double e = 1e-6;
    const Complex fd = (char_det(p, l + e) - char_det(p, l - e)) / (2 * e);
    CHECK(std::abs(char_det_derivative(p, l) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("basis is regular at zero") {
  CHECK(std::abs(basis_cosh(0.0, 0.7) - 1.0) == 0.0);
  CHECK(std::abs(basis_sinhc(0.0, 0.7) - 0.7) == 0.0);
  CHECK(std::abs(basis_sinhc(Complex(1e-9, 0.0), 0.7) - 0.7) < 1e-12);
}

TEST_CASE("nonlocal strip -1 <= Im <= 0 holds only lambda = 0") {
  for (double w0 : {kPi / 3, 2.0})
    for (Complex t : {Complex(0.0), Complex(0.1), Complex(0.0, 0.5)}) {
      Strip s;
      s.imag_min = -1.0;
      s.imag_max = 0.0;
      s.real_bound = default_real_bound(w0, 1);
      const auto hits = eigenvalues_in_strip(nonlocal(w0, t), s);
      REQUIRE(hits.size() == 1);
      CHECK(std::abs(hits[0].lambda) < 1e-10);
      CHECK(hits[0].det_zero_order == 2);
    }
}

TEST_CASE("Dirichlet strip below the real axis is empty") {
  for (double w0 : {0.5, kPi / 3, kPi / 2 - 0.2}) {
    Strip s;
    s.imag_min = -1.0;
    s.imag_max = -1e-9;
    s.real_bound = default_real_bound(w0, 1);
    CHECK(eigenvalues_in_strip(dirichlet(w0), s).empty());
  }
}

TEST_CASE("nonlocal window |Im| <= 3.5 at omega0 = pi/3") {
  Strip s{-3.5, 3.5, default_real_bound(kPi / 3, 1)};
  const auto hits = eigenvalues_in_strip(nonlocal(kPi / 3, 0.2), s);
  REQUIRE(hits.size() == 3);
  CHECK(std::abs(hits[0].lambda - Complex(0.0, -3.0)) < 1e-10);
  CHECK(std::abs(hits[1].lambda) < 1e-10);
  CHECK(std::abs(hits[2].lambda - Complex(0.0, 3.0)) < 1e-10);
  CHECK(hits[0].det_zero_order == 1);
  CHECK(hits[2].det_zero_order == 1);
}

TEST_CASE("eigenvalue grid up to K = 5") {
  for (double w0 : {0.7, 1.9}) {
    for (ModelKind kind : {ModelKind::Nonlocal, ModelKind::Dirichlet}) {
      const double step = kind == ModelKind::Nonlocal ? kPi / w0 : kPi / (2 * w0);
      const double bound = 5.5 * step;
      Strip s{-bound, bound, default_real_bound(w0, 1)};
      ModelProblem p = kind == ModelKind::Nonlocal ? nonlocal(w0, Complex(0.2, -0.1)) : dirichlet(w0);
      const auto hits = eigenvalues_in_strip(p, s);
      // Dirichlet: k = 0 excluded.
      const std::size_t expected = kind == ModelKind::Nonlocal ? 11 : 10;
      REQUIRE(hits.size() == expected);
      for (const auto& h : hits) {
        const int k_index = static_cast<int>(std::lround(h.lambda.imag() / step));
        if (kind == ModelKind::Nonlocal)
          CHECK(h.det_zero_order == (k_index == 0 ? 2 : (k_index % 2 == 0 ? 3 : 1)));
        else
          CHECK(h.det_zero_order == 1);
        CHECK(std::abs(h.lambda.real()) < 1e-10);
        const double k = h.lambda.imag() / step;
        CHECK(std::abs(k - std::round(k)) * step < 1e-10);
        // Conjugate partner present.
        bool partner = false;
        for (const auto& g : hits) partner |= std::abs(g.lambda - std::conj(h.lambda)) < 1e-10;
        CHECK(partner);
      }
      for (std::size_t i = 1; i < hits.size(); ++i)
        CHECK(hits[i - 1].lambda.imag() < hits[i].lambda.imag());
    }
  }
}

TEST_CASE("argument principle counts zeros with multiplicity") {
  const ModelProblem p = nonlocal(kPi / 3, 0.4);
  // 0 (order 2) and +-3i (order 1 each).
  const auto n = argument_principle_count(p, Complex(-1.0, -3.5), Complex(1.0, 3.5), 4096);
  REQUIRE(n.has_value());
  CHECK(*n == 4);
  const auto none = argument_principle_count(p, Complex(0.5, 0.5), Complex(1.0, 1.0), 1024);
  REQUIRE(none.has_value());
  CHECK(*none == 0);
  // Contour through the simple zero 3i.
  CHECK_FALSE(argument_principle_count(p, Complex(-0.7, 3.0), Complex(1.1, 4.0), 1000).has_value());
  // Orders: sinh(l w0)/l has simple zeros at 3ki (k != 0), cosh(l w0) - 1 double zeros at 6ki.
  CHECK(zero_order(p, 0.0) == 2);
  CHECK(zero_order(p, Complex(0.0, 3.0)) == 1);
  CHECK(zero_order(p, Complex(0.0, 6.0)) == 3);
  CHECK(zero_order(dirichlet(kPi / 3), Complex(0.0, 1.5)) == 1);
}

TEST_CASE("eigenvector at lambda = 0") {
  const double w0 = kPi / 3;
  const Eigenpair pair = eigenvector(nonlocal(w0, 0.3), 0.0);
  CHECK(std::abs(pair.coeffs(0) - 1.0) < 1e-12);
  CHECK(std::abs(pair.coeffs(1) - (-0.3 / w0)) < 1e-12);
  CHECK(pair.residual <= 1e-10);
  CHECK(pair.normalization == Eigenpair::Normalization::UnitAtZero);
  for (int k = 0; k <= 20; ++k) {
    const double w = -w0 + 2 * w0 * k / 20.0;
    CHECK(std::abs(pair(w) - (1.0 - 0.3 / w0 * w)) < 1e-12);
  }
  const Eigenpair one = eigenvector(nonlocal(w0, 0.0), 0.0);
  CHECK(std::abs(one.coeffs(0) - 1.0) < 1e-14);
  CHECK(std::abs(one.coeffs(1)) < 1e-14);
}

TEST_CASE("Dirichlet eigenvector") {
  const double w0 = kPi / 3;
  const Complex l0(0.0, kPi / (2 * w0));
  const Eigenpair pair = eigenvector(dirichlet(w0), l0);
  CHECK(pair.residual <= 1e-10);
  CHECK(std::abs(pair(-w0)) <= 1e-10);
  CHECK(std::abs(pair(w0)) <= 1e-10);
  // Proportional to sin(pi (w + w0) / (2 w0)).
  const Complex ratio = pair(0.3) / std::cos(kPi * (0.3 + w0) / (2 * w0) - kPi / 2);
  for (int k = 1; k < 20; ++k) {
    const double w = -w0 + 2 * w0 * k / 20.0;
    const double ref = std::cos(kPi * (w + w0) / (2 * w0) - kPi / 2);
    CHECK(std::abs(pair(w) - ratio * ref) < 1e-10);
  }
  CHECK_THROWS_AS(eigenvector(dirichlet(w0), Complex(0.0, 1.0)), Error);
}

TEST_CASE("associate vectors") {
  for (Complex t : {Complex(0.0), Complex(0.3), Complex(-0.2, 0.4)}) {
    const ModelProblem p = nonlocal(kPi / 3, t);
    const AssociateResult r = associate_vector(p, eigenvector(p, 0.0));
    REQUIRE(r.phi1.has_value());
    CHECK(r.phi1->norm <= 1e-10);
    CHECK(r.chain_length == 2);
  }
  // Simple Dirichlet eigenvalue: no associate vector.
  const ModelProblem d = dirichlet(kPi / 3);
  const AssociateResult r = associate_vector(d, eigenvector(d, Complex(0.0, 1.5)));
  CHECK_FALSE(r.phi1.has_value());
  CHECK(r.chain_length == 1);
  CHECK(r.consistency_residual > 1e-8);
}

TEST_CASE("model problem validation") {
  CHECK_THROWS_AS(nonlocal(3.2, 0.0).validate(), Error);
  CHECK_THROWS_AS(nonlocal(0.0, 0.0).validate(), Error);
  Strip bad{0.0, -1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(parse_model_kind("dirichlet") == ModelKind::Dirichlet);
  CHECK_THROWS_AS(parse_model_kind("neumann"), Error);
}
