#include "nlbvp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace nlbvp {

void WeightedNormSpec::validate() const {
  if (k < 0 || k > 2) fail(ErrorKind::Config, "weighted norm order k must be 0, 1 or 2");
  if (!std::isfinite(a)) fail(ErrorKind::Config, "weight exponent must be finite");
}

namespace {

struct QuadPoint {
  double l0, l1, l2, w;
};

const std::array<QuadPoint, 7> kDegree5{{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
                                         {0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506},
                                         {0.470142064105115, 0.059715871789770, 0.470142064105115, 0.132394152788506},
                                         {0.470142064105115, 0.470142064105115, 0.059715871789770, 0.132394152788506},
                                         {0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827},
                                         {0.101286507323456, 0.797426985353087, 0.101286507323456, 0.125939180544827},
                                         {0.101286507323456, 0.101286507323456, 0.797426985353087, 0.125939180544827}}};
const std::array<QuadPoint, 1> kCentroid{{{1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0}}};

Eigen::Vector2cd element_gradient(const Mesh& mesh, std::size_t t, const VectorXc& u) {
  const auto& tri = mesh.triangles[t];
  const double two_area = 2.0 * mesh.area(t);
  Eigen::Vector2cd g = Eigen::Vector2cd::Zero();
  for (int k = 0; k < 3; ++k) {
    const Point& pj = mesh.vertices[tri[(k + 1) % 3]];
    const Point& pk = mesh.vertices[tri[(k + 2) % 3]];
    g += u(tri[k]) * (Point(pj.y() - pk.y(), pk.x() - pj.x()) / two_area).cast<Complex>();
  }
  return g;
}

bool touches_corner(const Mesh& mesh, std::size_t t) {
  for (int v : mesh.triangles[t])
    if (is_corner(mesh.markers[v])) return true;
  return false;
}

}  // namespace

double weighted_norm(const Mesh& mesh, const DomainSpec& domain, const VectorXc& u_h,
                     const WeightedNormSpec& spec) {
  spec.validate();
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.area(t);
    const double grad2 = spec.k >= 1 ? element_gradient(mesh, t, u_h).squaredNorm() : 0.0;
    auto accumulate = [&](const auto& rule) {
      for (const auto& q : rule) {
        const Point p = q.l0 * mesh.vertices[tri[0]] + q.l1 * mesh.vertices[tri[1]] +
                        q.l2 * mesh.vertices[tri[2]];
        const double r = rho(domain, p);
        const Complex u = q.l0 * u_h(tri[0]) + q.l1 * u_h(tri[1]) + q.l2 * u_h(tri[2]);
        double integrand = std::pow(r, 2.0 * (spec.a - spec.k)) * std::norm(u);
        if (spec.k >= 1) integrand += std::pow(r, 2.0 * (spec.a + 1 - spec.k)) * grad2;
        total += q.w * area * integrand;
      }
    };
    if (touches_corner(mesh, t))
      accumulate(kCentroid);
    else
      accumulate(kDegree5);
  }
  return std::sqrt(total);
}

double sobolev_norm(const Mesh& mesh, const VectorXc& u_h, int k,
                    const std::function<bool(std::size_t)>& keep) {
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    if (!keep(t)) continue;
    const auto& tri = mesh.triangles[t];
    const double area = mesh.area(t);
    const double grad2 = k >= 1 ? element_gradient(mesh, t, u_h).squaredNorm() : 0.0;
    for (const auto& q : kDegree5) {
      const Complex u = q.l0 * u_h(tri[0]) + q.l1 * u_h(tri[1]) + q.l2 * u_h(tri[2]);
      total += q.w * area * (std::norm(u) + grad2);
    }
  }
  return std::sqrt(total);
}

std::pair<double, double> default_annulus(const DomainSpec& domain) {
  const double eps = domain.corners().eps;
  return {0.1 * eps, eps};
}

SingularFit fit_singular_expansion(const Mesh& mesh, const DomainSpec& domain,
                                   const VectorXc& u_h, int corner, const Eigenpair& phi0,
                                   double r_min, double r_max) {
  if (corner != 0 && corner != 1) fail(ErrorKind::Config, "corner index must be 0 or 1");
  if (!(r_min > 0.0 && r_min < r_max))
    fail(ErrorKind::Config, "annulus needs 0 < r_min < r_max");
  if (r_max > domain.corners().eps * (1.0 + 1e-12))
    fail(ErrorKind::Config, "annulus must lie within eps of the corner");
  const double omega0 = domain.corners().omega0;
  // Resolution: at least three element layers across the annulus.
  double largest = 0.0;
  const Point& g = domain.corners().corner(corner);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double r = (mesh.centroid(t) - g).norm();
    if (r >= r_min && r <= r_max) largest = std::max(largest, mesh.diameter(t));
  }
  if (largest == 0.0 || (r_max - r_min) < 3.0 * largest) {
    std::ostringstream msg;
    msg << "annulus [" << r_min << ", " << r_max << "] is not resolved by the mesh";
    fail(ErrorKind::Config, msg.str());
  }

  const PointLocator locator(mesh);
  const int n = kFitGrid;
  const double tau0 = std::log(r_min), tau1 = std::log(r_max);
  const double domega = 2.0 * omega0 / n, dtau = (tau1 - tau0) / n;
  MatrixXc design(n * n, 2);
  VectorXc values(n * n);
  Eigen::VectorXd sqrt_w(n * n);
  for (int i = 0; i < n; ++i) {
    const double omega = -omega0 + (i + 0.5) * domega;
    const Complex basis = phi0(omega);
    for (int k = 0; k < n; ++k) {
      const double tau = tau0 + (k + 0.5) * dtau;
      const double r = std::exp(tau);
      const Point p = domain.from_polar(corner, omega, r);
      const int row = i * n + k;
      sqrt_w(row) = std::sqrt(r * r * domega * dtau);
      design(row, 0) = sqrt_w(row) * basis;
      design(row, 1) = sqrt_w(row) * basis * tau;
      values(row) = sqrt_w(row) * evaluate(mesh, locator, u_h, p);
    }
  }

  Eigen::JacobiSVD<MatrixXc> svd(design);
  const auto s = svd.singularValues();
  SingularFit fit;
  fit.corner = corner;
  fit.r_min = r_min;
  fit.r_max = r_max;
  fit.phi0 = phi0.coeffs;
  fit.condition = s(1) > 0.0 ? s(0) / s(1) : std::numeric_limits<double>::infinity();
  if (fit.condition > kFitConditionLimit) {
    std::ostringstream msg;
    msg << "ill-conditioned singular fit (condition estimate " << fit.condition
        << "); widen the annulus";
    fail(ErrorKind::Numerical, msg.str());
  }
  const VectorXc coeffs = design.colPivHouseholderQr().solve(values);
  fit.c = coeffs(0);
  fit.d = coeffs(1);
  const double unorm = values.norm();
  const double res = (design * coeffs - values).norm();
  fit.residual = unorm > 0.0 ? res / unorm : 0.0;
  fit.c_relative = unorm > 0.0 ? std::abs(fit.c) * design.col(0).norm() / unorm : 0.0;
  fit.d_relative = unorm > 0.0 ? std::abs(fit.d) * design.col(1).norm() / unorm : 0.0;
  return fit;
}

double significance_threshold(const SingularFit& fit) {
  return std::max(10.0 * fit.residual, 1e-8);
}

MembershipReport membership_report(const std::vector<SingularFit>& fits) {
  bool seen[2] = {false, false};
  for (const auto& f : fits)
    if (f.corner == 0 || f.corner == 1) seen[f.corner] = true;
  if (!seen[0] || !seen[1]) fail(ErrorKind::Config, "membership report needs a fit at both corners");
  MembershipReport report;
  report.fits = fits;
  bool singular_c = false, singular_d = false;
  for (const auto& f : fits) {
    const double thr = significance_threshold(f);
    singular_c = singular_c || f.c_relative > thr;
    singular_d = singular_d || f.d_relative > thr;
  }
  report.classification = singular_d ? "singular(d)" : singular_c ? "singular(c)" : "regular";
  return report;
}

CompatibleSolution compatible_corner_solution(const DomainSpec& domain, Complex t) {
  ModelProblem problem;
  problem.omega0 = domain.corners().omega0;
  problem.t = t;
  const double p = kPi / problem.omega0;
  const Eigenpair phi = eigenvector(problem, Complex(0.0, p));
  const double r1 = 0.5 * domain.corners().eps, r2 = 0.9 * domain.corners().eps;
  const double width = r2 - r1;
  // Delta(chi v) = 2 chi' v_r + v (chi'' + chi' / r) for harmonic v = r^p phi.
  auto local = [=](const Point& y, bool laplacian) {
    Complex total = 0.0;
    for (int j = 0; j < 2; ++j) {
      const LocalPolar pol = domain.polar(j, y);
      if (pol.r >= r2 || pol.r <= 0.0) continue;
      const double x = (pol.r - r1) / width;
      const double chi = 1.0 - smoothstep5(x);
      const Complex v = std::pow(pol.r, p) * phi(pol.omega);
      if (!laplacian) {
        total += chi * v;
        continue;
      }
      const double d1 = -smoothstep5_derivative(x) / width;
      const double s2 = x <= 0.0 || x >= 1.0 ? 0.0 : 60.0 * x * (x - 1.0) * (2.0 * x - 1.0);
      const double d2 = -s2 / (width * width);
      total += v * (2.0 * p * d1 / pol.r + d2 + d1 / pol.r);
    }
    return total;
  };
  CompatibleSolution out;
  out.value = [local](const Point& y) { return local(y, false); };
  out.laplacian = [local](const Point& y) { return local(y, true); };
  return out;
}

MembershipReport classify_solution(const Mesh& mesh, const DomainSpec& domain,
                                   const VectorXc& u_h, Complex t) {
  ModelProblem problem;
  problem.omega0 = domain.corners().omega0;
  problem.t = t;
  const Eigenpair phi0 = eigenvector(problem, 0.0);
  const auto [r_min, r_max] = default_annulus(domain);
  std::vector<SingularFit> fits;
  for (int j = 0; j < 2; ++j)
    fits.push_back(fit_singular_expansion(mesh, domain, u_h, j, phi0, r_min, r_max));
  return membership_report(fits);
}

}  // namespace nlbvp
