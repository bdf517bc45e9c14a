#pragma once

#include <string>
#include <vector>

#include "nlbvp/fem.hpp"
#include "nlbvp/spectral.hpp"

namespace nlbvp {

/// Weighted norm with weights rho^(2(a + |alpha| - k)) for |alpha| <= k.
struct WeightedNormSpec {
  int k = 0;
  double a = 0.0;

  void validate() const;
};

/// P1 weighted norm. Second derivatives vanish elementwise. Triangles
/// touching a corner use the centroid rule, all others a degree-5 rule.
double weighted_norm(const Mesh& mesh, const DomainSpec& domain, const VectorXc& u_h,
                     const WeightedNormSpec& spec);

/// Unweighted Sobolev norm over the triangles for which `keep` holds.
double sobolev_norm(const Mesh& mesh, const VectorXc& u_h, int k,
                    const std::function<bool(std::size_t)>& keep);

struct SingularFit {
  int corner = 0;
  Complex c = 0.0;
  Complex d = 0.0;
  double residual = 0.0;   // relative to the weighted norm of u_h on the annulus
  double r_min = 0.0;
  double r_max = 0.0;
  double condition = 0.0;  // of the weighted design matrix
  Vector2c phi0 = Vector2c::Zero();  // eigenvector coefficients used
  double c_relative = 0.0;  // |c| ||phi0|| / ||u_h||
  double d_relative = 0.0;  // |d| ||phi0 ln r|| / ||u_h||
};

inline constexpr int kFitGrid = 32;
inline constexpr double kFitConditionLimit = 1e4;

/// Least-squares fit of u_h on the annulus r_min < r < r_max about corner j
/// against {phi0(omega), phi0(omega) ln r}, using a midpoint rule on the
/// (omega, ln r) grid with area weights r^2.
SingularFit fit_singular_expansion(const Mesh& mesh, const DomainSpec& domain,
                                   const VectorXc& u_h, int corner, const Eigenpair& phi0,
                                   double r_min, double r_max);

/// Default annulus [0.1 eps, eps].
std::pair<double, double> default_annulus(const DomainSpec& domain);

struct MembershipReport {
  std::string classification;  // "regular", "singular(c)" or "singular(d)"
  std::vector<SingularFit> fits;
};

/// Coefficient significance threshold: 10 x fit residual, floored at 1e-8.
double significance_threshold(const SingularFit& fit);

/// Needs one fit per corner.
MembershipReport membership_report(const std::vector<SingularFit>& fits);

/// Regular solution of the example-1 conditions: chi(r) r^p phi(omega) at
/// each corner with p = pi / omega0 and phi the eigenvector at lambda = p i.
/// chi is a radial cutoff equal to 1 for r <= eps/2 and 0 for r >= 0.9 eps,
/// so the conditions hold exactly where the map is a rotation.
struct CompatibleSolution {
  ScalarField value;
  ScalarField laplacian;
};
CompatibleSolution compatible_corner_solution(const DomainSpec& domain, Complex t);

/// Fits both corners with the nonlocal eigenvector at lambda = 0 for t.
MembershipReport classify_solution(const Mesh& mesh, const DomainSpec& domain,
                                   const VectorXc& u_h, Complex t);

}  // namespace nlbvp
