#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nlbvp/common.hpp"

namespace nlbvp {

enum class ModelKind { Nonlocal, Dirichlet };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// phi'' - lambda^2 phi = 0 on (-omega0, omega0) with either the nonlocal
/// conditions phi(-omega0) - (1+t) phi(0) = 0, phi(omega0) - (1-t) phi(0) = 0
/// or the Dirichlet conditions phi(+-omega0) = 0 (t ignored).
struct ModelProblem {
  double omega0 = kPi / 3.0;
  Complex t = 0.0;
  ModelKind kind = ModelKind::Nonlocal;

  void validate() const;
};

/// Regularized fundamental basis {cosh(lambda w), sinh(lambda w)/lambda};
/// entire in lambda and equal to {1, w} at lambda = 0.
Complex basis_cosh(Complex lambda, double w);
Complex basis_sinhc(Complex lambda, double w);
/// lambda-derivatives of the two basis functions.
Complex basis_cosh_dlambda(Complex lambda, double w);
Complex basis_sinhc_dlambda(Complex lambda, double w);

using Matrix2c = Eigen::Matrix<Complex, 2, 2>;
using Vector2c = Eigen::Matrix<Complex, 2, 1>;

/// Rows: the two conditions; columns: the two basis functions.
Matrix2c condition_matrix(const ModelProblem& problem, Complex lambda);

/// Characteristic determinant Delta(lambda) = det condition_matrix.
Complex char_det(const ModelProblem& problem, Complex lambda);
Complex char_det_derivative(const ModelProblem& problem, Complex lambda);

struct Strip {
  double imag_min = -1.0;
  double imag_max = 0.0;
  double real_bound = 1.0;

  void validate() const;
};

/// Default |Re lambda| bound pi/omega0 (K + 1/2).
double default_real_bound(double omega0, int k_max);

struct EigenvalueHit {
  Complex lambda;
  int det_zero_order = 1;
};

struct RootSearchOptions {
  int boundary_samples = 512;      // per cell edge loop
  int max_depth = 24;              // subdivision depth limit
  double min_cell = 1e-3;          // below this size a multi-count cell is one root
  double det_tolerance = 1e-12;    // |Delta| accepted at a refined root
  int max_window_retries = 4;      // window perturbations on boundary zeros
  double window_shift = 1e-6;
};

/// All zeros of Delta in the window [-real_bound, real_bound] x
/// [imag_min, imag_max], sorted by (Im, Re). Zeros on the window boundary
/// are captured by widening the window by 1e-6 and retrying.
std::vector<EigenvalueHit> eigenvalues_in_strip(const ModelProblem& problem, const Strip& strip,
                                                const RootSearchOptions& options = {});

/// Winding number of Delta along the boundary of a rectangle; nullopt when a
/// zero lies on (or numerically at) the contour.
std::optional<int> argument_principle_count(const ModelProblem& problem, Complex lower_left,
                                            Complex upper_right, int samples);

/// Order of the zero at `lambda` from the winding number on a small circle.
int zero_order(const ModelProblem& problem, Complex lambda, double radius = 1e-3);

/// Associate vector phi1 solving phi1'' - lambda0^2 phi1 = 2 lambda0 phi0 with
/// the same conditions. Represented as phi1 = p * d/dlambda(phi0 basis) + a
/// cosh + b sinhc, where the particular part has p = 1.
struct AssociateVector {
  Vector2c particular = Vector2c::Zero();  // (A, B) of phi0 carried by the d/dlambda basis
  Vector2c coeffs = Vector2c::Zero();  // homogeneous part, orthogonal to phi0 in L2
  double norm = 0.0;    // L2(-omega0, omega0) norm of the representative
  double residual = 0.0;

  Complex operator()(Complex lambda0, double w) const;
};

struct Eigenpair {
  ModelProblem problem;
  Complex lambda0;
  Vector2c coeffs = Vector2c::Zero();  // (A, B) in the regularized basis
  enum class Normalization { UnitAtZero, MaxNormOne };
  Normalization normalization = Normalization::UnitAtZero;
  double residual = 0.0;  // max |condition| after normalization
  std::vector<AssociateVector> chain;  // associate vectors found so far

  Complex operator()(double w) const;
};

/// Null vector of the condition matrix at lambda0, normalized by phi(0) = 1
/// when phi(0) != 0, otherwise to unit max-norm on [-omega0, omega0].
Eigenpair eigenvector(const ModelProblem& problem, Complex lambda0);

struct AssociateResult {
  /// Least-norm representative modulo the eigenvector; empty when the
  /// inhomogeneous system is inconsistent and the chain stops at phi0.
  std::optional<AssociateVector> phi1;
  /// Least-squares residual of the condition system relative to its data.
  double consistency_residual = 0.0;
  int chain_length = 1;
};

AssociateResult associate_vector(const ModelProblem& problem, const Eigenpair& pair);

}  // namespace nlbvp
