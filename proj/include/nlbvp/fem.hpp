#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nlbvp/geometry.hpp"
#include "nlbvp/mesh.hpp"

namespace nlbvp {

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;
using SparseMatrixC = Eigen::SparseMatrix<Complex>;
using ScalarField = std::function<Complex(const Point&)>;

/// Coefficient b(y) of a nonlocal term, given the parameter t.
using Coefficient = std::function<Complex(const Point& y, Complex t)>;

/// Condition on one boundary curve: u(y) - b(y, t) u(map(y)) = rhs(y).
/// Without a map (or with b = 0) the condition is u(y) = rhs(y).
struct CurveCondition {
  Coefficient coefficient;
  std::optional<DiffeoMap> map;
  ScalarField rhs;  // empty means 0
};

struct NonlocalBC {
  std::string name;
  CurveCondition gamma1;
  CurveCondition gamma2;

  const CurveCondition& on(CurveId id) const { return id == CurveId::Gamma1 ? gamma1 : gamma2; }
};

/// u - (1+t) u(rotation into the bisector) on Gamma1, u - (1-t) u(...) on Gamma2.
NonlocalBC example1_bc(const DomainSpec& domain);
/// Example 1 with both nonlocal coefficients multiplied by the cutoff.
NonlocalBC example2_bc(const DomainSpec& domain, const CutoffXi& cutoff);
/// u + t u(contraction(y)) on Gamma1, u = 0 on Gamma2.
NonlocalBC example3_bc(const DomainSpec& domain, double contraction_ratio);
NonlocalBC dirichlet_bc();

/// Discrete problem: equation rows L u = load, constraint rows C u = g,
/// u = particular + Z z, reduced operator A = L Z.
struct DiscreteNonlocalOperator {
  SparseMatrixC stiffness;  // N x N, integral of grad phi_i . grad phi_j
  SparseMatrixC mass;       // N x N consistent mass
  SparseMatrixC L;          // equation rows of -stiffness - shift * mass
  SparseMatrixC C;          // constraint rows, one per (boundary vertex, curve)
  VectorXc constraint_rhs;
  SparseMatrixC Z;          // N x n basis of null(C)
  VectorXc particular;      // C particular = constraint_rhs
  SparseMatrixC A;          // L Z

  std::vector<int> equation_vertices;
  std::vector<int> constraint_vertices;
  std::vector<CurveId> constraint_curves;
  /// Vertices whose assembled constraint rows were identically zero; they
  /// carry equation rows instead.
  std::vector<int> vacuous_vertices;
  double constraint_inconsistency = 0.0;

  Complex t = 0.0;
  Complex shift = 0.0;
  std::string problem;
  std::string mesh_id;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }
};

/// Assembles the P1 operator. Raises a geometry error naming the vertex when
/// the image of a boundary vertex cannot be located in the mesh.
DiscreteNonlocalOperator assemble_operator(const Mesh& mesh, const NonlocalBC& bc, Complex t,
                                           Complex shift = 0.0);

/// Load vector int f phi_i by one-point quadrature at triangle centroids.
VectorXc load_vector(const Mesh& mesh, const ScalarField& f);

struct SolveResult {
  VectorXc u;  // nodal values
  double residual = 0.0;  // ||A z - b|| / ||b||
  bool rank_deficient = false;
  Eigen::Index rank = 0;
};

/// Least-squares solve with the equation-row part of `load` (length N).
/// Rank-deficient operators give the minimum-norm solution and raise the flag.
SolveResult solve(const DiscreteNonlocalOperator& op, const VectorXc& load);

struct KernelRule {
  enum class Kind { Gap, Fixed };
  Kind kind = Kind::Gap;
  double tau = 1e-8;  // relative threshold for Kind::Fixed

  static KernelRule gap() { return {}; }
  static KernelRule fixed(double tau) { return {Kind::Fixed, tau}; }
};

struct KernelResult {
  int dimension = 0;
  MatrixXc basis;  // N x dimension, vertex coordinates
  Eigen::VectorXd singular_values;  // descending; sigma_max and the smallest Ritz values when iterative
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  bool iterative = false;
};

inline constexpr Eigen::Index kDenseKernelLimit = 5000;

/// Numerical kernel of A. Dense singular values up to kDenseKernelLimit
/// unknowns, subspace inverse iteration above that. Kernel vectors come from
/// sparse inverse iteration when A can be factored.
KernelResult numerical_kernel(const DiscreteNonlocalOperator& op,
                              const KernelRule& rule = KernelRule::gap());

/// |<u, 1>| / (||u|| ||1||).
double cosine_with_constants(const VectorXc& u);

/// P1 interpolation of a nodal vector at an arbitrary point of the domain.
Complex evaluate(const Mesh& mesh, const PointLocator& locator, const VectorXc& u, const Point& p);

// ---------------------------------------------------------------------------
// Manufactured solution and errors

/// Value, gradient and Laplacian of a smooth real function.
struct SmoothFunction {
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
  std::function<double(const Point&)> laplacian;
};

/// sin(pi x) * y * product of the affine functions of the boundary polygon
/// edges; vanishes on the boundary of a convex polygonal domain.
SmoothFunction manufactured_solution(const DomainSpec& domain);

/// H1 error |u - u_h|_{H1} seminorm and L2 error, by a degree-5 rule.
struct ErrorNorms {
  double h1_seminorm = 0.0;
  double l2 = 0.0;
};
ErrorNorms error_norms(const Mesh& mesh, const VectorXc& u_h, const SmoothFunction& exact);

/// Least-squares slope of log(error) against log(h).
double convergence_rate(const std::vector<double>& h, const std::vector<double>& error);

// ---------------------------------------------------------------------------
// Obstruction harness

struct ObstructionMeshRow {
  double h = 0.0;
  Eigen::Index n_unknowns = 0;
  double u_exact_at_image = 0.0;  // constructed u at the image of g1
  double residual = 0.0;
  Complex u_h_at_image = 0.0;
  double indicator = 0.0;         // max(residual, |u_h - u| at the image of g1)
};

struct ObstructionReport {
  Complex t = 0.0;
  Complex shift = 0.0;
  double threshold = 0.1;
  double bump_plateau = 0.0;
  double bump_support = 0.0;
  std::vector<ObstructionMeshRow> rows;

  /// Smallest indicator over the meshes exceeds the threshold.
  bool obstructed() const;
};

/// Builds u = v + w on each mesh (v a bump equal to 1 around the image of
/// Gamma1, w a discrete lifting of -t v(map(y)) from Gamma1), takes
/// f = L u and solves the example-3 problem with that load.
ObstructionReport obstruction_test(const DomainSpec& domain, double contraction_ratio, Complex t,
                                   const std::vector<Mesh>& meshes, Complex shift = 0.0,
                                   double threshold = 0.1);

// ---------------------------------------------------------------------------
// Sweeps

enum class Example { Ex1, Ex2, Ex3 };
std::string to_string(Example e);
Example parse_example(const std::string& name);

struct SweepRow {
  Example example = Example::Ex1;
  Complex t = 0.0;
  double h = 0.0;
  Eigen::Index n_unknowns = 0;
  int ker_dim = 0;
  double kernel_cosine = 0.0;  // first kernel vector against constants
  double sigma_min = 0.0;
  double residual = 0.0;
  std::optional<Complex> u_at_image;  // example 3 only
  bool kernel_gap_fallback = false;
  bool aborted = false;
  std::string message;
  VectorXc solution;  // nodal solution of the sweep load (not serialized)
};

struct SweepProblem {
  Example example = Example::Ex1;
  const DomainSpec* domain = nullptr;
  std::optional<CutoffXi> cutoff;       // example 2
  double contraction_ratio = 0.5;       // example 3
};

NonlocalBC make_bc(const SweepProblem& problem);

/// Kernel dimension, sigma_min and a solve residual for every (t, mesh):
/// the obstruction load for example 3, a smooth interior load otherwise.
std::vector<SweepRow> index_proxy_sweep(const SweepProblem& problem,
                                        const std::vector<Complex>& t_values, Complex shift,
                                        const std::vector<Mesh>& meshes);

/// Smooth load supported away from the corners used by the sweeps.
ScalarField smooth_interior_load(const DomainSpec& domain);

}  // namespace nlbvp
