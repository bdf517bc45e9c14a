#include "nlbvp/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <Eigen/SparseQR>

namespace nlbvp {

NonlocalBC example1_bc(const DomainSpec& domain) {
  NonlocalBC bc;
  bc.name = "ex1";
  bc.gamma1.coefficient = [](const Point&, Complex t) { return 1.0 + t; };
  bc.gamma1.map = build_corner_rotation_map(domain, CurveId::Gamma1);
  bc.gamma2.coefficient = [](const Point&, Complex t) { return 1.0 - t; };
  bc.gamma2.map = build_corner_rotation_map(domain, CurveId::Gamma2);
  return bc;
}

NonlocalBC example2_bc(const DomainSpec& domain, const CutoffXi& cutoff) {
  NonlocalBC bc = example1_bc(domain);
  bc.name = "ex2";
  bc.gamma1.coefficient = [cutoff](const Point& y, Complex t) { return (1.0 + t) * cutoff(y); };
  bc.gamma2.coefficient = [cutoff](const Point& y, Complex t) { return (1.0 - t) * cutoff(y); };
  return bc;
}

NonlocalBC example3_bc(const DomainSpec& domain, double contraction_ratio) {
  NonlocalBC bc;
  bc.name = "ex3";
  bc.gamma1.coefficient = [](const Point&, Complex t) { return -t; };
  bc.gamma1.map = build_interior_contraction_map(domain, contraction_ratio);
  bc.gamma2.coefficient = [](const Point&, Complex) { return Complex(0.0); };
  return bc;
}

NonlocalBC dirichlet_bc() {
  NonlocalBC bc;
  bc.name = "dirichlet";
  return bc;
}

namespace {

using Triplet = Eigen::Triplet<Complex>;

std::vector<CurveId> curves_of(VertexMarker m) {
  switch (m) {
    case VertexMarker::Gamma1: return {CurveId::Gamma1};
    case VertexMarker::Gamma2: return {CurveId::Gamma2};
    case VertexMarker::CornerG1:
    case VertexMarker::CornerG2: return {CurveId::Gamma1, CurveId::Gamma2};
    case VertexMarker::Interior: break;
  }
  return {};
}

// Gradients of the three P1 basis functions on a triangle.
std::array<Point, 3> p1_gradients(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const double two_area = 2.0 * mesh.area(t);
  std::array<Point, 3> g;
  for (int k = 0; k < 3; ++k) {
    const Point& pj = mesh.vertices[tri[(k + 1) % 3]];
    const Point& pk = mesh.vertices[tri[(k + 2) % 3]];
    g[k] = Point(pj.y() - pk.y(), pk.x() - pj.x()) / two_area;
  }
  return g;
}

struct ConstraintRow {
  int vertex;
  CurveId curve;
  std::map<int, Complex> entries;
  Complex rhs;
};

struct NullSpace {
  SparseMatrixC Z;
  VectorXc particular;
  double inconsistency = 0.0;
};

// Gauss-Jordan elimination on the dense column-compressed constraint matrix.
NullSpace constraint_null_space(const std::vector<ConstraintRow>& rows, Eigen::Index n) {
  std::vector<int> cols;
  for (const auto& r : rows)
    for (const auto& [c, v] : r.entries) cols.push_back(c);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  std::vector<int> local(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < cols.size(); ++k) local[cols[k]] = static_cast<int>(k);

  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index w = static_cast<Eigen::Index>(cols.size());
  MatrixXc R = MatrixXc::Zero(m, w);
  VectorXc g(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (const auto& [c, v] : rows[r].entries) R(r, local[c]) = v;
    g(r) = rows[r].rhs;
  }

  constexpr double kPivotTol = 1e-10;
  std::vector<Eigen::Index> pivot_col(static_cast<std::size_t>(m), -1);
  std::vector<char> is_pivot(static_cast<std::size_t>(w), 0);
  double inconsistency = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    Eigen::Index best = -1;
    double best_abs = 0.0;
    for (Eigen::Index c = 0; c < w; ++c) {
      if (is_pivot[c]) continue;
      const double a = std::abs(R(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = c;
      }
    }
    if (best < 0 || best_abs <= kPivotTol) {
      inconsistency = std::max(inconsistency, std::abs(g(r)));
      continue;
    }
    const int own = local[rows[r].vertex];
    if (own >= 0 && !is_pivot[own] && std::abs(R(r, own)) >= 0.5 * best_abs) best = own;
    const Complex p = R(r, best);
    R.row(r) /= p;
    g(r) /= p;
    R(r, best) = 1.0;
    for (Eigen::Index o = 0; o < m; ++o) {
      if (o == r) continue;
      const Complex f = R(o, best);
      if (f == 0.0) continue;
      R.row(o) -= f * R.row(r);
      R(o, best) = 0.0;
      g(o) -= f * g(r);
    }
    pivot_col[r] = best;
    is_pivot[best] = 1;
  }

  std::vector<char> vertex_pivot(static_cast<std::size_t>(n), 0);
  for (Eigen::Index c = 0; c < w; ++c)
    if (is_pivot[c]) vertex_pivot[cols[c]] = 1;
  std::vector<int> free_index(static_cast<std::size_t>(n), -1);
  int n_free = 0;
  for (Eigen::Index v = 0; v < n; ++v)
    if (!vertex_pivot[v]) free_index[v] = n_free++;

  std::vector<Triplet> trip;
  for (Eigen::Index v = 0; v < n; ++v)
    if (free_index[v] >= 0) trip.emplace_back(v, free_index[v], 1.0);
  NullSpace ns;
  ns.particular = VectorXc::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (pivot_col[r] < 0) continue;
    const int pv = cols[pivot_col[r]];
    ns.particular(pv) = g(r);
    for (Eigen::Index c = 0; c < w; ++c) {
      if (is_pivot[c] || R(r, c) == 0.0) continue;
      trip.emplace_back(pv, free_index[cols[c]], -R(r, c));
    }
  }
  ns.Z.resize(n, n_free);
  ns.Z.setFromTriplets(trip.begin(), trip.end());
  ns.inconsistency = inconsistency;
  return ns;
}

bool is_real(const SparseMatrixC& a) {
  for (Eigen::Index k = 0; k < a.outerSize(); ++k)
    for (SparseMatrixC::InnerIterator it(a, k); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

}  // namespace

DiscreteNonlocalOperator assemble_operator(const Mesh& mesh, const NonlocalBC& bc, Complex t,
                                           Complex shift) {
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.num_vertices());
  DiscreteNonlocalOperator op;
  op.t = t;
  op.shift = shift;
  op.problem = bc.name;
  op.mesh_id = mesh.id();

  std::vector<Triplet> k_trip, m_trip;
  k_trip.reserve(9 * mesh.num_triangles());
  m_trip.reserve(9 * mesh.num_triangles());
  for (std::size_t tr = 0; tr < mesh.num_triangles(); ++tr) {
    const auto& tri = mesh.triangles[tr];
    const double area = mesh.area(tr);
    const auto g = p1_gradients(mesh, tr);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        k_trip.emplace_back(tri[a], tri[b], area * g[a].dot(g[b]));
        m_trip.emplace_back(tri[a], tri[b], area / 12.0 * (a == b ? 2.0 : 1.0));
      }
  }
  op.stiffness.resize(n, n);
  op.stiffness.setFromTriplets(k_trip.begin(), k_trip.end());
  op.mass.resize(n, n);
  op.mass.setFromTriplets(m_trip.begin(), m_trip.end());

  // Constraint rows.
  const PointLocator locator(mesh);
  std::vector<ConstraintRow> rows;
  std::vector<char> has_equation(static_cast<std::size_t>(n), 0);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto curves = curves_of(mesh.markers[v]);
    if (curves.empty()) {
      has_equation[v] = 1;
      continue;
    }
    const Point& y = mesh.vertices[v];
    bool all_vacuous = true;
    for (CurveId c : curves) {
      const CurveCondition& cond = bc.on(c);
      ConstraintRow row{static_cast<int>(v), c, {}, cond.rhs ? cond.rhs(y) : Complex(0.0)};
      row.entries[static_cast<int>(v)] += 1.0;
      const Complex b = cond.coefficient ? cond.coefficient(y, t) : Complex(0.0);
      if (b != 0.0 && cond.map) {
        const Point image = (*cond.map)(y);
        const auto loc = locator.locate(image);
        if (!loc) {
          std::ostringstream msg;
          msg << "point location failed for the image (" << image.x() << ", " << image.y()
              << ") of boundary vertex " << v;
          fail(ErrorKind::Geometry, msg.str());
        }
        const auto& tri = mesh.triangles[loc->triangle];
        for (int k = 0; k < 3; ++k)
          if (loc->bary[k] != 0.0) row.entries[tri[k]] -= b * loc->bary[k];
      }
      for (auto it = row.entries.begin(); it != row.entries.end();)
        it = std::abs(it->second) <= 1e-14 ? row.entries.erase(it) : std::next(it);
      if (row.entries.empty()) {
        op.constraint_inconsistency = std::max(op.constraint_inconsistency, std::abs(row.rhs));
        continue;
      }
      all_vacuous = false;
      rows.push_back(std::move(row));
    }
    if (all_vacuous) {
      has_equation[v] = 1;
      op.vacuous_vertices.push_back(static_cast<int>(v));
    }
  }

  std::vector<Triplet> c_trip;
  op.constraint_rhs.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [c, val] : rows[r].entries) c_trip.emplace_back(r, c, val);
    op.constraint_rhs(static_cast<Eigen::Index>(r)) = rows[r].rhs;
    op.constraint_vertices.push_back(rows[r].vertex);
    op.constraint_curves.push_back(rows[r].curve);
  }
  op.C.resize(static_cast<Eigen::Index>(rows.size()), n);
  op.C.setFromTriplets(c_trip.begin(), c_trip.end());

  NullSpace ns = constraint_null_space(rows, n);
  op.Z = std::move(ns.Z);
  op.particular = std::move(ns.particular);
  op.constraint_inconsistency = std::max(op.constraint_inconsistency, ns.inconsistency);

  // Equation rows of -K - shift M.
  for (Eigen::Index v = 0; v < n; ++v)
    if (has_equation[v]) op.equation_vertices.push_back(static_cast<int>(v));
  const SparseMatrixC full = -(op.stiffness + shift * op.mass);
  std::vector<Triplet> s_trip;
  for (std::size_t r = 0; r < op.equation_vertices.size(); ++r)
    s_trip.emplace_back(r, op.equation_vertices[r], 1.0);
  SparseMatrixC select(static_cast<Eigen::Index>(op.equation_vertices.size()), n);
  select.setFromTriplets(s_trip.begin(), s_trip.end());
  op.L = select * full;
  op.A = op.L * op.Z;
  op.A.makeCompressed();
  return op;
}

VectorXc load_vector(const Mesh& mesh, const ScalarField& f) {
  VectorXc b = VectorXc::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Complex share = f(mesh.centroid(t)) * (mesh.area(t) / 3.0);
    for (int v : mesh.triangles[t]) b(v) += share;
  }
  return b;
}

namespace {

constexpr Eigen::Index kDenseSolveLimit = 2500;
constexpr double kRankThreshold = 1e-10;

template <typename Dense, typename Vec>
Vec dense_min_norm(const Dense& a, const Vec& b, Eigen::Index& rank) {
  Eigen::CompleteOrthogonalDecomposition<Dense> cod;
  cod.setThreshold(kRankThreshold);
  cod.compute(a);
  rank = cod.rank();
  return cod.solve(b);
}

// Deterministic start vectors.
MatrixXc probe_block(Eigen::Index n, int k) {
  MatrixXc x(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      x(i, j) = std::sin(0.7548776662 * static_cast<double>(i + 1) * (j + 1) + 0.5698402910 * j);
  return x;
}

// Lower bound of ||A||_F ||A^-1|| from two inverse-iteration steps.
double inverse_growth(const Eigen::SparseLU<SparseMatrixC>& lu, const SparseMatrixC& a) {
  VectorXc y = probe_block(a.cols(), 1).col(0);
  y /= y.norm();
  double growth = 0.0;
  for (int it = 0; it < 2; ++it) {
    y = lu.solve(y);
    const double nrm = y.norm();
    if (!std::isfinite(nrm)) return std::numeric_limits<double>::infinity();
    if (nrm == 0.0) return 0.0;
    growth = nrm;
    y /= nrm;
  }
  return growth * a.norm();
}

struct RitzPairs {
  Eigen::VectorXd values;  // descending
  MatrixXc vectors;        // matching right singular vectors
};

// k smallest singular triplets of a square A by subspace iteration with
// (A^H A)^-1. Empty when A cannot be factored.
std::optional<RitzPairs> smallest_singular(const SparseMatrixC& a, int k) {
  const Eigen::Index n = a.cols();
  k = static_cast<int>(std::min<Eigen::Index>(k, n));
  Eigen::SparseLU<SparseMatrixC> lu, luh;
  lu.compute(a);
  if (lu.info() != Eigen::Success) return std::nullopt;
  const SparseMatrixC ah = a.adjoint();
  luh.compute(ah);
  if (luh.info() != Eigen::Success) return std::nullopt;

  MatrixXc x = probe_block(n, k);
  RitzPairs out;
  Eigen::VectorXd previous = Eigen::VectorXd::Constant(k, -1.0);
  for (int it = 0; it < 40; ++it) {
    MatrixXc y = lu.solve(MatrixXc(luh.solve(x)));
    if (!y.allFinite()) return std::nullopt;
    Eigen::HouseholderQR<MatrixXc> qr(y);
    x = qr.householderQ() * MatrixXc::Identity(n, k);
    const MatrixXc ax = a * x;
    Eigen::JacobiSVD<MatrixXc> svd(ax, Eigen::ComputeThinV);
    out.values = svd.singularValues();
    out.vectors = x * svd.matrixV();
    const double scale = std::max(out.values(0), std::numeric_limits<double>::min());
    if (((out.values - previous).cwiseAbs().array() <= 1e-12 * scale).all()) break;
    previous = out.values;
  }
  return out;
}

}  // namespace

SolveResult solve(const DiscreteNonlocalOperator& op, const VectorXc& load) {
  if (load.size() != op.Z.rows())
    fail(ErrorKind::Config, "load vector length does not match the number of vertices");
  VectorXc rhs(static_cast<Eigen::Index>(op.equation_vertices.size()));
  for (std::size_t r = 0; r < op.equation_vertices.size(); ++r)
    rhs(static_cast<Eigen::Index>(r)) = load(op.equation_vertices[r]);
  rhs -= op.L * op.particular;

  SolveResult out;
  const Eigen::Index m = op.A.rows(), n = op.A.cols();
  VectorXc z;
  if (n == 0) {
    z = VectorXc::Zero(0);
    out.rank = 0;
  } else {
    // Sparse factorization first; dense minimum-norm only when A is
    // (numerically) singular or rank deficient.
    bool deficient = true;
    if (m == n) {
      Eigen::SparseLU<SparseMatrixC> lu;
      lu.compute(op.A);
      if (lu.info() == Eigen::Success && inverse_growth(lu, op.A) < 1.0 / kRankThreshold) {
        z = lu.solve(rhs);
        out.rank = n;
        deficient = false;
      }
    } else {
      Eigen::SparseQR<SparseMatrixC, Eigen::COLAMDOrdering<int>> qr;
      qr.setPivotThreshold(kRankThreshold);
      qr.compute(op.A);
      if (qr.info() == Eigen::Success && qr.rank() == n) {
        z = qr.solve(rhs);
        out.rank = n;
        deficient = false;
      }
    }
    if (deficient && n <= kDenseSolveLimit) {
      if (is_real(op.A) && rhs.imag().isZero(0.0)) {
        const Eigen::MatrixXd a = Eigen::MatrixXd(op.A.real());
        z = dense_min_norm(a, Eigen::VectorXd(rhs.real()), out.rank).cast<Complex>();
      } else {
        z = dense_min_norm(MatrixXc(op.A), rhs, out.rank);
      }
    } else if (deficient) {
      Eigen::SparseQR<SparseMatrixC, Eigen::COLAMDOrdering<int>> qr;
      qr.setPivotThreshold(kRankThreshold);
      qr.compute(op.A);
      if (qr.info() != Eigen::Success) fail(ErrorKind::Numerical, "sparse QR factorization failed");
      z = qr.solve(rhs);
      out.rank = qr.rank();
    }
  }
  out.rank_deficient = out.rank < n;
  const double norm = rhs.norm();
  const double res = (op.A * z - rhs).norm();
  out.residual = norm > 0.0 ? res / norm : res;
  out.u = op.particular + op.Z * z;
  return out;
}

namespace {

int gap_dimension(const Eigen::VectorXd& s) {
  const Eigen::Index n = s.size();
  if (n == 0) return 0;
  const double smax = s(0);
  if (smax == 0.0) return static_cast<int>(n);
  const double threshold = std::sqrt(std::numeric_limits<double>::epsilon()) * smax;
  Eigen::Index first = n;
  for (Eigen::Index i = 0; i < n; ++i)
    if (s(i) < threshold) {
      first = i;
      break;
    }
  if (first == n) return 0;
  double best = 0.0;
  Eigen::Index cut = -1;
  for (Eigen::Index i = std::max<Eigen::Index>(first - 1, 0); i + 1 < n; ++i) {
    const double ratio = s(i + 1) > 0.0 ? s(i) / s(i + 1) : std::numeric_limits<double>::infinity();
    if (ratio > best) {
      best = ratio;
      cut = i;
    }
  }
  if (best < 1e2) {
    std::ostringstream msg;
    msg << "ambiguous singular-value gap (largest ratio " << best
        << " below 1e2); pass an explicit relative threshold";
    fail(ErrorKind::Numerical, msg.str());
  }
  return static_cast<int>(n - (cut + 1));
}

int fixed_dimension(const Eigen::VectorXd& s, double tau) {
  if (s.size() == 0) return 0;
  const double threshold = tau * s(0);
  int dim = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) < threshold || s(i) == 0.0) ++dim;
  return dim;
}

template <typename Dense>
KernelResult dense_kernel(const Dense& a, const SparseMatrixC& sparse, const KernelRule& rule,
                          const SparseMatrixC& Z) {
  KernelResult out;
  Eigen::BDCSVD<Dense> values(a);
  Eigen::VectorXd s = values.singularValues();
  // Rectangular with fewer rows than columns: pad with exact zeros.
  if (a.rows() < a.cols()) {
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(a.cols());
    padded.head(s.size()) = s;
    s = padded;
  }
  out.singular_values = s;
  out.sigma_max = s.size() ? s(0) : 0.0;
  out.sigma_min = s.size() ? s(s.size() - 1) : 0.0;
  out.dimension = rule.kind == KernelRule::Kind::Gap ? gap_dimension(s) : fixed_dimension(s, rule.tau);
  if (out.dimension > 0) {
    // Kernel vectors by sparse subspace iteration; full dense V as fallback.
    std::optional<RitzPairs> ritz;
    if (sparse.rows() == sparse.cols()) ritz = smallest_singular(sparse, out.dimension + 2);
    MatrixXc kernel;
    if (ritz) {
      kernel = ritz->vectors.rightCols(out.dimension);
    } else {
      Eigen::BDCSVD<Dense> full(a, Eigen::ComputeFullV);
      kernel = full.matrixV().rightCols(out.dimension).template cast<Complex>();
    }
    out.basis = MatrixXc(Z * kernel);
  } else {
    out.basis = MatrixXc::Zero(Z.rows(), 0);
  }
  return out;
}

KernelResult iterative_kernel(const DiscreteNonlocalOperator& op, const KernelRule& rule) {
  constexpr int kRitz = 6;
  KernelResult out;
  out.iterative = true;
  const SparseMatrixC& a = op.A;
  const Eigen::Index n = a.cols();
  if (a.rows() != a.cols())
    fail(ErrorKind::Numerical, "inverse iteration needs a square operator");

  // sigma_max by power iteration on A^H A.
  const SparseMatrixC ah = a.adjoint();
  VectorXc x = probe_block(n, 1).col(0);
  x /= x.norm();
  double smax = 0.0;
  for (int it = 0; it < 60; ++it) {
    VectorXc y = ah * (a * x);
    const double nrm = y.norm();
    if (nrm == 0.0) break;
    smax = std::sqrt(nrm);
    x = y / nrm;
  }
  out.sigma_max = smax;

  const std::optional<RitzPairs> ritz = smallest_singular(a, kRitz);
  if (!ritz) fail(ErrorKind::Numerical, "operator is exactly singular; sparse factorization failed");
  // sigma_max followed by the smallest Ritz values.
  Eigen::VectorXd s(ritz->values.size() + 1);
  s << smax, ritz->values;
  out.singular_values = s;
  out.sigma_min = s(s.size() - 1);
  out.dimension = rule.kind == KernelRule::Kind::Gap ? gap_dimension(s) : fixed_dimension(s, rule.tau);
  if (out.dimension >= kRitz)
    fail(ErrorKind::Numerical, "kernel dimension exceeds the Ritz subspace size");
  out.basis = out.dimension > 0 ? MatrixXc(op.Z * ritz->vectors.rightCols(out.dimension))
                                : MatrixXc::Zero(op.Z.rows(), 0);
  return out;
}

}  // namespace

KernelResult numerical_kernel(const DiscreteNonlocalOperator& op, const KernelRule& rule) {
  if (op.A.cols() == 0) {
    KernelResult out;
    out.basis = MatrixXc::Zero(op.Z.rows(), 0);
    return out;
  }
  if (op.A.cols() > kDenseKernelLimit) return iterative_kernel(op, rule);
  if (is_real(op.A)) return dense_kernel(Eigen::MatrixXd(op.A.real()), op.A, rule, op.Z);
  return dense_kernel(MatrixXc(op.A), op.A, rule, op.Z);
}

double cosine_with_constants(const VectorXc& u) {
  const double n = u.norm();
  if (n == 0.0) return 0.0;
  return std::abs(u.sum()) / (n * std::sqrt(static_cast<double>(u.size())));
}

Complex evaluate(const Mesh& mesh, const PointLocator& locator, const VectorXc& u, const Point& p) {
  const auto loc = locator.locate(p);
  if (!loc) {
    std::ostringstream msg;
    msg << "point (" << p.x() << ", " << p.y() << ") lies outside the mesh";
    fail(ErrorKind::Geometry, msg.str());
  }
  const auto& tri = mesh.triangles[loc->triangle];
  return loc->bary[0] * u(tri[0]) + loc->bary[1] * u(tri[1]) + loc->bary[2] * u(tri[2]);
}

// ---------------------------------------------------------------------------

SmoothFunction manufactured_solution(const DomainSpec& domain) {
  struct Factor {
    std::function<double(const Point&)> value;
    Point grad_const;  // for affine factors
    bool affine;
  };
  // Affine edge functions, positive inside the counter-clockwise polygon.
  std::vector<std::pair<Point, double>> lines;  // normal, offset: n.p + c
  const auto& poly = domain.polygon();
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point a = poly[k], b = poly[(k + 1) % poly.size()];
    const Point d = (b - a).normalized();
    const Point normal(-d.y(), d.x());
    lines.emplace_back(normal, -normal.dot(a));
  }
  // Scale so that the product is O(1) at the centroid.
  const Point c = domain.centroid();
  double scale = 1.0;
  for (const auto& [nrm, off] : lines) scale *= nrm.dot(c) + off;
  scale = 1.0 / std::abs(scale);

  // Factors: sin(pi x), y, lines.
  auto factor_values = [lines](const Point& p, std::vector<double>& v, std::vector<Point>& g,
                               std::vector<double>& lap) {
    v.clear();
    g.clear();
    lap.clear();
    v.push_back(std::sin(kPi * p.x()));
    g.emplace_back(kPi * std::cos(kPi * p.x()), 0.0);
    lap.push_back(-kPi * kPi * std::sin(kPi * p.x()));
    v.push_back(p.y());
    g.emplace_back(0.0, 1.0);
    lap.push_back(0.0);
    for (const auto& [nrm, off] : lines) {
      v.push_back(nrm.dot(p) + off);
      g.push_back(nrm);
      lap.push_back(0.0);
    }
  };

  SmoothFunction f;
  f.value = [=](const Point& p) {
    std::vector<double> v, lap;
    std::vector<Point> g;
    factor_values(p, v, g, lap);
    double prod = scale;
    for (double x : v) prod *= x;
    return prod;
  };
  f.gradient = [=](const Point& p) {
    std::vector<double> v, lap;
    std::vector<Point> g;
    factor_values(p, v, g, lap);
    Point grad = Point::Zero();
    for (std::size_t i = 0; i < v.size(); ++i) {
      double others = scale;
      for (std::size_t j = 0; j < v.size(); ++j)
        if (j != i) others *= v[j];
      grad += others * g[i];
    }
    return grad;
  };
  f.laplacian = [=](const Point& p) {
    std::vector<double> v, lap;
    std::vector<Point> g;
    factor_values(p, v, g, lap);
    double total = 0.0;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
      double others = scale;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) others *= v[j];
      total += lap[i] * others;
      for (std::size_t k = i + 1; k < n; ++k) {
        double rest = scale;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && j != k) rest *= v[j];
        total += 2.0 * g[i].dot(g[k]) * rest;
      }
    }
    return total;
  };
  return f;
}

namespace {

// Degree-5 seven-point rule on the reference triangle (barycentric, weight).
struct QuadPoint {
  double l0, l1, l2, w;
};

const std::array<QuadPoint, 7>& degree5_rule() {
  static const std::array<QuadPoint, 7> rule = [] {
    const double a1 = 0.059715871789770, b1 = 0.470142064105115;
    const double a2 = 0.797426985353087, b2 = 0.101286507323456;
    const double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
    return std::array<QuadPoint, 7>{{{1.0 / 3, 1.0 / 3, 1.0 / 3, w0},
                                     {a1, b1, b1, w1},
                                     {b1, a1, b1, w1},
                                     {b1, b1, a1, w1},
                                     {a2, b2, b2, w2},
                                     {b2, a2, b2, w2},
                                     {b2, b2, a2, w2}}};
  }();
  return rule;
}

}  // namespace

ErrorNorms error_norms(const Mesh& mesh, const VectorXc& u_h, const SmoothFunction& exact) {
  double h1 = 0.0, l2 = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto g = p1_gradients(mesh, t);
    const double area = mesh.area(t);
    Eigen::Vector2cd grad_h = Eigen::Vector2cd::Zero();
    for (int k = 0; k < 3; ++k) grad_h += u_h(tri[k]) * g[k].cast<Complex>();
    for (const auto& q : degree5_rule()) {
      const Point p = q.l0 * mesh.vertices[tri[0]] + q.l1 * mesh.vertices[tri[1]] +
                      q.l2 * mesh.vertices[tri[2]];
      const Complex uh = q.l0 * u_h(tri[0]) + q.l1 * u_h(tri[1]) + q.l2 * u_h(tri[2]);
      const Eigen::Vector2cd diff = exact.gradient(p).cast<Complex>() - grad_h;
      h1 += q.w * area * diff.squaredNorm();
      l2 += q.w * area * std::norm(exact.value(p) - uh);
    }
  }
  return {std::sqrt(h1), std::sqrt(l2)};
}

double convergence_rate(const std::vector<double>& h, const std::vector<double>& error) {
  if (h.size() != error.size() || h.size() < 2)
    fail(ErrorKind::Config, "convergence rate needs at least two (h, error) pairs");
  const std::size_t n = h.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(error[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace nlbvp
