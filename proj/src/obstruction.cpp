#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "nlbvp/fem.hpp"

namespace nlbvp {

std::string to_string(Example e) {
  switch (e) {
    case Example::Ex1: return "ex1";
    case Example::Ex2: return "ex2";
    case Example::Ex3: return "ex3";
  }
  return "ex1";
}

Example parse_example(const std::string& name) {
  if (name == "ex1") return Example::Ex1;
  if (name == "ex2") return Example::Ex2;
  if (name == "ex3") return Example::Ex3;
  fail(ErrorKind::Config, "unknown example '" + name + "' (expected ex1, ex2 or ex3)");
}

bool ObstructionReport::obstructed() const {
  if (rows.empty()) return false;
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) lowest = std::min(lowest, r.indicator);
  return lowest > threshold;
}

namespace {

double segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

struct ObstructionField {
  VectorXc u;
  Point image_of_g1;
  double u_at_image = 0.0;
  double plateau = 0.0;
  double support = 0.0;
};

// u = v + w on the mesh for the contraction map with ratio s.
ObstructionField build_obstruction_field(const DomainSpec& domain, const DiffeoMap& map,
                                         Complex t, const Mesh& mesh) {
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.num_vertices());
  std::vector<Point> image;
  for (const auto& p : domain.gamma1().polyline()) image.push_back(map(p));
  auto distance_to_image = [&](const Point& p) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < image.size(); ++k)
      d = std::min(d, segment_distance(p, image[k], image[k + 1]));
    return d;
  };

  ObstructionField field;
  field.plateau = 0.2 * map.margin();
  field.support = 0.8 * map.margin();
  field.image_of_g1 = map(domain.corners().g1);

  // Bump v: 1 within the plateau of the image curve, 0 beyond the support.
  Eigen::VectorXd v(n);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    dist[i] = distance_to_image(mesh.vertices[i]);
    v(i) = 1.0 - smoothstep5((dist[i] - field.plateau) / (field.support - field.plateau));
  }
  // v = 1 on every vertex of a triangle that contains the image of a Gamma1 vertex.
  const PointLocator locator(mesh);
  std::vector<char> forced(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto m = mesh.markers[i];
    if (m != VertexMarker::Gamma1 && !is_corner(m)) continue;
    const auto loc = locator.locate(map(mesh.vertices[i]));
    if (!loc) fail(ErrorKind::Geometry, "image of a boundary vertex lies outside the mesh");
    for (int k : mesh.triangles[loc->triangle]) forced[k] = 1;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (forced[i]) v(i) = 1.0;
    if (is_boundary(mesh.markers[i]) && v(i) != 0.0) {
      std::ostringstream msg;
      msg << "obstruction bump support intersects the boundary at vertex " << i;
      fail(ErrorKind::Geometry, msg.str());
    }
  }

  // w: discrete harmonic extension of the Gamma1 indicator, scaled by -t and
  // cut off on the support of v.
  std::vector<int> interior_index(static_cast<std::size_t>(n), -1);
  int n_int = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!is_boundary(mesh.markers[i])) interior_index[i] = n_int++;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (mesh.markers[i] == VertexMarker::Gamma1) g(i) = 1.0;

  std::vector<Eigen::Triplet<double>> kii;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_int);
  for (std::size_t tr = 0; tr < mesh.num_triangles(); ++tr) {
    const auto& tri = mesh.triangles[tr];
    const double two_area = 2.0 * mesh.area(tr);
    std::array<Point, 3> grad;
    for (int k = 0; k < 3; ++k) {
      const Point& pj = mesh.vertices[tri[(k + 1) % 3]];
      const Point& pk = mesh.vertices[tri[(k + 2) % 3]];
      grad[k] = Point(pj.y() - pk.y(), pk.x() - pj.x()) / two_area;
    }
    for (int a = 0; a < 3; ++a) {
      const int ia = interior_index[tri[a]];
      if (ia < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const double kab = 0.5 * two_area * grad[a].dot(grad[b]);
        const int ib = interior_index[tri[b]];
        if (ib >= 0)
          kii.emplace_back(ia, ib, kab);
        else
          rhs(ia) -= kab * g(tri[b]);
      }
    }
  }
  Eigen::SparseMatrix<double> K(n_int, n_int);
  K.setFromTriplets(kii.begin(), kii.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success)
    fail(ErrorKind::Numerical, "harmonic lifting factorization failed");
  const Eigen::VectorXd ext = ldlt.solve(rhs);

  field.u.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double harmonic = interior_index[i] >= 0 ? ext(interior_index[i]) : g(i);
    if (forced[i] || dist[i] < field.support) harmonic = 0.0;
    field.u(i) = v(i) - t * harmonic;
  }
  const Complex at_image = evaluate(mesh, locator, field.u, field.image_of_g1);
  field.u_at_image = at_image.real();
  return field;
}

ObstructionMeshRow run_obstruction(const DomainSpec& domain, const DiffeoMap& map,
                                   const NonlocalBC& bc, Complex t, Complex shift,
                                   const Mesh& mesh) {
  const ObstructionField field = build_obstruction_field(domain, map, t, mesh);
  const DiscreteNonlocalOperator op = assemble_operator(mesh, bc, t, shift);
  const VectorXc load = -(op.stiffness + shift * op.mass) * field.u;
  const SolveResult sol = solve(op, load);
  const PointLocator locator(mesh);

  ObstructionMeshRow row;
  row.h = mesh.h;
  row.n_unknowns = op.cols();
  row.u_exact_at_image = field.u_at_image;
  row.residual = sol.residual;
  row.u_h_at_image = evaluate(mesh, locator, sol.u, field.image_of_g1);
  row.indicator = std::max(row.residual, std::abs(row.u_h_at_image - field.u_at_image));
  return row;
}

}  // namespace

ObstructionReport obstruction_test(const DomainSpec& domain, double contraction_ratio, Complex t,
                                   const std::vector<Mesh>& meshes, Complex shift,
                                   double threshold) {
  if (std::abs(t) > 1.0) fail(ErrorKind::Config, "obstruction test needs |t| <= 1");
  if (!(domain.corners().omega0 < kPi / 2.0))
    fail(ErrorKind::Config, "obstruction test needs omega0 < pi/2");
  const NonlocalBC bc = example3_bc(domain, contraction_ratio);
  const DiffeoMap& map = *bc.gamma1.map;

  ObstructionReport report;
  report.t = t;
  report.shift = shift;
  report.threshold = threshold;
  report.bump_plateau = 0.2 * map.margin();
  report.bump_support = 0.8 * map.margin();
  for (const auto& mesh : meshes)
    report.rows.push_back(run_obstruction(domain, map, bc, t, shift, mesh));
  return report;
}

NonlocalBC make_bc(const SweepProblem& problem) {
  if (!problem.domain) fail(ErrorKind::Config, "sweep problem without a domain");
  switch (problem.example) {
    case Example::Ex1: return example1_bc(*problem.domain);
    case Example::Ex2:
      if (!problem.cutoff) fail(ErrorKind::Config, "example ex2 needs cutoff parameters");
      return example2_bc(*problem.domain, *problem.cutoff);
    case Example::Ex3: return example3_bc(*problem.domain, problem.contraction_ratio);
  }
  fail(ErrorKind::Config, "unknown example");
}

ScalarField smooth_interior_load(const DomainSpec& domain) {
  const Point c = domain.centroid();
  const double radius = 0.3 * domain.corners().separation();
  return [c, radius](const Point& y) {
    const double s = (y - c).squaredNorm() / (radius * radius);
    if (s >= 1.0) return Complex(0.0);
    const double b = 1.0 - s;
    return Complex(b * b * b);
  };
}

std::vector<SweepRow> index_proxy_sweep(const SweepProblem& problem,
                                        const std::vector<Complex>& t_values, Complex shift,
                                        const std::vector<Mesh>& meshes) {
  const NonlocalBC bc = make_bc(problem);
  const ScalarField load_fn = smooth_interior_load(*problem.domain);
  std::vector<SweepRow> rows;
  for (const auto& mesh : meshes) {
    const PointLocator locator(mesh);
    const VectorXc smooth_load = load_vector(mesh, load_fn);
    for (Complex t : t_values) {
      SweepRow row;
      row.example = problem.example;
      row.t = t;
      row.h = mesh.h;
      try {
        const DiscreteNonlocalOperator op = assemble_operator(mesh, bc, t, shift);
        row.n_unknowns = op.cols();
        KernelResult ker;
        try {
          ker = numerical_kernel(op, KernelRule::gap());
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Numerical) throw;
          ker = numerical_kernel(op, KernelRule::fixed(1e-8));
          row.kernel_gap_fallback = true;
        }
        row.ker_dim = ker.dimension;
        if (ker.dimension > 0) row.kernel_cosine = cosine_with_constants(ker.basis.col(0));
        row.sigma_min = ker.sigma_min;
        if (problem.example == Example::Ex3) {
          const ObstructionField field =
              build_obstruction_field(*problem.domain, *bc.gamma1.map, t, mesh);
          const VectorXc load = -(op.stiffness + shift * op.mass) * field.u;
          const SolveResult sol = solve(op, load);
          row.residual = sol.residual;
          row.u_at_image = evaluate(mesh, locator, sol.u, field.image_of_g1);
          row.solution = sol.u;
        } else {
          const SolveResult sol = solve(op, smooth_load);
          row.residual = sol.residual;
          row.solution = sol.u;
        }
      } catch (const Error& e) {
        row.aborted = true;
        row.message = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace nlbvp
