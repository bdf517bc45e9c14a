#include "nlbvp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace nlbvp {

namespace {

constexpr Complex kI(0.0, 1.0);

// Series of sinh(z w)/z and its z-derivative for small |z w|.
Complex sinhc_series(Complex z, double w) {
  const Complex x2 = z * w * z * w;
  Complex term = w;
  Complex sum = term;
  for (int n = 1; n < 20; ++n) {
    term *= x2 / static_cast<double>((2 * n) * (2 * n + 1));
    sum += term;
  }
  return sum;
}

Complex sinhc_dlambda_series(Complex z, double w) {
  // sum_{n>=1} 2n z^{2n-1} w^{2n+1} / (2n+1)!
  Complex power = z * w * w * w;  // z^{2n-1} w^{2n+1} at n = 1
  double fact = 6.0;              // (2n+1)! at n = 1
  Complex sum = 2.0 * power / fact;
  for (int n = 2; n < 20; ++n) {
    power *= z * z * w * w;
    fact *= static_cast<double>((2 * n) * (2 * n + 1));
    sum += static_cast<double>(2 * n) * power / fact;
  }
  return sum;
}

// Condition functionals applied to the values g(-omega0), g(0), g(omega0).
Vector2c apply_conditions(const ModelProblem& p, Complex left, Complex mid, Complex right) {
  Vector2c out;
  if (p.kind == ModelKind::Nonlocal) {
    out << left - (1.0 + p.t) * mid, right - (1.0 - p.t) * mid;
  } else {
    out << left, right;
  }
  return out;
}

// Simpson nodes on [-omega0, omega0].
constexpr int kSimpsonIntervals = 2000;

template <typename F, typename G>
Complex l2_inner(double omega0, F&& f, G&& g) {
  const double h = 2.0 * omega0 / kSimpsonIntervals;
  Complex sum = 0.0;
  for (int k = 0; k <= kSimpsonIntervals; ++k) {
    const double w = -omega0 + k * h;
    const double weight = (k == 0 || k == kSimpsonIntervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += weight * f(w) * std::conj(g(w));
  }
  return sum * h / 3.0;
}

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::Nonlocal ? "nonlocal" : "dirichlet";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "nonlocal") return ModelKind::Nonlocal;
  if (name == "dirichlet") return ModelKind::Dirichlet;
  fail(ErrorKind::Config, "unknown model kind '" + name + "'");
}

void ModelProblem::validate() const {
  if (!(omega0 > 0.0 && omega0 < kPi))
    fail(ErrorKind::Config, "omega0 must lie in (0, pi)");
}

void Strip::validate() const {
  if (!(imag_min < imag_max)) fail(ErrorKind::Config, "strip needs imag_min < imag_max");
  if (!(real_bound > 0.0)) fail(ErrorKind::Config, "strip needs a positive real bound");
}

double default_real_bound(double omega0, int k_max) { return kPi / omega0 * (k_max + 0.5); }

Complex basis_cosh(Complex lambda, double w) { return std::cosh(lambda * w); }

Complex basis_sinhc(Complex lambda, double w) {
  if (std::abs(lambda * w) < 0.5) return sinhc_series(lambda, w);
  return std::sinh(lambda * w) / lambda;
}

Complex basis_cosh_dlambda(Complex lambda, double w) { return w * std::sinh(lambda * w); }

Complex basis_sinhc_dlambda(Complex lambda, double w) {
  if (std::abs(lambda * w) < 0.5) return sinhc_dlambda_series(lambda, w);
  return (w * std::cosh(lambda * w) - std::sinh(lambda * w) / lambda) / lambda;
}

Matrix2c condition_matrix(const ModelProblem& p, Complex lambda) {
  const double w0 = p.omega0;
  const Vector2c c0 = apply_conditions(p, basis_cosh(lambda, -w0), 1.0, basis_cosh(lambda, w0));
  const Vector2c c1 = apply_conditions(p, basis_sinhc(lambda, -w0), 0.0, basis_sinhc(lambda, w0));
  Matrix2c m;
  m.col(0) = c0;
  m.col(1) = c1;
  return m;
}

Complex char_det(const ModelProblem& p, Complex lambda) { return condition_matrix(p, lambda).determinant(); }

Complex char_det_derivative(const ModelProblem& p, Complex lambda) {
  const double w0 = p.omega0;
  const Matrix2c m = condition_matrix(p, lambda);
  Matrix2c dm;
  // The conditions are lambda-independent; only the basis values move.
  dm.col(0) = apply_conditions(p, basis_cosh_dlambda(lambda, -w0), 0.0, basis_cosh_dlambda(lambda, w0));
  dm.col(1) =
      apply_conditions(p, basis_sinhc_dlambda(lambda, -w0), 0.0, basis_sinhc_dlambda(lambda, w0));
  return dm(0, 0) * m(1, 1) + m(0, 0) * dm(1, 1) - dm(0, 1) * m(1, 0) - m(0, 1) * dm(1, 0);
}

// ---------------------------------------------------------------------------
// Argument principle

namespace {

// Accumulated change of arg Delta along the straight path a -> b. A segment
// is accepted when the phase step is small and the logarithmic derivative
// bounds the phase variation along it, so zeros close to the path are
// resolved by bisection. Returns false when a zero sits on the path.
bool phase_change(const ModelProblem& p, Complex a, Complex b, Complex fa, Complex fb,
                  double scale, int depth, double& total) {
  if (fa == 0.0 || fb == 0.0) return false;
  const double step = std::arg(fb / fa);
  const double len = std::abs(b - a);
  const double variation =
      len * std::max(std::abs(char_det_derivative(p, a) / fa), std::abs(char_det_derivative(p, b) / fb));
  if (std::abs(step) <= kPi / 4.0 && variation <= 1.0) {
    total += step;
    return true;
  }
  if (depth > 60 || len < 1e-13 * scale) return false;
  const Complex m = 0.5 * (a + b);
  const Complex fm = char_det(p, m);
  return phase_change(p, a, m, fa, fm, scale, depth + 1, total) &&
         phase_change(p, m, b, fm, fb, scale, depth + 1, total);
}

std::optional<int> winding(const ModelProblem& p, const std::vector<Complex>& path, double scale) {
  std::vector<Complex> values(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    values[k] = char_det(p, path[k]);
    if (values[k] == 0.0) return std::nullopt;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const std::size_t n = (k + 1) % path.size();
    if (!phase_change(p, path[k], path[n], values[k], values[n], scale, 0, total))
      return std::nullopt;
  }
  const double turns = total / (2.0 * kPi);
  const double rounded = std::round(turns);
  if (std::abs(turns - rounded) > 1e-3) return std::nullopt;
  return static_cast<int>(rounded);
}

std::vector<Complex> rectangle_path(Complex ll, Complex ur, int samples) {
  const int per_edge = std::max(4, samples / 4);
  const Complex lr(ur.real(), ll.imag());
  const Complex ul(ll.real(), ur.imag());
  const Complex corners[5] = {ll, lr, ur, ul, ll};
  std::vector<Complex> path;
  path.reserve(4 * per_edge);
  for (int e = 0; e < 4; ++e)
    for (int k = 0; k < per_edge; ++k)
      path.push_back(corners[e] + (corners[e + 1] - corners[e]) * (static_cast<double>(k) / per_edge));
  return path;
}

std::vector<Complex> circle_path(Complex center, double radius, int samples) {
  std::vector<Complex> path(samples);
  for (int k = 0; k < samples; ++k)
    path[k] = center + radius * std::exp(kI * (2.0 * kPi * k / samples));
  return path;
}

struct Cell {
  Complex ll, ur;
  int count;
  int depth;
};

class RootFinder {
 public:
  RootFinder(const ModelProblem& p, const RootSearchOptions& o) : p_(p), o_(o) {}

  // False when every candidate split puts a zero on a child contour.
  bool search(Cell cell, std::vector<EigenvalueHit>& out) {
    if (cell.count == 0) return true;
    const double size = std::max(cell.ur.real() - cell.ll.real(), cell.ur.imag() - cell.ll.imag());
    if (cell.count == 1) {
      if (auto z = newton(0.5 * (cell.ll + cell.ur), cell)) {
        out.push_back({*z, 1});
        return true;
      }
    } else if (size < o_.min_cell) {
      out.push_back({cluster_center(cell), cell.count});
      return true;
    }
    if (cell.depth >= o_.max_depth) {
      std::ostringstream msg;
      msg << "root refinement did not converge in cell [" << cell.ll << ", " << cell.ur << "]";
      fail(ErrorKind::Numerical, msg.str());
    }
    // Off-center splits avoid symmetric root positions on cell edges.
    for (double ratio : {0.5123, 0.4711, 0.5379, 0.4463}) {
      std::vector<Cell> children;
      if (!split(cell, ratio, children)) continue;
      for (const auto& c : children)
        if (!search(c, out)) return false;
      return true;
    }
    return false;
  }

 private:
  bool split(const Cell& cell, double ratio, std::vector<Cell>& children) {
    const double xm = cell.ll.real() + ratio * (cell.ur.real() - cell.ll.real());
    const double ym = cell.ll.imag() + ratio * (cell.ur.imag() - cell.ll.imag());
    const double xs[3] = {cell.ll.real(), xm, cell.ur.real()};
    const double ys[3] = {cell.ll.imag(), ym, cell.ur.imag()};
    int sum = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const Complex ll(xs[i], ys[j]), ur(xs[i + 1], ys[j + 1]);
        const auto n = argument_principle_count(p_, ll, ur, o_.boundary_samples);
        if (!n || *n < 0) return false;
        sum += *n;
        children.push_back({ll, ur, *n, cell.depth + 1});
      }
    return sum == cell.count;
  }

  std::optional<Complex> newton(Complex z, const Cell& cell) const {
    const double size = std::abs(cell.ur - cell.ll);
    for (int it = 0; it < 60; ++it) {
      const Complex f = char_det(p_, z);
      const Complex df = char_det_derivative(p_, z);
      if (df == 0.0) return std::nullopt;
      const Complex step = f / df;
      z -= step;
      if (std::abs(step) > 10.0 * size) return std::nullopt;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    const double slack = 1e-9 * std::max(1.0, size);
    if (z.real() < cell.ll.real() - slack || z.real() > cell.ur.real() + slack ||
        z.imag() < cell.ll.imag() - slack || z.imag() > cell.ur.imag() + slack)
      return std::nullopt;
    if (std::abs(char_det(p_, z)) > o_.det_tolerance) return std::nullopt;
    return z;
  }

  // Center of a zero cluster of total order m from the first moment
  // (1/(2 pi i m)) \oint z Delta'/Delta dz on an enclosing circle. The small
  // cell circle locates the cluster; a wider circle holding no other zero
  // then gives the center with far less cancellation in Delta.
  Complex cluster_center(const Cell& cell) const {
    const double radius = std::abs(cell.ur - cell.ll);
    const Complex rough = moment(0.5 * (cell.ll + cell.ur), radius, 256) / static_cast<double>(cell.count);
    for (double wide = 0.2; wide > 4.0 * radius; wide *= 0.5) {
      const auto n = winding(p_, circle_path(rough, wide, 512), wide);
      if (n && *n == cell.count) return moment(rough, wide, 512) / static_cast<double>(cell.count);
    }
    return rough;
  }

  Complex moment(Complex c, double radius, int n) const {
    Complex sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const Complex e = std::exp(kI * (2.0 * kPi * k / n));
      const Complex z = c + radius * e;
      sum += z * char_det_derivative(p_, z) / char_det(p_, z) * (radius * e);
    }
    return sum / static_cast<double>(n);
  }

  const ModelProblem& p_;
  const RootSearchOptions& o_;
};

}  // namespace

std::optional<int> argument_principle_count(const ModelProblem& p, Complex ll, Complex ur, int samples) {
  const double scale = std::abs(ur - ll);
  return winding(p, rectangle_path(ll, ur, samples), scale);
}

int zero_order(const ModelProblem& p, Complex lambda, double radius) {
  const auto n = winding(p, circle_path(lambda, radius, 256), radius);
  if (!n) fail(ErrorKind::Numerical, "zero-order circle meets another zero");
  return *n;
}

std::vector<EigenvalueHit> eigenvalues_in_strip(const ModelProblem& p, const Strip& strip,
                                                const RootSearchOptions& o) {
  p.validate();
  strip.validate();
  Strip window = strip;
  for (int attempt = 0; attempt <= o.max_window_retries; ++attempt) {
    const Complex ll(-window.real_bound, window.imag_min);
    const Complex ur(window.real_bound, window.imag_max);
    const auto total = argument_principle_count(p, ll, ur, o.boundary_samples);
    std::vector<EigenvalueHit> hits;
    bool ok = false;
    if (total && *total >= 0) {
      RootFinder finder(p, o);
      ok = finder.search({ll, ur, *total, 0}, hits);
    }
    if (ok) {
      std::sort(hits.begin(), hits.end(), [](const EigenvalueHit& a, const EigenvalueHit& b) {
        if (a.lambda.imag() != b.lambda.imag()) return a.lambda.imag() < b.lambda.imag();
        return a.lambda.real() < b.lambda.real();
      });
      return hits;
    }
    window.imag_min -= o.window_shift;
    window.imag_max += o.window_shift;
    window.real_bound += o.window_shift;
  }
  std::ostringstream msg;
  msg << "zero of the characteristic determinant on the window boundary; perturb the strip ["
      << strip.imag_min << ", " << strip.imag_max << "]";
  fail(ErrorKind::Numerical, msg.str());
}

// ---------------------------------------------------------------------------
// Eigenvectors and associate vectors

Complex Eigenpair::operator()(double w) const {
  return coeffs(0) * basis_cosh(lambda0, w) + coeffs(1) * basis_sinhc(lambda0, w);
}

Eigenpair eigenvector(const ModelProblem& p, Complex lambda0) {
  p.validate();
  const Matrix2c m = condition_matrix(p, lambda0);
  Eigen::JacobiSVD<Matrix2c> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(0) > 0.0 && sv(1) > 1e-8 * sv(0)) {
    std::ostringstream msg;
    msg << "lambda0 = " << lambda0 << " is not an eigenvalue: condition matrix is nonsingular";
    fail(ErrorKind::Config, msg.str());
  }
  Eigenpair pair;
  pair.problem = p;
  pair.lambda0 = lambda0;
  pair.coeffs = svd.matrixV().col(1);

  if (std::abs(pair.coeffs(0)) > 1e-10 * pair.coeffs.norm()) {
    pair.coeffs /= pair.coeffs(0);  // phi(0) = A
    pair.normalization = Eigenpair::Normalization::UnitAtZero;
  } else {
    Complex peak = 0.0;
    for (int k = 0; k <= 256; ++k) {
      const Complex v = pair(-p.omega0 + 2.0 * p.omega0 * k / 256.0);
      if (std::abs(v) > std::abs(peak)) peak = v;
    }
    pair.coeffs /= peak;
    pair.normalization = Eigenpair::Normalization::MaxNormOne;
  }
  pair.residual = (condition_matrix(p, lambda0) * pair.coeffs).cwiseAbs().maxCoeff();
  return pair;
}

Complex AssociateVector::operator()(Complex lambda0, double w) const {
  return particular(0) * basis_cosh_dlambda(lambda0, w) +
         particular(1) * basis_sinhc_dlambda(lambda0, w) + coeffs(0) * basis_cosh(lambda0, w) +
         coeffs(1) * basis_sinhc(lambda0, w);
}

AssociateResult associate_vector(const ModelProblem& p, const Eigenpair& pair) {
  const Complex l0 = pair.lambda0;
  const double w0 = p.omega0;

  // d/dlambda of (phi'' - lambda^2 phi) on the eigenvector basis solves the
  // forcing 2 lambda0 phi0; conditions are lambda-independent.
  AssociateVector phi1;
  phi1.particular = pair.coeffs;
  auto particular = [&](double w) {
    return pair.coeffs(0) * basis_cosh_dlambda(l0, w) + pair.coeffs(1) * basis_sinhc_dlambda(l0, w);
  };
  const Vector2c rhs = -apply_conditions(p, particular(-w0), particular(0.0), particular(w0));
  const Matrix2c m = condition_matrix(p, l0);

  Eigen::JacobiSVD<Matrix2c> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Vector2c x = Vector2c::Zero();
  for (int i = 0; i < 2; ++i)
    if (sv(i) > 1e-10 * sv(0))
      x += (svd.matrixU().col(i).adjoint() * rhs)(0) / sv(i) * svd.matrixV().col(i);

  AssociateResult result;
  const double rhs_norm = rhs.norm();
  result.consistency_residual = rhs_norm > 0.0 ? (m * x - rhs).norm() / rhs_norm : 0.0;
  if (result.consistency_residual > 1e-8) return result;

  phi1.coeffs = x;
  // Remove the eigenvector component in L2(-omega0, omega0).
  auto phi0 = [&](double w) { return pair(w); };
  auto rep = [&](double w) { return phi1(l0, w); };
  const Complex proj = l2_inner(w0, rep, phi0) / l2_inner(w0, phi0, phi0);
  phi1.coeffs -= proj * pair.coeffs;

  phi1.norm = std::sqrt(std::abs(l2_inner(w0, rep, rep)));
  const Vector2c cond = apply_conditions(p, phi1(l0, -w0), phi1(l0, 0.0), phi1(l0, w0));
  phi1.residual = cond.cwiseAbs().maxCoeff();
  result.phi1 = phi1;
  result.chain_length = 2;
  return result;
}

}  // namespace nlbvp
