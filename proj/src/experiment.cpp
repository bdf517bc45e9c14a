#include "nlbvp/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Core>

namespace nlbvp {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool is_zero(Complex t) { return t == Complex(0.0, 0.0); }

std::string describe(Complex t) {
  std::ostringstream os;
  os << "t=" << t.real();
  if (t.imag() != 0.0) os << (t.imag() < 0 ? "-" : "+") << std::abs(t.imag()) << "i";
  return os.str();
}

Json optional_number(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (!(omega0 > 0.0 && omega0 < kPi)) fail(ErrorKind::Config, "omega0 must lie in (0, pi)");
  if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorKind::Config, "scale must be positive");
  if (t_values.empty()) fail(ErrorKind::Config, "t list is empty");
  for (Complex t : t_values) {
    if (!std::isfinite(t.real()) || !std::isfinite(t.imag()))
      fail(ErrorKind::Config, "t list contains a non-finite value");
    if (std::abs(t) > 1.0) fail(ErrorKind::Config, "every t must satisfy |t| <= 1");
  }
  if (h_values.empty()) fail(ErrorKind::Config, "h list is empty");
  for (double h : h_values)
    if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::Config, "mesh sizes must be positive");
  if (!(beta >= 1.0)) fail(ErrorKind::Config, "grading exponent beta must be >= 1");
  if (!(resolved_eps() > 0.0)) fail(ErrorKind::Config, "eps must be positive");
  if (example == Example::Ex2) {
    if (!(resolved_plateau() >= resolved_eps()))
      fail(ErrorKind::Config, "ex2 needs a cutoff plateau >= eps");
    if (!(resolved_plateau() < resolved_delta()))
      fail(ErrorKind::Config, "ex2 needs cutoff plateau < delta");
  }
  if (example == Example::Ex3) {
    if (!(omega0 < kPi / 2.0)) fail(ErrorKind::Config, "ex3 needs omega0 < pi/2");
    if (!(contraction_ratio > 0.0 && contraction_ratio < 1.0))
      fail(ErrorKind::Config, "contraction ratio must lie in (0, 1)");
  }
}

ExperimentConfig ExperimentConfig::defaults(Example example) {
  ExperimentConfig c;
  c.example = example;
  if (example == Example::Ex3) c.t_values = {0.0, 0.2};
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json t = Json::array();
  for (Complex z : c.t_values) t.push_back(complex_to_json(z));
  Json j;
  j["version"] = kDocumentVersion;
  j["example"] = to_string(c.example);
  j["corners"] = {{"omega0", c.omega0}, {"eps", optional_number(c.eps)}};
  j["scale"] = c.scale;
  j["shape"] = to_string(c.shape);
  j["t"] = t;
  j["h"] = c.h_values;
  j["beta"] = c.beta;
  j["cutoff"] = {{"delta", optional_number(c.cutoff_delta)},
                 {"plateau", optional_number(c.cutoff_plateau)}};
  j["maps"] = {{"kind", "interior-contraction"}, {"params", {{"ratio", c.contraction_ratio}}}};
  j["lambda_shift"] = c.lambda_shift ? complex_to_json(*c.lambda_shift) : Json(nullptr);
  j["output"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
  auto opt = [](const Json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) fail(ErrorKind::Config, "expected a number or null in config");
    return v.get<double>();
  };
  try {
    ExperimentConfig c;
    if (j.contains("version") && j["version"].get<int>() != kDocumentVersion)
      fail(ErrorKind::Config, "unsupported config version");
    if (j.contains("example")) c.example = parse_example(j["example"].get<std::string>());
    if (c.example == Example::Ex3) c.t_values = {0.0, 0.2};
    if (j.contains("corners")) {
      const Json& k = j["corners"];
      if (k.contains("omega0")) c.omega0 = k["omega0"].get<double>();
      if (k.contains("eps")) c.eps = opt(k["eps"]);
    }
    if (j.contains("omega0")) c.omega0 = j["omega0"].get<double>();
    if (j.contains("scale")) c.scale = j["scale"].get<double>();
    if (j.contains("shape")) c.shape = parse_shape(j["shape"].get<std::string>());
    if (j.contains("t")) {
      c.t_values.clear();
      for (const auto& z : j["t"]) c.t_values.push_back(complex_from_json(z));
    }
    if (j.contains("h")) c.h_values = j["h"].get<std::vector<double>>();
    if (j.contains("beta")) c.beta = j["beta"].get<double>();
    if (j.contains("cutoff") && !j["cutoff"].is_null()) {
      const Json& k = j["cutoff"];
      if (k.contains("delta")) c.cutoff_delta = opt(k["delta"]);
      if (k.contains("plateau")) c.cutoff_plateau = opt(k["plateau"]);
    }
    if (j.contains("maps")) {
      const Json& m = j["maps"];
      if (m.contains("kind") && m["kind"].get<std::string>() != "interior-contraction")
        fail(ErrorKind::Config, "config maps.kind must be interior-contraction");
      if (m.contains("params") && m["params"].contains("ratio"))
        c.contraction_ratio = m["params"]["ratio"].get<double>();
    }
    if (j.contains("lambda_shift") && !j["lambda_shift"].is_null())
      c.lambda_shift = complex_from_json(j["lambda_shift"]);
    if (j.contains("output")) c.output_dir = j["output"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    return c;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  Json j = config_to_json(config);
  j.erase("output");
  return fnv1a_hex(j.dump());
}

DomainSpec build_domain(const ExperimentConfig& config) {
  return build_canonical_domain(config.omega0, config.scale, config.shape, config.resolved_eps());
}

// ---------------------------------------------------------------------------
// Spectral validation

std::vector<Complex> closed_form_eigenvalues(ModelKind kind, double omega0, double imag_bound) {
  const double step = kind == ModelKind::Nonlocal ? kPi / omega0 : kPi / (2.0 * omega0);
  const int kmax = static_cast<int>(std::floor(imag_bound / step + 1e-12));
  std::vector<Complex> out;
  for (int k = -kmax; k <= kmax; ++k) {
    if (kind == ModelKind::Dirichlet && k == 0) continue;
    out.emplace_back(0.0, k * step);
  }
  return out;
}

double set_deviation(const std::vector<EigenvalueHit>& found, const std::vector<Complex>& expected) {
  if (found.size() != expected.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (const auto& e : expected) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : found) best = std::min(best, std::abs(f.lambda - e));
    worst = std::max(worst, best);
  }
  return worst;
}

SpectralBlock validate_spectrum(ModelKind kind, double omega0, const std::vector<Complex>& t_values,
                                double imag_bound) {
  SpectralBlock block;
  block.kind = kind;
  block.omega0 = omega0;
  block.strip.imag_min = -imag_bound;
  block.strip.imag_max = imag_bound;
  block.strip.real_bound = default_real_bound(omega0, 1);
  block.expected = closed_form_eigenvalues(kind, omega0, imag_bound);
  const std::vector<Complex> ts = kind == ModelKind::Dirichlet ? std::vector<Complex>{0.0} : t_values;
  for (Complex t : ts) {
    ModelProblem problem;
    problem.omega0 = omega0;
    problem.t = t;
    problem.kind = kind;
    SpectrumEntry entry;
    entry.t = t;
    entry.eigenvalues = eigenvalues_in_strip(problem, block.strip);
    for (const auto& hit : entry.eigenvalues)
      entry.residuals.push_back(std::abs(char_det(problem, hit.lambda)));
    block.max_deviation = std::max(block.max_deviation, set_deviation(entry.eigenvalues, block.expected));
    block.entries.push_back(std::move(entry));
  }
  for (std::size_t i = 1; i < block.entries.size(); ++i) {
    const auto& a = block.entries.front().eigenvalues;
    const auto& b = block.entries[i].eigenvalues;
    if (a.size() != b.size()) {
      block.t_independent = false;
      continue;
    }
    for (std::size_t k = 0; k < a.size(); ++k)
      if (std::abs(a[k].lambda - b[k].lambda) > 1e-10) block.t_independent = false;
  }
  if (kind == ModelKind::Dirichlet) {
    ModelProblem problem;
    problem.omega0 = omega0;
    problem.kind = kind;
    Strip lower;
    lower.imag_min = -1.0;
    lower.imag_max = 0.0;
    lower.real_bound = block.strip.real_bound;
    const auto hits = eigenvalues_in_strip(problem, lower);
    bool empty = true;
    for (const auto& h : hits)
      if (h.lambda.imag() < 0.0) empty = false;
    block.lower_strip_empty = empty;
  }
  return block;
}

SpectralBlock validate_spectrum(const ExperimentConfig& config) {
  const ModelKind kind = config.example == Example::Ex3 ? ModelKind::Dirichlet : ModelKind::Nonlocal;
  return validate_spectrum(kind, config.omega0, config.t_values);
}

Json SpectralBlock::to_json() const {
  Json expected_j = Json::array();
  for (Complex z : expected) expected_j.push_back(complex_to_json(z));
  Json entries_j = Json::array();
  for (const auto& e : entries) {
    Json eig = Json::array();
    for (std::size_t k = 0; k < e.eigenvalues.size(); ++k)
      eig.push_back({{"lambda", complex_to_json(e.eigenvalues[k].lambda)},
                     {"det_zero_order", e.eigenvalues[k].det_zero_order},
                     {"residual", e.residuals[k]}});
    entries_j.push_back({{"t", complex_to_json(e.t)}, {"eigenvalues", eig}});
  }
  Json j;
  j["kind"] = to_string(kind);
  j["omega0"] = omega0;
  j["window"] = {{"imag_min", strip.imag_min},
                 {"imag_max", strip.imag_max},
                 {"real_bound", strip.real_bound}};
  j["expected"] = expected_j;
  j["entries"] = entries_j;
  j["max_deviation"] = finite_or_null(max_deviation);
  j["t_independent"] = t_independent;
  j["lower_strip_empty"] = lower_strip_empty ? Json(*lower_strip_empty) : Json(nullptr);
  return j;
}

std::string spectrum_csv(const SpectralBlock& block) {
  std::string out = "kind,omega0,t_re,t_im,lambda_re,lambda_im,det_zero_order,residual\n";
  for (const auto& e : block.entries)
    for (std::size_t k = 0; k < e.eigenvalues.size(); ++k)
      out += to_string(block.kind) + "," + fmt(block.omega0) + "," + fmt(e.t.real()) + "," +
             fmt(e.t.imag()) + "," + fmt(e.eigenvalues[k].lambda.real()) + "," +
             fmt(e.eigenvalues[k].lambda.imag()) + "," +
             std::to_string(e.eigenvalues[k].det_zero_order) + "," + fmt(e.residuals[k]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Constraint row comparison

RowComparison compare_constraint_rows(const DiscreteNonlocalOperator& a,
                                      const DiscreteNonlocalOperator& b, const Mesh& mesh,
                                      const DomainSpec& domain, double radius) {
  using RowMajor = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
  const RowMajor ca = a.C, cb = b.C;
  std::map<std::pair<int, int>, Eigen::Index> index_b;
  for (std::size_t i = 0; i < b.constraint_vertices.size(); ++i)
    index_b[{b.constraint_vertices[i], static_cast<int>(b.constraint_curves[i])}] =
        static_cast<Eigen::Index>(i);
  auto same = [](Complex x, Complex y) {
    return std::bit_cast<std::uint64_t>(x.real()) == std::bit_cast<std::uint64_t>(y.real()) &&
           std::bit_cast<std::uint64_t>(x.imag()) == std::bit_cast<std::uint64_t>(y.imag());
  };
  RowComparison result;
  for (std::size_t i = 0; i < a.constraint_vertices.size(); ++i) {
    const int v = a.constraint_vertices[i];
    if (rho(domain, mesh.vertices[v]) > radius) continue;
    ++result.compared;
    const auto it = index_b.find({v, static_cast<int>(a.constraint_curves[i])});
    if (it == index_b.end()) {
      ++result.mismatched;
      continue;
    }
    std::vector<std::pair<Eigen::Index, Complex>> ra, rb;
    for (RowMajor::InnerIterator e(ca, static_cast<Eigen::Index>(i)); e; ++e)
      ra.emplace_back(e.col(), e.value());
    for (RowMajor::InnerIterator e(cb, it->second); e; ++e) rb.emplace_back(e.col(), e.value());
    bool equal = ra.size() == rb.size() &&
                 same(a.constraint_rhs(static_cast<Eigen::Index>(i)), b.constraint_rhs(it->second));
    for (std::size_t k = 0; equal && k < ra.size(); ++k)
      equal = ra[k].first == rb[k].first && same(ra[k].second, rb[k].second);
    if (!equal) ++result.mismatched;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reports

bool ExperimentReport::all_passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed; });
}

bool ExperimentReport::any_aborted() const {
  return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.sweep.aborted; });
}

namespace {

Json fit_to_json(const SingularFit& f) {
  return {{"corner", f.corner},
          {"c", complex_to_json(f.c)},
          {"d", complex_to_json(f.d)},
          {"residual", f.residual},
          {"r_min", f.r_min},
          {"r_max", f.r_max},
          {"condition", f.condition},
          {"c_relative", f.c_relative},
          {"d_relative", f.d_relative}};
}

Json obstruction_to_json(const ObstructionReport& r) {
  Json rows = Json::array();
  for (const auto& m : r.rows)
    rows.push_back({{"h", m.h},
                    {"n_unknowns", m.n_unknowns},
                    {"u_at_Omega_g1", m.u_exact_at_image},
                    {"residual", m.residual},
                    {"u_h_at_Omega_g1", complex_to_json(m.u_h_at_image)},
                    {"indicator", m.indicator}});
  return {{"t", complex_to_json(r.t)},
          {"shift", complex_to_json(r.shift)},
          {"threshold", r.threshold},
          {"bump_plateau", r.bump_plateau},
          {"bump_support", r.bump_support},
          {"obstructed", r.obstructed()},
          {"rows", rows}};
}

}  // namespace

Json ExperimentReport::to_json() const {
  Json crit = Json::array();
  for (const auto& c : criteria)
    crit.push_back({{"id", c.id}, {"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  Json rows_j = Json::array();
  for (const auto& r : rows) {
    const SweepRow& s = r.sweep;
    rows_j.push_back(
        {{"example", to_string(s.example)},
         {"t", complex_to_json(s.t)},
         {"h", s.h},
         {"n_unknowns", s.n_unknowns},
         {"ker_dim", s.ker_dim},
         {"kernel_cosine", s.kernel_cosine},
         {"sigma_min", s.sigma_min},
         {"residual", s.residual},
         {"u_at_Omega_g1", s.u_at_image ? complex_to_json(*s.u_at_image) : Json(nullptr)},
         {"kernel_gap_fallback", s.kernel_gap_fallback},
         {"aborted", s.aborted},
         {"message", s.message},
         {"fit", r.fit ? fit_to_json(*r.fit) : Json(nullptr)},
         {"classification", r.classification}});
  }
  Json j;
  j["config_hash"] = config_hash;
  j["config"] = config_to_json(config);
  j["criteria"] = crit;
  j["rows"] = rows_j;
  j["spectral"] = spectral.to_json();
  j["environment"] = environment_json();
  if (obstruction) j["obstruction"] = obstruction_to_json(*obstruction);
  if (obstruction_control) j["obstruction_control"] = obstruction_to_json(*obstruction_control);
  if (!convergence_h.empty())
    j["convergence"] = {{"h", convergence_h},
                        {"h1_error", convergence_error},
                        {"rate", convergence_rate ? Json(*convergence_rate) : Json(nullptr)}};
  return j;
}

std::string sweep_csv(const std::vector<ReportRow>& rows) {
  std::string out =
      "example,t_re,t_im,h,n_unknowns,ker_dim,sigma_min,residual,u_at_Omega_g1,"
      "c_re,c_im,d_re,d_im,fit_residual,classification\n";
  for (const auto& r : rows) {
    const SweepRow& s = r.sweep;
    out += to_string(s.example) + "," + fmt(s.t.real()) + "," + fmt(s.t.imag()) + "," +
           fmt(s.h) + "," + std::to_string(s.n_unknowns) + ",";
    if (s.aborted) {
      out += ",,,,,,,,,aborted\n";
      continue;
    }
    out += std::to_string(s.ker_dim) + "," + fmt(s.sigma_min) + "," + fmt(s.residual) + ",";
    out += s.u_at_image ? fmt(s.u_at_image->real()) : "";
    out += ",";
    if (r.fit)
      out += fmt(r.fit->c.real()) + "," + fmt(r.fit->c.imag()) + "," + fmt(r.fit->d.real()) + "," +
             fmt(r.fit->d.imag()) + "," + fmt(r.fit->residual) + ",";
    else
      out += ",,,,,";
    out += r.classification + "\n";
  }
  return out;
}

Json environment_json() {
  Json tol = {{"spectral_newton", 1e-12},
              {"spectral_match", 1e-10},
              {"kernel_gap_ratio", 100.0},
              {"kernel_fallback_tau", 1e-8},
              {"dense_solve_limit", 2500},
              {"dense_kernel_limit", static_cast<long>(kDenseKernelLimit)},
              {"fit_grid", kFitGrid},
              {"fit_condition_limit", kFitConditionLimit},
              {"obstruction_threshold", 0.1},
              {"mesh_min_angle_deg", MeshOptions{}.min_angle_deg}};
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
  std::ostringstream js;
  js << NLOHMANN_JSON_VERSION_MAJOR << "." << NLOHMANN_JSON_VERSION_MINOR << "."
     << NLOHMANN_JSON_VERSION_PATCH;
  Json versions = {{"nlbvp", "0.1.0"},
                   {"document", kDocumentVersion},
                   {"eigen", eigen.str()},
                   {"nlohmann_json", js.str()},
#if defined(__VERSION__)
                   {"compiler", __VERSION__}
#else
                   {"compiler", "unknown"}
#endif
  };
  return {{"tolerances", tol}, {"versions", versions}};
}

// ---------------------------------------------------------------------------
// Criteria evaluated inside an experiment

namespace {

CriterionResult criterion_spectral(const SpectralBlock& block) {
  CriterionResult c{1, "spectral exactness", false, ""};
  c.passed = std::isfinite(block.max_deviation) && block.max_deviation <= 1e-10;
  std::ostringstream os;
  os << "omega0=" << block.omega0 << " max deviation " << block.max_deviation << " over "
     << block.entries.size() << " t values";
  c.detail = os.str();
  return c;
}

CriterionResult criterion_t_independence(const SpectralBlock& block) {
  CriterionResult c{2, "t-independence", block.t_independent, ""};
  c.detail = block.t_independent ? "eigenvalue sets identical across the t list"
                                 : "eigenvalue sets differ across the t list";
  return c;
}

CriterionResult criterion_dirichlet(const SpectralBlock& block) {
  CriterionResult c{3, "Dirichlet spectrum", false, ""};
  const bool empty = block.lower_strip_empty.value_or(false);
  c.passed = std::isfinite(block.max_deviation) && block.max_deviation <= 1e-10 && empty;
  std::ostringstream os;
  os << "max deviation " << block.max_deviation << ", strip -1 <= Im < 0 "
     << (empty ? "empty" : "not empty");
  c.detail = os.str();
  return c;
}

CriterionResult criterion_eigenvector(double omega0, const std::vector<Complex>& ts) {
  CriterionResult c{4, "eigenvector formula", true, ""};
  double worst = 0.0;
  for (Complex t : ts) {
    ModelProblem problem;
    problem.omega0 = omega0;
    problem.t = t;
    const Eigenpair pair = eigenvector(problem, 0.0);
    for (int k = 0; k <= 40; ++k) {
      const double w = -omega0 + 2.0 * omega0 * k / 40.0;
      worst = std::max(worst, std::abs(pair(w) - (1.0 - t / omega0 * w)));
    }
  }
  c.passed = worst <= 1e-10;
  c.detail = "max deviation " + fmt(worst) + " over " + std::to_string(ts.size()) + " t values";
  return c;
}

CriterionResult criterion_associate(double omega0, const std::vector<Complex>& ts) {
  CriterionResult c{5, "associate vector", true, ""};
  double worst = 0.0;
  for (Complex t : ts) {
    ModelProblem problem;
    problem.omega0 = omega0;
    problem.t = t;
    const Eigenpair pair = eigenvector(problem, 0.0);
    const AssociateResult res = associate_vector(problem, pair);
    if (!res.phi1) {
      c.passed = false;
      c.detail = "no associate vector at " + describe(t);
      return c;
    }
    worst = std::max(worst, res.phi1->norm);
  }
  c.passed = worst <= 1e-10;
  c.detail = "max associate norm " + fmt(worst);
  return c;
}

CriterionResult criterion_kernel_jump(const std::vector<ReportRow>& rows) {
  CriterionResult c{6, "kernel jump ex1", true, ""};
  std::ostringstream os;
  for (const auto& r : rows) {
    const SweepRow& s = r.sweep;
    const bool ok = !s.aborted && (is_zero(s.t) ? s.ker_dim == 1 && s.kernel_cosine >= 0.999
                                                : s.ker_dim == 0);
    if (!ok) {
      c.passed = false;
      os << "h=" << s.h << " " << describe(s.t) << ": ker_dim " << s.ker_dim << " cosine "
         << s.kernel_cosine << (s.aborted ? " (aborted)" : "") << "; ";
    }
  }
  c.detail = c.passed ? "kernel column matches at every h" : os.str();
  return c;
}

CriterionResult criterion_cutoff(const std::vector<ReportRow>& ex2, const std::vector<SweepRow>& ex1,
                                 const RowComparison& rows) {
  CriterionResult c{7, "cutoff equivalence ex2", true, ""};
  std::ostringstream os;
  bool column_equal = ex2.size() == ex1.size();
  for (std::size_t i = 0; i < std::min(ex2.size(), ex1.size()); ++i) {
    if (ex2[i].sweep.aborted || ex1[i].aborted || ex2[i].sweep.ker_dim != ex1[i].ker_dim) {
      column_equal = false;
      os << "h=" << ex1[i].h << " " << describe(ex1[i].t) << ": ex1 ker_dim " << ex1[i].ker_dim
         << " vs ex2 " << ex2[i].sweep.ker_dim << "; ";
    }
  }
  c.passed = column_equal && rows.mismatched == 0 && rows.compared > 0;
  os << rows.compared << " constraint rows compared within the plateau, " << rows.mismatched
     << " differ";
  c.detail = os.str();
  return c;
}

CriterionResult criterion_isomorphism(const std::vector<ReportRow>& rows,
                                      const std::optional<double>& rate) {
  CriterionResult c{8, "isomorphism baseline ex3", true, ""};
  std::ostringstream os;
  for (const auto& r : rows)
    if (is_zero(r.sweep.t) && (r.sweep.aborted || r.sweep.ker_dim != 0)) {
      c.passed = false;
      os << "h=" << r.sweep.h << " t=0 ker_dim " << r.sweep.ker_dim << "; ";
    }
  if (!rate || *rate < 0.9) c.passed = false;
  os << "H1 rate " << (rate ? fmt(*rate) : std::string("n/a"));
  c.detail = os.str();
  return c;
}

CriterionResult criterion_obstruction(const std::optional<ObstructionReport>& obs,
                                      const std::optional<ObstructionReport>& control) {
  CriterionResult c{9, "obstruction phenomenon ex3", false, ""};
  if (!obs || !control) {
    c.detail = "needs a nonzero t and t=0 in the t list";
    return c;
  }
  bool exact = true;
  for (const auto& r : obs->rows) exact = exact && r.u_exact_at_image == 1.0;
  double control_max = 0.0;
  for (const auto& r : control->rows) control_max = std::max(control_max, r.indicator);
  const bool converges = control_max <= 1e-6;
  c.passed = exact && obs->obstructed() && converges;
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& r : obs->rows) lowest = std::min(lowest, r.indicator);
  std::ostringstream os;
  os << "u(Omega g1) " << (exact ? "= 1" : "!= 1") << "; min indicator at " << describe(obs->t)
     << " " << lowest << " (threshold " << obs->threshold << "); t=0 control max " << control_max;
  c.detail = os.str();
  return c;
}

// Synthetic u = c phi0 + d phi0 ln r near both corners.
VectorXc synthetic_field(const Mesh& mesh, const DomainSpec& domain, const Eigenpair& phi0,
                         Complex c, Complex d) {
  VectorXc u(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const Point& p = mesh.vertices[i];
    const int j = (p - domain.corners().g1).norm() <= (p - domain.corners().g2).norm() ? 0 : 1;
    const LocalPolar pol = domain.polar(j, p);
    if (pol.r <= 0.0) {
      u(static_cast<Eigen::Index>(i)) = d == Complex(0.0) ? c * phi0(0.0) : Complex(0.0);
      continue;
    }
    u(static_cast<Eigen::Index>(i)) = (c + d * std::log(pol.r)) * phi0(pol.omega);
  }
  return u;
}

}  // namespace

CriterionResult singular_fit_oracle(const Mesh& mesh, const DomainSpec& domain) {
  CriterionResult c{10, "singular-fit oracle", true, ""};
  std::ostringstream os;
  ModelProblem problem;
  problem.omega0 = domain.corners().omega0;
  problem.t = 0.3;
  const Eigenpair phi0 = eigenvector(problem, 0.0);
  const auto [r_min, r_max] = default_annulus(domain);
  try {
    const SingularFit fc = fit_singular_expansion(
        mesh, domain, synthetic_field(mesh, domain, phi0, 2.0, 0.0), 0, phi0, r_min, r_max);
    const SingularFit fd = fit_singular_expansion(
        mesh, domain, synthetic_field(mesh, domain, phi0, 0.0, 1.0), 0, phi0, r_min, r_max);
    const double ec = std::abs(fc.c - 2.0) / 2.0;
    const double ed = std::abs(fd.d - 1.0);
    if (ec > 0.01 || ed > 0.05) c.passed = false;
    os << "c error " << ec << ", d error " << ed;
  } catch (const Error& e) {
    c.passed = false;
    os << "synthetic fit failed: " << e.what();
  }
  try {
    const Complex t = 0.1;
    const CompatibleSolution exact = compatible_corner_solution(domain, t);
    const auto op = assemble_operator(mesh, example1_bc(domain), t);
    const SolveResult sol = solve(op, load_vector(mesh, exact.laplacian));
    const MembershipReport rep = classify_solution(mesh, domain, sol.u, t);
    os << "; compatible solve at t=0.1 classified " << rep.classification;
    if (rep.classification != "regular") c.passed = false;
  } catch (const Error& e) {
    c.passed = false;
    os << "; compatible solve failed: " << e.what();
  }
  c.detail = os.str();
  return c;
}

// ---------------------------------------------------------------------------
// run_experiment

namespace {

void fit_rows(std::vector<ReportRow>& rows, const std::vector<Mesh>& meshes,
              const DomainSpec& domain) {
  for (auto& r : rows) {
    if (r.sweep.aborted || r.sweep.solution.size() == 0) {
      r.classification = r.sweep.aborted ? "aborted" : "unresolved";
      continue;
    }
    const Mesh* mesh = nullptr;
    for (const auto& m : meshes)
      if (m.h == r.sweep.h) mesh = &m;
    try {
      const MembershipReport rep = classify_solution(*mesh, domain, r.sweep.solution, r.sweep.t);
      r.fit = rep.fits.front();
      r.classification = rep.classification;
    } catch (const Error& e) {
      r.classification = "unresolved";
      if (r.sweep.message.empty()) r.sweep.message = std::string("fit: ") + e.what();
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& cache_dir) {
  config.validate();
  ExperimentReport report;
  report.config = config;
  report.config_hash = config_hash(config);

  const DomainSpec domain = build_domain(config);
  MeshCache cache(cache_dir);
  std::vector<Mesh> meshes;
  for (double h : config.h_values) meshes.push_back(cache.get_or_build(domain, h, config.beta));

  report.spectral = validate_spectrum(config);
  const Complex shift = config.lambda_shift.value_or(0.0);

  SweepProblem problem;
  problem.example = config.example;
  problem.domain = &domain;
  problem.contraction_ratio = config.contraction_ratio;
  if (config.example == Example::Ex2)
    problem.cutoff =
        build_cutoff(domain.corners(), config.resolved_delta(), config.resolved_plateau());

  for (auto& row : index_proxy_sweep(problem, config.t_values, shift, meshes))
    report.rows.push_back(ReportRow{std::move(row), std::nullopt, ""});
  fit_rows(report.rows, meshes, domain);

  switch (config.example) {
    case Example::Ex1: {
      report.criteria.push_back(criterion_spectral(report.spectral));
      report.criteria.push_back(criterion_t_independence(report.spectral));
      report.criteria.push_back(criterion_eigenvector(config.omega0, config.t_values));
      report.criteria.push_back(criterion_associate(config.omega0, config.t_values));
      report.criteria.push_back(criterion_kernel_jump(report.rows));
      const double finest = *std::min_element(config.h_values.begin(), config.h_values.end());
      const Mesh& mesh = *std::find_if(meshes.begin(), meshes.end(),
                                       [&](const Mesh& m) { return m.h == finest; });
      report.criteria.push_back(singular_fit_oracle(mesh, domain));
      break;
    }
    case Example::Ex2: {
      report.criteria.push_back(criterion_spectral(report.spectral));
      report.criteria.push_back(criterion_t_independence(report.spectral));
      SweepProblem reference = problem;
      reference.example = Example::Ex1;
      reference.cutoff.reset();
      const auto ex1_rows = index_proxy_sweep(reference, config.t_values, shift, meshes);
      RowComparison cmp;
      const NonlocalBC bc1 = make_bc(reference), bc2 = make_bc(problem);
      for (const auto& mesh : meshes)
        for (Complex t : config.t_values) {
          try {
            const auto a = assemble_operator(mesh, bc1, t, shift);
            const auto b = assemble_operator(mesh, bc2, t, shift);
            const RowComparison part =
                compare_constraint_rows(a, b, mesh, domain, config.resolved_plateau());
            cmp.compared += part.compared;
            cmp.mismatched += part.mismatched;
          } catch (const Error&) {
            ++cmp.mismatched;
          }
        }
      report.criteria.push_back(criterion_cutoff(report.rows, ex1_rows, cmp));
      break;
    }
    case Example::Ex3: {
      report.criteria.push_back(criterion_dirichlet(report.spectral));
      // Manufactured convergence with the Dirichlet problem on three meshes.
      const double h0 = *std::max_element(config.h_values.begin(), config.h_values.end());
      const SmoothFunction exact = manufactured_solution(domain);
      const NonlocalBC dir = dirichlet_bc();
      try {
        for (int level = 0; level < 3; ++level) {
          const double h = h0 / std::pow(2.0, level);
          const Mesh mesh = cache.get_or_build(domain, h, config.beta);
          const auto op = assemble_operator(mesh, dir, 0.0);
          const VectorXc load =
              load_vector(mesh, [&](const Point& p) { return Complex(exact.laplacian(p)); });
          const SolveResult sol = solve(op, load);
          report.convergence_h.push_back(h);
          report.convergence_error.push_back(error_norms(mesh, sol.u, exact).h1_seminorm);
        }
        report.convergence_rate = convergence_rate(report.convergence_h, report.convergence_error);
      } catch (const Error&) {
        report.convergence_rate.reset();
      }
      report.criteria.push_back(criterion_isomorphism(report.rows, report.convergence_rate));
      std::optional<Complex> probe;
      bool has_zero = false;
      for (Complex t : config.t_values) {
        if (is_zero(t))
          has_zero = true;
        else if (!probe)
          probe = t;
      }
      try {
        if (probe)
          report.obstruction =
              obstruction_test(domain, config.contraction_ratio, *probe, meshes, shift);
        if (has_zero)
          report.obstruction_control =
              obstruction_test(domain, config.contraction_ratio, 0.0, meshes, shift);
      } catch (const Error&) {
      }
      report.criteria.push_back(
          criterion_obstruction(report.obstruction, report.obstruction_control));
      break;
    }
  }
  std::stable_sort(report.criteria.begin(), report.criteria.end(),
                   [](const auto& a, const auto& b) { return a.id < b.id; });
  return report;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir, bool svg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Config, "cannot create output directory " + dir.string());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) fail(ErrorKind::Config, "cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", report.to_json().dump(2) + "\n");
  write("sweep.csv", sweep_csv(report.rows));
  write("spectrum.csv", spectrum_csv(report.spectral));
  if (!svg) return;
  std::map<double, ChartSeries> ker, sig;
  for (const auto& r : report.rows) {
    if (r.sweep.aborted) continue;
    auto& k = ker[r.sweep.h];
    auto& s = sig[r.sweep.h];
    k.label = s.label = "h=" + fmt(r.sweep.h);
    k.x.push_back(r.sweep.t.real());
    k.y.push_back(r.sweep.ker_dim);
    s.x.push_back(r.sweep.t.real());
    s.y.push_back(r.sweep.sigma_min);
  }
  std::vector<ChartSeries> ks, ss;
  for (auto& [h, s] : ker) ks.push_back(s);
  for (auto& [h, s] : sig) ss.push_back(s);
  write("kernel_dim.svg", svg_line_chart("kernel dimension", "Re t", "ker_dim", ks));
  write("sigma_min.svg", svg_line_chart("smallest singular value", "Re t", "sigma_min", ss, true));
}

}  // namespace nlbvp
