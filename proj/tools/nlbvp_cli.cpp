// nlbvp: command-line front end for the nonlocal corner problems.
//
// Exit codes: 0 all criteria pass, 2 criterion failure, 3 configuration
// error, 4 numerical abort.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlbvp/experiment.hpp"

using namespace nlbvp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCriterion = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

// Accepts "0.1", "-0.2", "0.5i", "0.1+0.2i", "0.1-0.2i" and "re,im".
Complex parse_complex(const std::string& text) {
  static const std::regex pair(R"(^\s*([^,]+),([^,]+)\s*$)");
  static const std::regex imag_only(R"(^\s*([+-]?[0-9.eE+-]*)i\s*$)");
  static const std::regex full(R"(^\s*([+-]?[0-9.]+(?:[eE][+-]?[0-9]+)?)([+-][0-9.]*(?:[eE][+-]?[0-9]+)?)i\s*$)");
  std::smatch m;
  try {
    if (std::regex_match(text, m, pair)) return {std::stod(m[1]), std::stod(m[2])};
    if (std::regex_match(text, m, full)) {
      const std::string im = m[2];
      return {std::stod(m[1]), im == "+" ? 1.0 : im == "-" ? -1.0 : std::stod(im)};
    }
    if (std::regex_match(text, m, imag_only)) {
      const std::string im = m[1];
      return {0.0, im.empty() || im == "+" ? 1.0 : im == "-" ? -1.0 : std::stod(im)};
    }
    std::size_t pos = 0;
    const double re = std::stod(text, &pos);
    if (pos == text.size()) return {re, 0.0};
  } catch (const std::exception&) {
  }
  fail(ErrorKind::Config, "cannot parse complex value '" + text + "'");
}

struct Common {
  std::string config_path;
  std::string out_dir;
  std::string cache_dir;
  std::optional<std::uint64_t> seed;
  bool svg = false;
};

struct Overrides {
  std::string example;
  std::vector<std::string> t;
  std::vector<double> h;
};

ExperimentConfig resolve_config(const Common& common, const Overrides& ov) {
  ExperimentConfig config;
  if (!common.config_path.empty()) {
    config = load_config(common.config_path);
    if (!ov.example.empty()) config.example = parse_example(ov.example);
  } else {
    config = ExperimentConfig::defaults(ov.example.empty() ? Example::Ex1 : parse_example(ov.example));
  }
  if (!ov.t.empty()) {
    config.t_values.clear();
    for (const auto& s : ov.t) config.t_values.push_back(parse_complex(s));
  }
  if (!ov.h.empty()) config.h_values = ov.h;
  if (common.seed) config.seed = *common.seed;
  if (!common.out_dir.empty()) config.output_dir = common.out_dir;
  config.validate();
  return config;
}

void emit(const Common& common, const std::string& name, const std::string& text) {
  if (common.out_dir.empty()) {
    std::cout << text;
    return;
  }
  std::filesystem::create_directories(common.out_dir);
  const auto path = std::filesystem::path(common.out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Config, "cannot write " + path.string());
  out << text;
  std::cout << "wrote " << path.string() << "\n";
}

std::vector<Mesh> build_meshes(const ExperimentConfig& config, const DomainSpec& domain,
                               const Common& common) {
  MeshCache cache(common.cache_dir);
  std::vector<Mesh> meshes;
  for (double h : config.h_values) meshes.push_back(cache.get_or_build(domain, h, config.beta));
  return meshes;
}

SweepProblem sweep_problem(const ExperimentConfig& config, const DomainSpec& domain) {
  SweepProblem p;
  p.example = config.example;
  p.domain = &domain;
  p.contraction_ratio = config.contraction_ratio;
  if (config.example == Example::Ex2)
    p.cutoff = build_cutoff(domain.corners(), config.resolved_delta(), config.resolved_plateau());
  return p;
}

void print_criteria(const std::vector<CriterionResult>& criteria) {
  for (const auto& c : criteria)
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (c.passed ? "PASS" : "FAIL")
              << " - " << c.detail << "\n";
}

int run_spectrum(const Common& common, const Overrides& ov, const std::string& kind,
                 std::optional<double> omega0, double imag_bound) {
  SpectralBlock block;
  if (!common.config_path.empty() || !ov.example.empty()) {
    ExperimentConfig config = resolve_config(common, ov);
    if (omega0) config.omega0 = *omega0;
    const ModelKind k = kind.empty() ? (config.example == Example::Ex3 ? ModelKind::Dirichlet
                                                                       : ModelKind::Nonlocal)
                                     : parse_model_kind(kind);
    block = validate_spectrum(k, config.omega0, config.t_values, imag_bound);
  } else {
    std::vector<Complex> ts;
    for (const auto& s : ov.t) ts.push_back(parse_complex(s));
    if (ts.empty()) ts = {0.0};
    block = validate_spectrum(kind.empty() ? ModelKind::Nonlocal : parse_model_kind(kind),
                              omega0.value_or(kPi / 3.0), ts, imag_bound);
  }
  emit(common, "spectrum.csv", spectrum_csv(block));
  std::cerr << "max deviation from the closed form: " << block.max_deviation << "\n";
  return std::isfinite(block.max_deviation) && block.max_deviation <= 1e-10 ? kExitOk
                                                                            : kExitCriterion;
}

int run_mesh(const Common& common, const Overrides& ov) {
  const ExperimentConfig config = resolve_config(common, ov);
  const DomainSpec domain = build_domain(config);
  const auto meshes = build_meshes(config, domain, common);
  Json summary = Json::array();
  for (const auto& m : meshes) {
    summary.push_back({{"id", m.id()},
                       {"h", m.h},
                       {"beta", m.beta},
                       {"vertices", m.num_vertices()},
                       {"triangles", m.num_triangles()},
                       {"min_angle_deg", m.min_angle_deg()},
                       {"first_ring_diameter_g1", m.first_ring_diameter(0)}});
    if (!common.out_dir.empty()) emit(common, "mesh-" + m.id() + ".json", mesh_to_json(m).dump() + "\n");
  }
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int run_solve(const Common& common, const Overrides& ov) {
  const ExperimentConfig config = resolve_config(common, ov);
  const DomainSpec domain = build_domain(config);
  const auto meshes = build_meshes(config, domain, common);
  const SweepProblem problem = sweep_problem(config, domain);
  std::vector<ReportRow> rows;
  for (auto& s : index_proxy_sweep(problem, config.t_values, config.lambda_shift.value_or(0.0), meshes)) {
    ReportRow r{std::move(s), std::nullopt, "unresolved"};
    if (r.sweep.aborted) r.classification = "aborted";
    rows.push_back(std::move(r));
  }
  for (auto& r : rows) {
    if (r.sweep.aborted) continue;
    for (const auto& m : meshes) {
      if (m.h != r.sweep.h) continue;
      try {
        const MembershipReport rep = classify_solution(m, domain, r.sweep.solution, r.sweep.t);
        r.fit = rep.fits.front();
        r.classification = rep.classification;
      } catch (const Error& e) {
        std::cerr << "fit at h=" << r.sweep.h << ": " << e.what() << "\n";
      }
    }
  }
  emit(common, "sweep.csv", sweep_csv(rows));
  for (const auto& r : rows)
    if (r.sweep.aborted) {
      std::cerr << "aborted row: " << r.sweep.message << "\n";
      return kExitNumerical;
    }
  return kExitOk;
}

int run_kernel(const Common& common, const Overrides& ov, double tau) {
  const ExperimentConfig config = resolve_config(common, ov);
  const DomainSpec domain = build_domain(config);
  const auto meshes = build_meshes(config, domain, common);
  const NonlocalBC bc = make_bc(sweep_problem(config, domain));
  Json out = Json::array();
  for (const auto& mesh : meshes)
    for (Complex t : config.t_values) {
      const auto op = assemble_operator(mesh, bc, t, config.lambda_shift.value_or(0.0));
      const KernelRule rule = tau > 0.0 ? KernelRule::fixed(tau) : KernelRule::gap();
      const KernelResult ker = numerical_kernel(op, rule);
      out.push_back({{"example", to_string(config.example)},
                     {"t", complex_to_json(t)},
                     {"h", mesh.h},
                     {"n_unknowns", op.cols()},
                     {"ker_dim", ker.dimension},
                     {"kernel_cosine",
                      ker.dimension > 0 ? cosine_with_constants(ker.basis.col(0)) : 0.0},
                     {"sigma_min", ker.sigma_min},
                     {"sigma_max", ker.sigma_max},
                     {"iterative", ker.iterative}});
    }
  emit(common, "kernel.json", out.dump(2) + "\n");
  return kExitOk;
}

int run_fit(const Common& common, const Overrides& ov) {
  const ExperimentConfig config = resolve_config(common, ov);
  const DomainSpec domain = build_domain(config);
  const auto meshes = build_meshes(config, domain, common);
  const auto rows = index_proxy_sweep(sweep_problem(config, domain), config.t_values,
                                      config.lambda_shift.value_or(0.0), meshes);
  Json out = Json::array();
  for (const auto& row : rows) {
    if (row.aborted) fail(ErrorKind::Numerical, row.message);
    const Mesh* mesh = nullptr;
    for (const auto& m : meshes)
      if (m.h == row.h) mesh = &m;
    const MembershipReport rep = classify_solution(*mesh, domain, row.solution, row.t);
    Json fits = Json::array();
    for (const auto& f : rep.fits)
      fits.push_back({{"corner", f.corner},
                      {"c", complex_to_json(f.c)},
                      {"d", complex_to_json(f.d)},
                      {"residual", f.residual},
                      {"condition", f.condition},
                      {"c_relative", f.c_relative},
                      {"d_relative", f.d_relative},
                      {"significance", significance_threshold(f)}});
    out.push_back({{"t", complex_to_json(row.t)},
                   {"h", row.h},
                   {"classification", rep.classification},
                   {"fits", fits}});
  }
  emit(common, "fit.json", out.dump(2) + "\n");
  return kExitOk;
}

int run_experiment_cmd(const Common& common, const Overrides& ov) {
  const ExperimentConfig config = resolve_config(common, ov);
  const ExperimentReport report = run_experiment(config, common.cache_dir);
  write_report(report, config.output_dir, common.svg);
  print_criteria(report.criteria);
  std::cout << "report written to " << config.output_dir << "\n";
  if (report.any_aborted()) return kExitNumerical;
  return report.all_passed() ? kExitOk : kExitCriterion;
}

int run_report(const Common& common) {
  const std::filesystem::path dir = common.out_dir.empty() ? "out" : common.out_dir;
  std::ifstream in(dir / "report.json");
  if (!in) fail(ErrorKind::Config, "no report.json in " + dir.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, std::string("report.json is not valid JSON: ") + e.what());
  }
  bool ok = true, aborted = false;
  std::cout << "config_hash " << j.value("config_hash", "") << "\n";
  for (const auto& c : j.at("criteria")) {
    std::cout << "criterion " << c.at("id").get<int>() << " [" << c.at("name").get<std::string>()
              << "]: " << (c.at("passed").get<bool>() ? "PASS" : "FAIL") << " - "
              << c.at("detail").get<std::string>() << "\n";
    ok = ok && c.at("passed").get<bool>();
  }
  for (const auto& r : j.at("rows")) aborted = aborted || r.at("aborted").get<bool>();
  if (aborted) return kExitNumerical;
  return ok ? kExitOk : kExitCriterion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal elliptic problems in corner domains"};
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config_path, "experiment config (JSON)");
  app.add_option("--out", common.out_dir, "output directory");
  app.add_option("--cache", common.cache_dir, "mesh cache directory");
  app.add_option("--seed", common.seed, "seed for randomized tests");
  app.add_flag("--svg", common.svg, "write SVG charts");

  Overrides ov;
  auto add_overrides = [&](CLI::App* sub, bool with_example) {
    if (with_example) sub->add_option("--example", ov.example, "ex1, ex2 or ex3");
    sub->add_option("--t", ov.t, "parameter values, e.g. 0.1, 0.5i, 0.1+0.2i");
    sub->add_option("--h", ov.h, "mesh sizes");
  };

  std::string kind;
  std::optional<double> omega0;
  double imag_bound = 3.5;
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of the model problem (CSV)");
  spectrum->add_option("--kind", kind, "nonlocal or dirichlet");
  spectrum->add_option("--omega0", omega0, "corner half-angle");
  spectrum->add_option("--imag-bound", imag_bound, "window |Im lambda| <= bound");
  add_overrides(spectrum, true);

  auto* mesh = app.add_subcommand("mesh", "graded meshes for the configured domain");
  add_overrides(mesh, true);
  auto* solve_cmd = app.add_subcommand("solve", "solve with the sweep load (CSV)");
  add_overrides(solve_cmd, true);
  double tau = 0.0;
  auto* kernel = app.add_subcommand("kernel", "numerical kernel per (t, h)");
  kernel->add_option("--tau", tau, "fixed relative threshold instead of the gap rule");
  add_overrides(kernel, true);
  auto* fit = app.add_subcommand("fit-singular", "corner expansion fit of the sweep solution");
  add_overrides(fit, true);
  auto* experiment = app.add_subcommand("experiment", "run ex1, ex2 or ex3");
  experiment->add_option("example", ov.example, "ex1, ex2 or ex3")->required();
  add_overrides(experiment, false);
  auto* report = app.add_subcommand("report", "summarize report.json in --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*spectrum) return run_spectrum(common, ov, kind, omega0, imag_bound);
    if (*mesh) return run_mesh(common, ov);
    if (*solve_cmd) return run_solve(common, ov);
    if (*kernel) return run_kernel(common, ov, tau);
    if (*fit) return run_fit(common, ov);
    if (*experiment) return run_experiment_cmd(common, ov);
    if (*report) return run_report(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Numerical ? kExitNumerical : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
