#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "nlbvp/experiment.hpp"

using namespace nlbvp;

namespace {

ExperimentConfig sample_config() {
  ExperimentConfig c = ExperimentConfig::defaults(Example::Ex2);
  c.omega0 = 1.1;
  c.t_values = {Complex(-0.2, 0.0), Complex(0.1, 0.3), Complex(0.0, 0.0)};
  c.h_values = {0.1, 0.05};
  c.eps = 0.14;
  c.cutoff_delta = 0.31;
  c.cutoff_plateau = 0.16;
  c.lambda_shift = Complex(1.0, -0.5);
  c.contraction_ratio = 0.45;
  c.shape = DomainShape::LensSpline;
  c.seed = 42;
  c.output_dir = "runs/x";
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config round trip") {
  for (const ExperimentConfig& c :
       {sample_config(), ExperimentConfig::defaults(Example::Ex1), ExperimentConfig::defaults(Example::Ex3)}) {
    const Json first = config_to_json(c);
    const Json second = config_to_json(config_from_json(first));
    CHECK(first.dump() == second.dump());
    const Json third = config_to_json(config_from_json(Json::parse(second.dump(2))));
    CHECK(third.dump() == first.dump());
  }
}

TEST_CASE("config file loading and errors") {
  const auto dir = std::filesystem::temp_directory_path() / "nlbvp_test_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << config_to_json(sample_config()).dump(2);
    std::ofstream(dir / "broken.json") << "{ \"example\": ";
  }
  CHECK(config_to_json(load_config(dir / "ok.json")).dump() == config_to_json(sample_config()).dump());
  CHECK_THROWS_AS(load_config(dir / "broken.json"), Error);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"example": "ex9"})")), Error);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"h": "fine"})")), Error);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"version": 7})")), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config defaults and validation") {
  const ExperimentConfig d1 = ExperimentConfig::defaults(Example::Ex1);
  CHECK(d1.omega0 == doctest::Approx(kPi / 3));
  CHECK(d1.resolved_eps() == doctest::Approx(0.15));
  CHECK(d1.h_values == std::vector<double>{0.1, 0.05});
  CHECK(d1.beta == 2.0);
  CHECK(d1.t_values.size() == 5);
  CHECK(ExperimentConfig::defaults(Example::Ex3).t_values == std::vector<Complex>{0.0, 0.2});
  CHECK_NOTHROW(d1.validate());

  ExperimentConfig c = ExperimentConfig::defaults(Example::Ex3);
  c.omega0 = 2.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = d1;
  c.t_values = {1.5};
  CHECK_THROWS_AS(c.validate(), Error);
  c = ExperimentConfig::defaults(Example::Ex2);
  c.cutoff_plateau = 0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = d1;
  c.beta = 0.5;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("config hash ignores the output directory") {
  ExperimentConfig a = sample_config(), b = sample_config();
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 43;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("closed-form eigenvalue grids") {
  const auto nl = closed_form_eigenvalues(ModelKind::Nonlocal, kPi / 3, 3.5);
  REQUIRE(nl.size() == 3);
  CHECK(std::abs(nl[0] - Complex(0, -3)) < 1e-14);
  CHECK(std::abs(nl[1]) == 0.0);
  CHECK(std::abs(nl[2] - Complex(0, 3)) < 1e-14);
  const auto di = closed_form_eigenvalues(ModelKind::Dirichlet, kPi / 3, 3.5);
  REQUIRE(di.size() == 4);  // +-1.5i, +-3i
  CHECK(std::abs(di[1] - Complex(0, -1.5)) < 1e-14);

  std::vector<EigenvalueHit> found{{Complex(0, -3)}, {Complex(0, 1e-12)}, {Complex(0, 3)}};
  CHECK(set_deviation(found, nl) <= 1e-12);
  found.pop_back();
  CHECK(std::isinf(set_deviation(found, nl)));
}

TEST_CASE("spectral validation blocks") {
  ExperimentConfig c = ExperimentConfig::defaults(Example::Ex1);
  c.t_values = {0.0, 0.3, Complex(0.0, 0.7)};
  const SpectralBlock b = validate_spectrum(c);
  CHECK(b.kind == ModelKind::Nonlocal);
  CHECK(b.max_deviation <= 1e-10);
  CHECK(b.t_independent);
  CHECK(b.entries.size() == 3);
  CHECK_FALSE(b.lower_strip_empty.has_value());

  const SpectralBlock d = validate_spectrum(ExperimentConfig::defaults(Example::Ex3));
  CHECK(d.kind == ModelKind::Dirichlet);
  CHECK(d.max_deviation <= 1e-10);
  REQUIRE(d.lower_strip_empty.has_value());
  CHECK(*d.lower_strip_empty);

  const std::string csv = spectrum_csv(b);
  CHECK(csv.rfind("kind,omega0,t_re,t_im,lambda_re,lambda_im,det_zero_order,residual\n", 0) == 0);
  const Json j = b.to_json();
  CHECK(j.contains("max_deviation"));
}

TEST_CASE("example-2 rows equal example-1 rows inside the plateau") {
  const ExperimentConfig c = ExperimentConfig::defaults(Example::Ex2);
  const DomainSpec d = build_domain(c);
  const Mesh m = generate_graded_mesh(d, 0.1, 2.0);
  const auto xi = build_cutoff(d.corners(), c.resolved_delta(), c.resolved_plateau());
  for (Complex t : {Complex(0.1), Complex(-0.2), Complex(0.0, 0.3)}) {
    const auto a = assemble_operator(m, example1_bc(d), t);
    const auto b = assemble_operator(m, example2_bc(d, xi), t);
    const RowComparison inner = compare_constraint_rows(a, b, m, d, c.resolved_plateau());
    CHECK(inner.compared > 0);
    CHECK(inner.mismatched == 0);
    // Beyond delta the rows differ.
    const RowComparison all = compare_constraint_rows(a, b, m, d, 10.0);
    CHECK(all.mismatched > 0);
  }
}

TEST_CASE("CSV and SVG output") {
  ReportRow row;
  row.sweep.example = Example::Ex1;
  row.sweep.t = Complex(0.1, -0.2);
  row.sweep.h = 0.05;
  row.sweep.n_unknowns = 123;
  row.sweep.ker_dim = 0;
  row.sweep.sigma_min = 1.0 / 3.0;
  row.sweep.residual = 1e-15;
  row.classification = "regular";
  const std::string csv = sweep_csv({row});
  CHECK(csv.rfind("example,t_re,t_im,h,n_unknowns,ker_dim,sigma_min,residual,u_at_Omega_g1,"
                  "c_re,c_im,d_re,d_im,fit_residual,classification\n", 0) == 0);
  CHECK(csv.find("ex1,0.10000000000000001,-0.20000000000000001,0.050000000000000003,123,0,") !=
        std::string::npos);
  CHECK(csv.find("regular") != std::string::npos);

  const std::string svg = svg_line_chart("k <dim>", "t", "dim",
                                         {{"h=0.1", {-0.1, 0.0, 0.1}, {0, 1, 0}}}, false);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("k &lt;dim&gt;") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  const std::string logsvg = svg_line_chart("s", "t", "s", {{"a", {0, 1}, {1e-16, 1.0}}}, true);
  CHECK(logsvg.find("1e") != std::string::npos);
}

TEST_CASE("small experiment is reproducible and writes its files") {
  ExperimentConfig c = ExperimentConfig::defaults(Example::Ex3);
  c.h_values = {0.1};
  const auto base = std::filesystem::temp_directory_path() / "nlbvp_test_experiment";
  std::filesystem::remove_all(base);
  const ExperimentReport first = run_experiment(c, base / "cache");
  write_report(first, base / "a", true);
  const ExperimentReport second = run_experiment(c, base / "cache");
  write_report(second, base / "b", true);
  for (const char* name : {"report.json", "sweep.csv", "spectrum.csv", "kernel_dim.svg", "sigma_min.svg"}) {
    CHECK(std::filesystem::exists(base / "a" / name));
    CHECK(read_file(base / "a" / name) == read_file(base / "b" / name));
  }
  const Json j = Json::parse(read_file(base / "a" / "report.json"));
  for (const char* key : {"config_hash", "criteria", "rows", "spectral", "environment"})
    CHECK(j.contains(key));
  CHECK(j["config_hash"] == config_hash(c));
  CHECK(first.rows.size() == 2);
  CHECK_FALSE(first.any_aborted());
  bool saw3 = false;
  for (const auto& cr : first.criteria) saw3 |= cr.id == 3 && cr.passed;
  CHECK(saw3);
  std::filesystem::remove_all(base);
}
