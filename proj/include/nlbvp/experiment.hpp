#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nlbvp/analysis.hpp"
#include "nlbvp/fem.hpp"
#include "nlbvp/serialization.hpp"
#include "nlbvp/spectral.hpp"

namespace nlbvp {

struct ExperimentConfig {
  Example example = Example::Ex1;
  double omega0 = kPi / 3.0;
  double scale = 1.0;
  std::optional<double> eps;  // default 0.15 scale
  DomainShape shape = DomainShape::PolylineKite;
  std::vector<Complex> t_values{-0.2, -0.1, 0.0, 0.1, 0.2};
  std::vector<double> h_values{0.1, 0.05};
  double beta = 2.0;
  std::optional<double> cutoff_delta;    // default 0.3 scale
  std::optional<double> cutoff_plateau;  // default eps
  double contraction_ratio = 0.5;
  std::optional<Complex> lambda_shift;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  double resolved_eps() const { return eps.value_or(0.15 * scale); }
  double resolved_delta() const { return cutoff_delta.value_or(0.3 * scale); }
  double resolved_plateau() const { return cutoff_plateau.value_or(resolved_eps()); }

  /// Throws a configuration error on violated invariants.
  void validate() const;

  /// Defaults for an example (ex3 uses t in {0, 0.2}).
  static ExperimentConfig defaults(Example example);
};

Json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// FNV-1a of the canonical JSON dump.
std::string config_hash(const ExperimentConfig& config);

DomainSpec build_domain(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Spectral validation

struct SpectrumEntry {
  Complex t = 0.0;
  std::vector<EigenvalueHit> eigenvalues;
  std::vector<double> residuals;  // |Delta(lambda)|
};

struct SpectralBlock {
  ModelKind kind = ModelKind::Nonlocal;
  double omega0 = 0.0;
  Strip strip;
  std::vector<Complex> expected;
  std::vector<SpectrumEntry> entries;
  double max_deviation = 0.0;  // infinity on a count mismatch
  bool t_independent = true;
  std::optional<bool> lower_strip_empty;  // Dirichlet: -1 <= Im < 0

  Json to_json() const;
};

/// Closed-form eigenvalues of the model problem with |Im| <= imag_bound.
std::vector<Complex> closed_form_eigenvalues(ModelKind kind, double omega0, double imag_bound);

/// Max distance between the found and expected sets; infinity when the
/// counts differ.
double set_deviation(const std::vector<EigenvalueHit>& found, const std::vector<Complex>& expected);

SpectralBlock validate_spectrum(ModelKind kind, double omega0, const std::vector<Complex>& t_values,
                                double imag_bound = 3.5);
SpectralBlock validate_spectrum(const ExperimentConfig& config);

/// CSV: kind, omega0, t_re, t_im, lambda_re, lambda_im, det_zero_order, residual.
std::string spectrum_csv(const SpectralBlock& block);

// ---------------------------------------------------------------------------
// Constraint rows

struct RowComparison {
  int compared = 0;
  int mismatched = 0;
};

/// Compares the constraint rows of `a` and `b` at boundary vertices within
/// `radius` of a corner, entry by entry at the bit level.
RowComparison compare_constraint_rows(const DiscreteNonlocalOperator& a,
                                      const DiscreteNonlocalOperator& b, const Mesh& mesh,
                                      const DomainSpec& domain, double radius);

// ---------------------------------------------------------------------------
// Reports

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ReportRow {
  SweepRow sweep;
  std::optional<SingularFit> fit;  // corner g1
  std::string classification;      // "regular", "singular(c)", "singular(d)", "unresolved"
};

struct ExperimentReport {
  std::string config_hash;
  ExperimentConfig config;
  std::vector<CriterionResult> criteria;
  std::vector<ReportRow> rows;
  SpectralBlock spectral;
  std::optional<ObstructionReport> obstruction;
  std::optional<ObstructionReport> obstruction_control;
  std::vector<double> convergence_h;
  std::vector<double> convergence_error;
  std::optional<double> convergence_rate;

  bool all_passed() const;
  bool any_aborted() const;
  Json to_json() const;
};

/// Synthetic (c, d) recovery at corner g1 plus the classification of an
/// example-1 solve at t = 0.1 with the compatible corner load.
CriterionResult singular_fit_oracle(const Mesh& mesh, const DomainSpec& domain);

/// CSV with the sweep and fit columns.
std::string sweep_csv(const std::vector<ReportRow>& rows);

/// Environment block: tolerances and library versions.
Json environment_json();

/// Runs geometry, meshing (through the cache when `cache_dir` is set),
/// spectral validation, the sweep and the example-specific checks.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& cache_dir = {});

/// Writes report.json, sweep.csv, spectrum.csv and optionally SVG charts.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir, bool svg);

// ---------------------------------------------------------------------------
// SVG

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static SVG line chart.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<ChartSeries>& series,
                           bool log_y = false);

}  // namespace nlbvp
