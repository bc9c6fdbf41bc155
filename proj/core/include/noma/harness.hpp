#pragma once

// Monte-Carlo experiment driver: power sweeps and min-SINR distributions,
// written as CSV.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "noma/channel.hpp"
#include "noma/formulation.hpp"

namespace noma {

struct ExperimentConfig {
  Scenario scenario;
  std::vector<Scheme> schemes{Scheme::robust, Scheme::nonrobust, Scheme::oma};
  std::vector<double> gamma_sweep_db;
  std::vector<double> epsilon_list;
  int trials = 200;
  /// `trials` counts optimal designs of the reference scheme (robust if
  /// listed, else the first) instead of draws.  sinr-dist screens each
  /// (epsilon, gamma) cell and runs the other schemes on the passing draws.
  /// A sweep screens once at the largest epsilon and gamma, then runs the
  /// whole grid on the passing draws only.
  bool count_feasible = false;
  /// Upper bound on draws per cell when count_feasible is set.
  int max_draws = 200000;
  bool errors_on_sphere = false;
  std::filesystem::path out_dir = ".";
  int workers = 1;
  /// Leading "# generated ..." line and wall-clock solve_ms column.
  bool timestamp = true;
  DesignOptions design;

  void validate() const;
};

/// `key = value` lines; '#' starts a comment.  Lists are comma separated.
/// Keys: M, K, epsilon, gamma_min_db, noise_var, cell_radius_m, min_dist_m,
/// shadow_std_db, pathloss_exp, seed, trials, schemes, gamma_sweep_db,
/// epsilon_list, plus distance_law (uniform_distance | uniform_area).
/// Missing sweep lists default to the single epsilon / gamma_min_db value.
/// Throws ParseError on unknown keys or malformed values.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialRecord {
  std::uint64_t trial_index = 0;
  Scheme scheme = Scheme::robust;
  double epsilon = 0.0;
  double gamma_db = 0.0;
  SolveStatus status = SolveStatus::numerical_failure;
  /// Present iff status is optimal.
  std::optional<double> total_power_linear;
  std::optional<double> total_power_db;
  std::optional<double> min_achieved_sinr_db;
  std::optional<double> rank_ratio_max;
  bool rank_violation = false;
  int solve_iters = 0;
  double solve_ms = 0.0;

  bool optimal() const { return status == SolveStatus::optimal; }
};

/// Sort key (trial, scheme, epsilon, gamma).
bool record_less(const TrialRecord& a, const TrialRecord& b);

struct CdfPoint {
  double value = 0.0;
  double probability = 0.0;
};

/// Right-continuous step CDF at the sorted unique values.  Throws
/// ContractError on empty input.
std::vector<CdfPoint> empirical_cdf(std::vector<double> values);

/// Fraction of values <= x.
double cdf_at(const std::vector<CdfPoint>& cdf, double x);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  double mass = 0.0;
  double density = 0.0;
};

/// Freedman-Diaconis width, at least `min_bins` bins (and at most
/// `max_bins`).  Degenerate spreads get a unit-wide range around the data.
std::vector<HistogramBin> histogram(const std::vector<double>& values, int min_bins = 20, int max_bins = 1000);

/// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

struct CellSummary {
  Scheme scheme = Scheme::robust;
  double epsilon = 0.0;
  double gamma_db = 0.0;
  int trials = 0;
  int optimal = 0;
  int infeasible = 0;
  int failed = 0;
  int rank_violations = 0;
  double mean_power_linear = 0.0;
  double median_power_linear = 0.0;
  /// Over optimal trials: min achieved SINR below gamma - 0.05 dB.
  double violation_fraction = 0.0;
  std::vector<CdfPoint> cdf;
  std::vector<HistogramBin> pdf;
};

struct SummaryStats {
  std::vector<TrialRecord> records;
  std::vector<CellSummary> cells;

  const CellSummary* find(Scheme scheme, double epsilon, double gamma_db) const;
};

inline constexpr double kViolationMarginDb = 0.05;

/// Summaries per (scheme, epsilon, gamma) in sorted order.  CDF and PDF are
/// filled when `with_distribution` and the cell has optimal trials.
std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records, bool with_distribution);

/// One record for (scheme, epsilon, gamma, trial): channels from the
/// scenario stream, design on the estimates, SINR at the true channels.
TrialRecord run_trial(const ExperimentConfig& cfg, Scheme scheme, double epsilon, double gamma_db,
                      std::uint64_t trial_index);

/// Writes power_sweep.csv and power_summary.csv.  The output directory is
/// created and probed before any solve; IoError if it is not writable.
SummaryStats run_power_sweep(const ExperimentConfig& cfg);

/// Writes sinr_trials.csv, sinr_cdf.csv and sinr_pdf.csv.
SummaryStats run_sinr_distribution(const ExperimentConfig& cfg);

/// CSV writers (12 significant digits, LF).
void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records, bool timestamp);
void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells, bool timestamp);
void write_cdf_csv(std::ostream& out, const std::vector<CellSummary>& cells, bool timestamp);
void write_pdf_csv(std::ostream& out, const std::vector<CellSummary>& cells, bool timestamp);

std::string format_number(double v);

/// A fixed design with the channel estimates it was built for.
struct DesignFile {
  BeamDesign design;
  std::vector<ComplexVector> h_hat;
  std::vector<double> noise_var;
};

/// Rows `field,index,values...`: scheme, order, noise (per user), h (per
/// user, interleaved re/im), w (per position, interleaved re/im).
void write_design_csv(std::ostream& out, const DesignFile& file);
/// Throws ParseError on malformed or inconsistent content.
DesignFile read_design_csv(std::istream& in);

}  // namespace noma
