#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mrte {

// One solver run on one traffic matrix. Ratios are relative to the
// simulated-annealing row of the same TM and absent when SA was not run.
struct ReportRow {
  std::string topology;
  int tm_index = -1;
  std::string solver;
  double max_utilization = 0.0;
  std::optional<double> ratio_vs_sa;
  double wall_clock_s = 0.0;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
};

struct SolverAggregate {
  std::string solver;
  int rows = 0;
  double mean_max_utilization = 0.0;
  std::optional<double> mean_ratio_vs_sa;
  std::optional<double> mean_improvement_vs_ospf;  // 1 - mean(solver)/mean(ospf)
  double mean_wall_clock_s = 0.0;
};

struct CdfPoint {
  double value = 0.0;
  double cumulative = 0.0;
};

struct Report {
  std::vector<ReportRow> rows;

  // Fills ratio_vs_sa on every row that shares a TM with an "sa" row.
  void compute_ratios();
  std::vector<SolverAggregate> aggregates() const;
  // CDF of ratio_vs_sa values for one solver, sorted ascending.
  std::vector<CdfPoint> cdf(const std::string& solver) const;
  std::vector<std::string> solvers() const;

  void write_rows_csv(const std::string& path) const;
  void write_aggregates_csv(const std::string& path) const;
  void write_cdf_csv(const std::string& path, const std::string& solver) const;
  void write_cdf_svg(const std::string& path) const;

  static Report load_rows_csv(const std::string& path);
};

// Recomputes aggregates and CDFs from a rows file and compares them against
// the stored companion files. Returns a human-readable error, or nothing
// when everything matches.
std::optional<std::string> verify_report_dir(const std::string& dir);

}  // namespace mrte
