#include "mrte/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mrte/error.hpp"

namespace mrte {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

void Report::compute_ratios() {
  std::map<std::pair<std::string, int>, double> sa_by_tm;
  for (const ReportRow& r : rows)
    if (r.solver == "sa") sa_by_tm[{r.topology, r.tm_index}] = r.max_utilization;
  for (ReportRow& r : rows) {
    const auto it = sa_by_tm.find({r.topology, r.tm_index});
    if (it != sa_by_tm.end() && it->second > 0.0)
      r.ratio_vs_sa = r.max_utilization / it->second;
    else
      r.ratio_vs_sa.reset();
  }
}

std::vector<std::string> Report::solvers() const {
  std::vector<std::string> out;
  for (const ReportRow& r : rows)
    if (std::find(out.begin(), out.end(), r.solver) == out.end()) out.push_back(r.solver);
  return out;
}

std::vector<SolverAggregate> Report::aggregates() const {
  std::map<std::pair<std::string, int>, double> ospf_by_tm;
  for (const ReportRow& r : rows)
    if (r.solver == "ospf") ospf_by_tm[{r.topology, r.tm_index}] = r.max_utilization;

  std::vector<SolverAggregate> out;
  for (const std::string& solver : solvers()) {
    SolverAggregate agg;
    agg.solver = solver;
    double ratio_sum = 0.0, ospf_sum = 0.0;
    int ratio_count = 0, ospf_count = 0;
    for (const ReportRow& r : rows) {
      if (r.solver != solver) continue;
      ++agg.rows;
      agg.mean_max_utilization += r.max_utilization;
      agg.mean_wall_clock_s += r.wall_clock_s;
      if (r.ratio_vs_sa) {
        ratio_sum += *r.ratio_vs_sa;
        ++ratio_count;
      }
      const auto it = ospf_by_tm.find({r.topology, r.tm_index});
      if (it != ospf_by_tm.end()) {
        ospf_sum += it->second;
        ++ospf_count;
      }
    }
    agg.mean_max_utilization /= agg.rows;
    agg.mean_wall_clock_s /= agg.rows;
    if (ratio_count == agg.rows && agg.rows > 0) agg.mean_ratio_vs_sa = ratio_sum / ratio_count;
    if (ospf_count == agg.rows && agg.rows > 0 && ospf_sum > 0.0)
      agg.mean_improvement_vs_ospf = 1.0 - agg.mean_max_utilization * agg.rows / ospf_sum;
    out.push_back(std::move(agg));
  }
  return out;
}

std::vector<CdfPoint> Report::cdf(const std::string& solver) const {
  std::vector<double> values;
  for (const ReportRow& r : rows)
    if (r.solver == solver && r.ratio_vs_sa) values.push_back(*r.ratio_vs_sa);
  std::sort(values.begin(), values.end());
  std::vector<CdfPoint> points;
  points.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    points.push_back(CdfPoint{values[i], static_cast<double>(i + 1) / values.size()});
  return points;
}

void Report::write_rows_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "topology,tm_index,solver,max_utilization,ratio_vs_sa,wall_clock_s,steps,seed\n";
  for (const ReportRow& r : rows) {
    out << r.topology << ',' << r.tm_index << ',' << r.solver << ',' << fmt(r.max_utilization)
        << ',' << (r.ratio_vs_sa ? fmt(*r.ratio_vs_sa) : std::string()) << ','
        << fmt(r.wall_clock_s) << ',' << r.steps << ',' << r.seed << '\n';
  }
}

Report Report::load_rows_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  Report report;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 8 fields");
    ReportRow r;
    r.topology = f[0];
    r.tm_index = std::stoi(f[1]);
    r.solver = f[2];
    r.max_utilization = std::stod(f[3]);
    if (!f[4].empty()) r.ratio_vs_sa = std::stod(f[4]);
    r.wall_clock_s = std::stod(f[5]);
    r.steps = std::stoll(f[6]);
    r.seed = std::stoull(f[7]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

void Report::write_aggregates_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "solver,rows,mean_max_utilization,mean_ratio_vs_sa,mean_improvement_vs_ospf,"
         "mean_wall_clock_s\n";
  for (const SolverAggregate& a : aggregates()) {
    out << a.solver << ',' << a.rows << ',' << fmt(a.mean_max_utilization) << ','
        << (a.mean_ratio_vs_sa ? fmt(*a.mean_ratio_vs_sa) : std::string()) << ','
        << (a.mean_improvement_vs_ospf ? fmt(*a.mean_improvement_vs_ospf) : std::string()) << ','
        << fmt(a.mean_wall_clock_s) << '\n';
  }
}

void Report::write_cdf_csv(const std::string& path, const std::string& solver) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "value,cumulative_fraction\n";
  for (const CdfPoint& p : cdf(solver)) out << fmt(p.value) << ',' << fmt(p.cumulative) << '\n';
}

void Report::write_cdf_svg(const std::string& path) const {
  const int width = 640, height = 420, margin = 56;
  const double plot_w = width - 2.0 * margin, plot_h = height - 2.0 * margin;

  double lo = 1.0, hi = 1.0;
  std::vector<std::pair<std::string, std::vector<CdfPoint>>> curves;
  for (const std::string& solver : solvers()) {
    auto points = cdf(solver);
    if (points.empty()) continue;
    lo = std::min(lo, points.front().value);
    hi = std::max(hi, points.back().value);
    curves.emplace_back(solver, std::move(points));
  }
  if (hi <= lo) hi = lo + 1e-9;

  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto sx = [&](double v) { return margin + (v - lo) / (hi - lo) * plot_w; };
  auto sy = [&](double f) { return height - margin - f * plot_h; };
  out << "<line x1=\"" << margin << "\" y1=\"" << sy(0) << "\" x2=\"" << width - margin
      << "\" y2=\"" << sy(0) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << margin << "\" y1=\"" << sy(0) << "\" x2=\"" << margin << "\" y2=\""
      << sy(1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0, f = i / 4.0;
    out << "<text x=\"" << sx(v) << "\" y=\"" << height - margin + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << static_cast<int>(v * 1000) / 1000.0
        << "</text>\n"
        << "<text x=\"" << margin - 8 << "\" y=\"" << sy(f) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << f << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">max utilization relative to SA</text>\n";
  int color = 0;
  for (const auto& [solver, points] : curves) {
    out << "<polyline fill=\"none\" stroke=\"" << palette[color % 6] << "\" stroke-width=\"1.5\" points=\"";
    double prev_f = 0.0;
    for (const CdfPoint& p : points) {
      out << sx(p.value) << ',' << sy(prev_f) << ' ' << sx(p.value) << ',' << sy(p.cumulative)
          << ' ';
      prev_f = p.cumulative;
    }
    out << "\"/>\n<text x=\"" << width - margin - 120 << "\" y=\"" << margin + 16 * (color + 1)
        << "\" font-size=\"12\" fill=\"" << palette[color % 6] << "\">" << solver << "</text>\n";
    ++color;
  }
  out << "</svg>\n";
}

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

std::optional<std::string> compare_files_recomputed(const std::string& dir, const Report& report) {
  // Aggregates.
  const std::string agg_path = dir + "/aggregates.csv";
  std::ifstream agg_in(agg_path, std::ios::binary);
  if (!agg_in) return "missing " + agg_path;
  const auto aggs = report.aggregates();
  std::string line;
  std::getline(agg_in, line);
  std::size_t i = 0;
  while (std::getline(agg_in, line)) {
    if (line.empty()) continue;
    if (i >= aggs.size()) return agg_path + ": more rows than recomputed aggregates";
    const auto f = split_csv_line(line);
    if (f.size() != 6) return agg_path + ": expected 6 fields";
    const SolverAggregate& a = aggs[i];
    if (f[0] != a.solver) return agg_path + ": solver order mismatch at row " + std::to_string(i);
    if (std::stoi(f[1]) != a.rows) return agg_path + ": row count mismatch for " + a.solver;
    if (!close(std::stod(f[2]), a.mean_max_utilization))
      return agg_path + ": mean_max_utilization mismatch for " + a.solver;
    if (a.mean_ratio_vs_sa.has_value() != !f[3].empty())
      return agg_path + ": ratio presence mismatch for " + a.solver;
    if (a.mean_ratio_vs_sa && !close(std::stod(f[3]), *a.mean_ratio_vs_sa))
      return agg_path + ": mean_ratio_vs_sa mismatch for " + a.solver;
    if (a.mean_improvement_vs_ospf && !close(std::stod(f[4]), *a.mean_improvement_vs_ospf))
      return agg_path + ": mean_improvement_vs_ospf mismatch for " + a.solver;
    ++i;
  }
  if (i != aggs.size()) return agg_path + ": fewer rows than recomputed aggregates";

  // Per-solver CDFs, when present.
  for (const std::string& solver : report.solvers()) {
    const std::string cdf_path = dir + "/cdf_" + solver + ".csv";
    if (!fs::exists(cdf_path)) continue;
    std::ifstream in(cdf_path, std::ios::binary);
    const auto points = report.cdf(solver);
    std::getline(in, line);
    std::size_t k = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (k >= points.size()) return cdf_path + ": extra rows";
      const auto f = split_csv_line(line);
      if (f.size() != 2) return cdf_path + ": expected 2 fields";
      if (!close(std::stod(f[0]), points[k].value) || !close(std::stod(f[1]), points[k].cumulative))
        return cdf_path + ": point mismatch at row " + std::to_string(k);
      ++k;
    }
    if (k != points.size()) return cdf_path + ": missing rows";
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> verify_report_dir(const std::string& dir) {
  const std::string rows_path = dir + "/report.csv";
  if (!fs::exists(rows_path)) return "missing " + rows_path;
  Report report = Report::load_rows_csv(rows_path);

  // Ratio columns must equal recomputation from the SA rows.
  Report recomputed = report;
  recomputed.compute_ratios();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& stored = report.rows[i].ratio_vs_sa;
    const auto& fresh = recomputed.rows[i].ratio_vs_sa;
    if (stored.has_value() != fresh.has_value())
      return rows_path + ": ratio presence mismatch at row " + std::to_string(i);
    if (stored && !close(*stored, *fresh))
      return rows_path + ": ratio mismatch at row " + std::to_string(i);
  }
  return compare_files_recomputed(dir, report);
}

}  // namespace mrte
