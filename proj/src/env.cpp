#include "mrte/env.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mrte/error.hpp"

namespace mrte {

Env::Env(const Topology& topo, const PathTable& table, const TrafficMatrix& tm)
    : topo_(&topo), table_(&table), tm_(tm) {
  require(tm_.rows() == topo.nodes() && tm_.cols() == topo.nodes(),
          "env: traffic matrix size does not match topology");
  capacities_ = topo.capacities();
  reset();
}

void Env::reset() {
  const int n = topo_->nodes();
  demands_.clear();
  demands_.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (s != d) demands_.push_back(Demand{s, d, tm_(s, d)});
  std::stable_sort(demands_.begin(), demands_.end(), [](const Demand& a, const Demand& b) {
    if (a.volume != b.volume) return a.volume > b.volume;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
  });
  assignment_.assign(demands_.size(), -1);
  for (std::size_t i = 0; i < demands_.size(); ++i) assignment_[i] = demands_[i].dst;
  loads_ = recompute_loads();
  cursor_ = 0;
  trace_.clear();
}

const Demand& Env::current_demand() const {
  require(!done(), "env: episode is done");
  return demands_[static_cast<std::size_t>(cursor_)];
}

int Env::assignment(int demand_index) const {
  require(demand_index >= 0 && demand_index < static_cast<int>(assignment_.size()),
          "env: demand index out of range");
  return assignment_[static_cast<std::size_t>(demand_index)];
}

double Env::max_utilization() const {
  return (loads_.array() / capacities_.array()).maxCoeff();
}

Vector Env::recompute_loads() const {
  Vector loads = Vector::Zero(topo_->num_links());
  for (std::size_t i = 0; i < demands_.size(); ++i) {
    const Demand& d = demands_[i];
    if (d.volume == 0.0) continue;
    const MiddlepointPath p = middlepoint_path(*table_, d.src, d.dst, assignment_[i]);
    for (int id : p.links) loads(id) += d.volume;
  }
  return loads;
}

void Env::audit_loads(double tol) const {
  const Vector fresh = recompute_loads();
  const double err = (fresh - loads_).cwiseAbs().maxCoeff();
  if (err > tol)
    throw NumericError("env: incremental loads drifted from recomputation by " +
                       std::to_string(err));
}

StepOutcome Env::step(int middlepoint) {
  require(!done(), "env: step after episode end");
  const int i = cursor_;
  const Demand& d = demands_[static_cast<std::size_t>(i)];
  require(middlepoint != d.src, "env: middlepoint equals demand source");
  require(middlepoint >= 0 && middlepoint < topo_->nodes(), "env: middlepoint out of range");

  const double max_before = max_utilization();
  if (middlepoint != assignment_[static_cast<std::size_t>(i)] && d.volume != 0.0) {
    const MiddlepointPath old_path =
        middlepoint_path(*table_, d.src, d.dst, assignment_[static_cast<std::size_t>(i)]);
    for (int id : old_path.links) loads_(id) -= d.volume;
    const MiddlepointPath new_path = middlepoint_path(*table_, d.src, d.dst, middlepoint);
    for (int id : new_path.links) loads_(id) += d.volume;
  }
  assignment_[static_cast<std::size_t>(i)] = middlepoint;
  ++cursor_;
#ifndef NDEBUG
  if (cursor_ % 64 == 0 || done()) audit_loads();
#endif
  const double max_after = max_utilization();
  const double reward = max_before - max_after;
  trace_.push_back(TraceRow{i, d.src, d.dst, d.volume, middlepoint, max_before, max_after, reward});
  return StepOutcome{reward, done()};
}

void Env::write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "step,src,dst,volume,action,maxU_before,maxU_after,reward\n";
  out.precision(17);
  for (const TraceRow& r : rows)
    out << r.step << ',' << r.src << ',' << r.dst << ',' << r.volume << ',' << r.action << ','
        << r.max_before << ',' << r.max_after << ',' << r.reward << '\n';
}

}  // namespace mrte
