#pragma once

#include <iosfwd>
#include <vector>

#include "mrte/topology.hpp"
#include "mrte/traffic.hpp"

namespace mrte {

struct Demand {
  int src = -1, dst = -1;
  double volume = 0.0;
};

struct StepOutcome {
  double reward = 0.0;  // max utilization before minus after
  bool done = false;
};

// Episodic fluid-model environment. reset() allocates every demand on its
// direct shortest path; the episode then walks the demands in decreasing
// volume order (ties by ascending (src, dst)), re-routing each exactly once
// through the chosen middlepoint. Loads are maintained incrementally;
// debug builds audit them against a from-scratch recomputation.
class Env {
 public:
  Env(const Topology& topo, const PathTable& table, const TrafficMatrix& tm);

  void reset();
  StepOutcome step(int middlepoint);

  double max_utilization() const;
  bool done() const { return cursor_ == static_cast<int>(demands_.size()); }
  int cursor() const { return cursor_; }
  const Demand& current_demand() const;

  const std::vector<Demand>& demands() const { return demands_; }
  int assignment(int demand_index) const;  // middlepoint currently routing demand i
  const Vector& loads() const { return loads_; }
  const Vector& capacities() const { return capacities_; }
  const Topology& topology() const { return *topo_; }
  const PathTable& table() const { return *table_; }

  // Recomputes all loads from the current assignment; used by the debug
  // audit and exposed for tests.
  Vector recompute_loads() const;
  void audit_loads(double tol = 1e-9) const;

  struct TraceRow {
    int step, src, dst;
    double volume;
    int action;
    double max_before, max_after, reward;
  };
  const std::vector<TraceRow>& trace() const { return trace_; }
  static void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

 private:
  const Topology* topo_;
  const PathTable* table_;
  TrafficMatrix tm_;
  std::vector<Demand> demands_;
  std::vector<int> assignment_;
  Vector loads_, capacities_;
  int cursor_ = 0;
  std::vector<TraceRow> trace_;
};

}  // namespace mrte
