#pragma once

#include <cstdint>
#include <vector>

#include "mrte/env.hpp"

namespace mrte {

// A full per-demand middlepoint vector (in the episode's demand order) plus
// the max utilization it achieves. Solvers re-evaluate their result through
// the environment before recording it, so replaying `middlepoints` from
// reset reproduces `max_utilization` exactly.
struct Assignment {
  std::vector<int> middlepoints;
  double max_utilization = 0.0;
  std::int64_t steps = 0;
  double wall_clock_s = 0.0;
  std::uint64_t seed = 0;
};

// Steps an environment through a middlepoint vector; returns final max
// utilization.
double replay_assignment(const Topology& topo, const PathTable& table, const TrafficMatrix& tm,
                         const std::vector<int>& middlepoints);

// The initial network state: every demand on its direct shortest path.
Assignment ospf_baseline(const Topology& topo, const PathTable& table, const TrafficMatrix& tm);

// Shortest Available Path: starting from an empty network, allocate demands
// in decreasing volume order on the hop-minimal path with the largest
// bottleneck residual capacity (ties toward the lexicographically smallest
// node sequence). Routes are explicit paths, not middlepoint assignments.
struct SapResult {
  double max_utilization = 0.0;
  std::vector<std::vector<int>> node_paths;  // per demand, node sequence
  double wall_clock_s = 0.0;
};
SapResult sap(const Topology& topo, const TrafficMatrix& tm);

struct AnnealSchedule {
  double t0 = 1.0;
  double t_end = 1e-5;
  std::int64_t steps = 4'000'000;
  double decay = 0.0;  // geometric factor derived from (t0, t_end, steps)

  static AnnealSchedule derive(double t0, double t_end, std::int64_t steps);

  // T0 from the 90th percentile of |dE| over a 1000-move random walk.
  static AnnealSchedule calibrate(const Topology& topo, const PathTable& table,
                                  const TrafficMatrix& tm, std::int64_t steps, Rng& rng);
};

// Metropolis search over full middlepoint vectors, starting all-direct.
// Each step mutates one uniformly random demand to one uniformly random
// middlepoint != src; energy is the max utilization, evaluated incrementally
// and audited against a from-scratch recomputation every 10^4 accepted
// moves. Returns the best state ever visited.
Assignment simulated_annealing(const Topology& topo, const PathTable& table,
                               const TrafficMatrix& tm, const AnnealSchedule& schedule, Rng& rng);

// Exhaustive search over all (N-1)^(N(N-1)) assignments; requires N <= 4.
// Ties resolve to the lexicographically smallest middlepoint vector.
Assignment brute_force(const Topology& topo, const PathTable& table, const TrafficMatrix& tm);

}  // namespace mrte
