#pragma once

#include <string>
#include <vector>

#include "mrte/rng.hpp"
#include "mrte/topology.hpp"

namespace mrte {

// N x N demand volumes, zero diagonal, same units as link capacity.
using TrafficMatrix = Matrix;

// T(s,d) = total_volume * w_s * w_d / sum_{i != j} w_i * w_j, with node
// masses w ~ Exponential(1). The matrix sums to total_volume by construction.
TrafficMatrix gravity_tm(const Topology& topo, double total_volume, Rng& rng);
TrafficMatrix gravity_tm_from_masses(int nodes, double total_volume, const Vector& masses);

TrafficMatrix tm_from_json(const nlohmann::json& j);
nlohmann::json tm_to_json(const TrafficMatrix& tm);
TrafficMatrix load_tm(const std::string& path);
void save_tm(const std::string& path, const TrafficMatrix& tm);

struct CapacityProfile {
  std::vector<double> candidates;  // strictly increasing
  double band_lo = 0.95;
  double band_hi = 1.3;

  void validate() const;
  static CapacityProfile narrow();  // 5K..20K
  static CapacityProfile wide();    // 25K..100K
};

struct CalibratedInstance {
  Topology topology;  // input topology with reassigned capacities
  TrafficMatrix tm;   // input matrix times `scale`
  double scale = 1.0;
};

// Per-link loads under the table's direct shortest paths.
Vector ospf_loads(const Topology& topo, const PathTable& table, const TrafficMatrix& tm);

// Picks, per link, the smallest candidate capacity whose utilization under
// direct routing stays at or below band_hi (largest candidate if none), then
// rescales the matrix until the max utilization falls inside the band.
// Selection and rescaling are iterated to a fixed point, so reapplying the
// result is a no-op with scale 1.
CalibratedInstance assign_capacities(const Topology& topo, const TrafficMatrix& tm,
                                     const CapacityProfile& profile);

}  // namespace mrte
