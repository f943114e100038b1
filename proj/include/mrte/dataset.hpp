#pragma once

#include <string>

#include "mrte/ppo.hpp"

namespace mrte {

struct DatasetSpec {
  std::string name;         // e.g. "nsfnet"
  Topology base_topology;   // capacities get reassigned per instance
  CapacityProfile profile;
  int train_count = 0;
  int eval_count = 0;
  double total_volume = 0.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::string name;
  InstancePool train;
  InstancePool eval;
};

// Writes per-instance topology/tm files plus manifest.json. Generation is a
// pure function of the spec, so identical specs produce identical bytes.
Dataset generate_dataset(const DatasetSpec& spec, const std::string& out_dir);

// Builds the same instances in memory without touching the filesystem.
Dataset generate_dataset_in_memory(const DatasetSpec& spec);

Dataset load_dataset(const std::string& dir);

// Bundled topology files by name; falls back to treating `name` as a path.
std::string bundled_topology_path(const std::string& name);
Topology load_topology_by_name(const std::string& name);

// Conventional defaults for the bundled topology classes.
CapacityProfile default_profile(const std::string& topology_name);
double default_total_volume(const std::string& topology_name);

}  // namespace mrte
