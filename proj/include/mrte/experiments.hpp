#pragma once

#include "mrte/baselines.hpp"
#include "mrte/dataset.hpp"
#include "mrte/report.hpp"

namespace mrte {

struct SolverRunConfig {
  std::vector<std::string> solvers;  // subset of {ospf, sap, sa, drl, brute}
  std::int64_t sa_steps = 4'000'000;
  std::uint64_t seed = 1;
  int threads = 1;
  bool deterministic_timing = false;
  bool sample_actions = false;  // drl: sample instead of greedy argmax
};

// Runs the selected solvers on every instance of the pool and assembles the
// comparison report. `model` may be null when "drl" is not requested.
// Per-instance work fans out across threads; outputs are ordered by
// (tm_index, solver) and seeded per instance, so results do not depend on
// the thread count.
Report run_solvers(const InstancePool& pool, const std::string& topology_name,
                   const GnnModel* model, const SolverRunConfig& config);

}  // namespace mrte
