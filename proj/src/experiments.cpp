#include "mrte/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "mrte/error.hpp"

namespace mrte {

namespace {

using Clock = std::chrono::steady_clock;

ReportRow solve_one(const Instance& inst, const std::string& topology_name, int tm_index,
                    const std::string& solver, const GnnModel* model,
                    const SolverRunConfig& cfg) {
  ReportRow row;
  row.topology = topology_name;
  row.tm_index = tm_index;
  row.solver = solver;
  if (solver == "ospf") {
    const Assignment a = ospf_baseline(inst.topology, inst.table, inst.tm);
    row.max_utilization = a.max_utilization;
    row.wall_clock_s = a.wall_clock_s;
  } else if (solver == "sap") {
    const SapResult r = sap(inst.topology, inst.tm);
    row.max_utilization = r.max_utilization;
    row.wall_clock_s = r.wall_clock_s;
  } else if (solver == "sa") {
    const std::uint64_t seed = splitmix64(cfg.seed ^ (0x5341ULL + static_cast<std::uint64_t>(tm_index)));
    Rng rng(seed);
    const AnnealSchedule schedule =
        AnnealSchedule::calibrate(inst.topology, inst.table, inst.tm, cfg.sa_steps, rng);
    const Assignment a = simulated_annealing(inst.topology, inst.table, inst.tm, schedule, rng);
    row.max_utilization = a.max_utilization;
    row.wall_clock_s = a.wall_clock_s;
    row.steps = a.steps;
    row.seed = seed;
  } else if (solver == "brute") {
    const Assignment a = brute_force(inst.topology, inst.table, inst.tm);
    row.max_utilization = a.max_utilization;
    row.wall_clock_s = a.wall_clock_s;
    row.steps = a.steps;
  } else if (solver == "drl") {
    require(model != nullptr, "run_solvers: drl requested without a checkpoint");
    const auto start = Clock::now();
    Env env(inst.topology, inst.table, inst.tm);
    if (cfg.sample_actions) {
      Rng rng(splitmix64(cfg.seed ^ (0x44524cULL + static_cast<std::uint64_t>(tm_index))));
      while (!env.done()) {
        const PolicyOutput out = policy(*model, env, inst.graph, rng);
        env.step(out.middlepoint);
      }
    } else {
      run_greedy_episode(*model, env, inst.graph);
    }
    row.max_utilization = env.max_utilization();
    row.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
  } else {
    throw ValidationError("run_solvers: unknown solver '" + solver + "'");
  }
  if (cfg.deterministic_timing) row.wall_clock_s = 0.0;
  return row;
}

}  // namespace

Report run_solvers(const InstancePool& pool, const std::string& topology_name,
                   const GnnModel* model, const SolverRunConfig& cfg) {
  require(!pool.empty(), "run_solvers: empty instance pool");
  require(!cfg.solvers.empty(), "run_solvers: no solvers selected");

  Report report;
  report.rows.resize(pool.size() * cfg.solvers.size());
  const int threads = std::max(1, cfg.threads);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(static_cast<std::size_t>(threads));
  auto worker = [&](int tid) {
    try {
      for (std::size_t i = next.fetch_add(1); i < pool.size(); i = next.fetch_add(1))
        for (std::size_t s = 0; s < cfg.solvers.size(); ++s)
          report.rows[i * cfg.solvers.size() + s] =
              solve_one(*pool[i], topology_name, static_cast<int>(i), cfg.solvers[s], model, cfg);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(tid)] = e.what();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) workers.emplace_back(worker, t);
    for (auto& w : workers) w.join();
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw ValidationError("run_solvers: " + e);

  report.compute_ratios();
  return report;
}

}  // namespace mrte
