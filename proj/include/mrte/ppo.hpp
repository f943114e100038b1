#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mrte/adam.hpp"
#include "mrte/gnn.hpp"

namespace mrte {

// One calibrated (topology, traffic matrix) pair with everything the agent
// needs precomputed. Immutable once built; shared across episodes.
struct Instance {
  Topology topology;
  PathTable table;
  LinkGraph graph;
  TrafficMatrix tm;
  Vector x_cap;
  std::uint64_t seed = 0;
  double scale = 1.0;
};

std::shared_ptr<const Instance> make_instance(Topology topo, TrafficMatrix tm,
                                              std::uint64_t seed = 0, double scale = 1.0);

using InstancePool = std::vector<std::shared_ptr<const Instance>>;

struct TrajectoryRecord {
  std::shared_ptr<const Instance> instance;
  std::shared_ptr<const StepEncoding> obs;
  int action_index = -1;
  double logprob = 0.0;   // log-probability at collection time
  double value = 0.0;     // critic estimate at collection time
  double reward = 0.0;
  bool done = false;
  std::uint64_t policy_version = 0;
  double advantage = 0.0;  // raw GAE, filled by gae()
  double ret = 0.0;        // advantage + value
};

struct PpoConfig {
  double clip_ratio = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int epochs = 4;
  int minibatch_size = 50;
  int episodes_per_update = 10;
  int updates = 60;
  int eval_every = 5;
  std::uint64_t seed = 1;
  AdamConfig adam;
  GnnConfig gnn;

  void validate() const;
  nlohmann::json to_json() const;
  static PpoConfig from_json(const nlohmann::json& j);
};

struct CollectStats {
  double mean_return = 0.0;
  double mean_final_max_util = 0.0;
  int episodes = 0;
};

// Full on-policy episodes over traffic matrices sampled from the pool.
std::vector<TrajectoryRecord> collect(const GnnModel& model, const InstancePool& pool,
                                      int episodes, Rng& rng, std::uint64_t policy_version,
                                      CollectStats* stats = nullptr);

// Raw generalized advantage estimation per episode; normalization happens
// per update batch inside ppo_update.
void gae(std::vector<TrajectoryRecord>& records, double discount, double lambda);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Mean PPO loss over one batch of records:
//   clipped surrogate + value_coef * value loss - entropy_coef * entropy.
// `norm_advantages` pairs with `records`. With with_grad, parameter
// gradients accumulate into the model. Exposed for gradient checks.
double ppo_loss(GnnModel& model, const std::vector<const TrajectoryRecord*>& records,
                const std::vector<double>& norm_advantages, const PpoConfig& config,
                bool with_grad);

// Clipped-surrogate update: per epoch, shuffle and sweep mini-batches, one
// optimizer step each. Records must carry `expected_version`; a non-finite
// loss restores the pre-update weights and raises NumericError.
UpdateStats ppo_update(GnnModel& model, AdamOptimizer& optimizer,
                       std::vector<TrajectoryRecord>& records, const PpoConfig& config,
                       Rng& rng, std::uint64_t expected_version);

struct EvalSummary {
  double mean_max_util = 0.0;
  double p90_max_util = 0.0;
};
EvalSummary evaluate_greedy(const GnnModel& model, const InstancePool& pool);

struct TrainResult {
  int updates_done = 0;
  double best_eval_mean_max_util = 0.0;
  std::string best_checkpoint_path;
  std::string last_checkpoint_path;
  std::string metrics_path;
};

// Alternates collect/update, evaluates on the held-out pool every
// `eval_every` updates, checkpoints the latest and best models, and writes
// one metrics row per update. Resumable from <out_dir>/checkpoint_last.json.
TrainResult train(const PpoConfig& config, const InstancePool& train_pool,
                  const InstancePool& eval_pool, const std::string& out_dir,
                  bool resume = false, bool deterministic_timing = false);

}  // namespace mrte
