#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mrte/dense.hpp"
#include "mrte/env.hpp"
#include "mrte/gru.hpp"
#include "mrte/softmax.hpp"

namespace mrte {

// Link-level message-passing graph: link k is a neighbour of link l when
// head(k) == tail(l), i.e. messages flow along the traffic direction.
struct LinkGraph {
  int links = 0;
  std::vector<int> pair_dst;  // receiving link l, one entry per (l, k) pair
  std::vector<int> pair_src;  // neighbour link k

  static LinkGraph build(const Topology& topo);
};

struct GnnConfig {
  int hidden = 20;          // link hidden-state width
  int msg_hidden = 64;      // message network hidden layer
  int readout_hidden = 64;  // readout hidden layer
  int rounds = 5;           // message-passing iterations
};

// Weight-tied GNN: a two-layer message network over concatenated neighbour
// states, a gated recurrent update, and sum-readout heads for the actor
// logit and the critic value. One instance serves every link of any graph.
class GnnModel {
 public:
  GnnModel(GnnConfig config, std::uint64_t init_seed);

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;
  const GnnConfig& config() const { return cfg_; }

  nlohmann::json to_json() const;
  static GnnModel from_json(const nlohmann::json& j);

  DenseLayer msg_fc1, msg_fc2;
  GruCell update;
  DenseLayer actor_fc1, actor_fc2;
  DenseLayer critic_fc1, critic_fc2;

 private:
  GnnConfig cfg_;
};

// ---- Link-state encoding -------------------------------------------------

// x1: capacities divided by the topology's maximum capacity.
Vector normalized_capacities(const Topology& topo);

// x2: utilization with the current demand's volume removed from the path it
// presently occupies (the agent decides where to place it, so the demand
// must not be double counted).
Vector action_free_utilization(const Env& env);

// x3 entries for routing the current demand via middlepoint m: one
// (link, volume * multiplicity / max_capacity) pair per candidate-path link.
std::vector<std::pair<int, double>> action_feature(const Env& env, int m);

// Initial hidden states (hidden x links): rows 0..2 hold x1, x2, x3 and the
// remainder is zero padding.
Matrix initial_hidden(int hidden, const Vector& x_cap, const Vector& x_util,
                      const std::vector<std::pair<int, double>>* x3);

// Everything the policy needs for one decision, and what PPO stores as the
// observation snapshot: x2 plus the sparse x3 of every candidate action.
struct StepEncoding {
  Vector x_util;
  std::vector<int> middlepoints;
  std::vector<std::vector<std::pair<int, double>>> action_x3;
};
StepEncoding encode_step(const Env& env);

// ---- Batched message passing ---------------------------------------------

// One graph copy inside a batch; x3 == nullptr encodes the action-free state.
struct GraphSegmentRef {
  const LinkGraph* graph = nullptr;
  const Vector* x_cap = nullptr;
  const Vector* x_util = nullptr;
  const std::vector<std::pair<int, double>>* x3 = nullptr;
};

// Runs the synchronous rounds over a batch of graph copies laid out in one
// column space. With keep_tape the forward retains what backward() needs to
// accumulate parameter gradients for the whole unrolled computation.
//
// The object doubles as a workspace: assign() reuses the round buffers, so
// callers that loop over many batches of the same shape pay for allocation
// once.
class GnnBatch {
 public:
  GnnBatch() = default;
  GnnBatch(const GnnModel& model, const std::vector<GraphSegmentRef>& segments);

  void assign(const GnnModel& model, const std::vector<GraphSegmentRef>& segments);
  void forward(const GnnModel& model, bool keep_tape);
  Matrix segment_sums() const;  // hidden x segments, readout input
  void backward(GnnModel& model, const Matrix& dsums);
  int segments() const { return static_cast<int>(seg_offset_.size()); }

 private:
  void gather_pairs(const Matrix& h);

  std::vector<int> seg_offset_, seg_links_;
  std::vector<int> pair_dst_, pair_src_;
  Matrix h0_, h_;
  // Shared scratch, reused across rounds and batches.
  Matrix u_, msg_, agg_, scratch_a_, scratch_b_, scratch_c_;
  // Tape: per-round hidden inputs, gate values, and message activations.
  struct RoundTape {
    Matrix h_in, z, r, cand, agg;
    Matrix m1;  // post-relu message hidden layer; relu mask is m1 > 0
  };
  std::vector<RoundTape> tape_;
  bool forwarded_ = false, has_tape_ = false;
};

// ---- Policy ----------------------------------------------------------------

struct PolicyOutput {
  Vector logits;  // one per candidate middlepoint, action_set order
  Vector probs;
  int action_index = -1;
  int middlepoint = -1;
  double logprob = 0.0;
  double value = 0.0;
};

// Logits for every action plus the critic value on the action-free state.
struct PolicyForward {
  Vector logits;
  double value = 0.0;
};
PolicyForward policy_forward(const GnnModel& model, const LinkGraph& graph, const Vector& x_cap,
                             const StepEncoding& enc);

PolicyOutput policy(const GnnModel& model, const Env& env, const LinkGraph& graph, Rng& rng);
PolicyOutput policy_greedy(const GnnModel& model, const Env& env, const LinkGraph& graph);

// Single-action logit, per the per-action evaluation the policy runs.
double evaluate_action(const GnnModel& model, const Env& env, const LinkGraph& graph, int m);

// Greedy rollout of one full episode; returns the final max utilization.
double run_greedy_episode(const GnnModel& model, Env& env, const LinkGraph& graph);

}  // namespace mrte
