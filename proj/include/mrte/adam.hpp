#pragma once

#include <cstdint>
#include <vector>

#include "mrte/tensor.hpp"

namespace mrte {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Exponential schedule: lr *= decay_factor every decay_interval updates,
  // where an "update" is one end_update() call (a policy update in training).
  double decay_factor = 0.96;
  int decay_interval = 60;
};

// Adaptive-moment optimizer over a fixed set of registered tensors.
// apply() validates every gradient before touching any parameter, so a
// non-finite gradient aborts the whole step.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ParamTensor*> params, AdamConfig config);

  // One bias-corrected step using the current effective learning rate.
  // Gradients are zeroed afterwards. Throws NumericError naming the first
  // offending tensor if any gradient is non-finite.
  void apply();

  // Advances the learning-rate schedule by one update.
  void end_update();

  double learning_rate() const { return lr_; }
  std::int64_t step_count() const { return steps_; }
  std::int64_t update_count() const { return updates_; }
  const AdamConfig& config() const { return config_; }

  // Moment buffers and counters, for checkpointing.
  struct State {
    std::vector<Matrix> m, v;
    std::int64_t steps = 0;
    std::int64_t updates = 0;
    double lr = 0.0;
  };
  State state() const;
  void restore(const State& state);

 private:
  std::vector<ParamTensor*> params_;
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  std::int64_t steps_ = 0;
  std::int64_t updates_ = 0;
  double lr_;
};

}  // namespace mrte
