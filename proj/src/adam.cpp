#include "mrte/adam.hpp"

#include <cmath>

#include "mrte/error.hpp"

namespace mrte {

AdamOptimizer::AdamOptimizer(std::vector<ParamTensor*> params, AdamConfig config)
    : params_(std::move(params)), config_(config), lr_(config.learning_rate) {
  if (config_.learning_rate <= 0.0) throw ValidationError("adam: learning rate must be positive");
  if (config_.decay_factor <= 0.0 || config_.decay_factor > 1.0)
    throw ValidationError("adam: decay factor must be in (0, 1]");
  if (config_.decay_interval <= 0) throw ValidationError("adam: decay interval must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ParamTensor* p : params_) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void AdamOptimizer::apply() {
  for (const ParamTensor* p : params_)
    if (!p->grad_finite())
      throw NumericError("adam: non-finite gradient in tensor '" + p->name + "'");

  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamTensor& p = *params_[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    const Matrix m_hat = m_[i] / bc1;
    const Matrix v_hat = v_[i] / bc2;
    p.values.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + config_.epsilon);
    p.zero_grad();
  }
}

void AdamOptimizer::end_update() {
  ++updates_;
  if (updates_ % config_.decay_interval == 0) lr_ *= config_.decay_factor;
}

AdamOptimizer::State AdamOptimizer::state() const {
  return State{m_, v_, steps_, updates_, lr_};
}

void AdamOptimizer::restore(const State& state) {
  if (state.m.size() != params_.size() || state.v.size() != params_.size())
    throw ValidationError("adam: restored state does not match registered parameters");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (state.m[i].rows() != params_[i]->rows() || state.m[i].cols() != params_[i]->cols())
      throw ValidationError("adam: restored moment shape mismatch for '" + params_[i]->name + "'");
  m_ = state.m;
  v_ = state.v;
  steps_ = state.steps;
  updates_ = state.updates;
  lr_ = state.lr;
}

}  // namespace mrte
