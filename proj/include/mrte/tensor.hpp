#pragma once

#include <string>

#include "mrte/linalg.hpp"
#include "mrte/rng.hpp"

namespace mrte {

// A named trainable weight block. Vectors are stored as n-by-1 matrices.
// `grad` always has the same shape as `values` and accumulates until the
// optimizer consumes it.
struct ParamTensor {
  std::string name;
  Matrix values;
  Matrix grad;

  ParamTensor(std::string name_, Index rows, Index cols)
      : name(std::move(name_)),
        values(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)) {}

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  void zero_grad() { grad.setZero(); }
  bool values_finite() const { return values.allFinite(); }
  bool grad_finite() const { return grad.allFinite(); }
};

// Uniform init in +-sqrt(6/(fan_in+fan_out)), fan_in = cols, fan_out = rows.
inline void glorot_init(ParamTensor& p, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(p.rows() + p.cols()));
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i) p.values(i, j) = rng.uniform(-bound, bound);
}

}  // namespace mrte
