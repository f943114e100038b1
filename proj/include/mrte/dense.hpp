#pragma once

#include <string>

#include "mrte/tensor.hpp"

namespace mrte {

enum class Activation { kIdentity, kRelu, kTanh };

// Fully connected layer y = act(W x + b). Inputs are column vectors; the
// matrix overloads treat every column as an independent sample.
struct DenseLayer {
  ParamTensor weight;  // [out x in]
  ParamTensor bias;    // [out x 1]
  Activation activation;

  DenseLayer(const std::string& prefix, Index out, Index in, Activation act)
      : weight(prefix + ".weight", out, in),
        bias(prefix + ".bias", out, 1),
        activation(act) {}

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }

  void init(Rng& rng) { glorot_init(weight, rng); }
};

// Captures what the backward pass needs.
struct DenseTape {
  Matrix input;  // [in x batch]
  Matrix pre;    // [out x batch], pre-activation
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& input, DenseTape* tape = nullptr);
Vector dense_forward(const DenseLayer& layer, const Vector& input);

// Accumulates weight/bias gradients and returns dL/dinput.
Matrix dense_backward(DenseLayer& layer, const DenseTape& tape, const Matrix& dout);

}  // namespace mrte
