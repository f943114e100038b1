#pragma once

#include <string>

#include "mrte/tensor.hpp"

namespace mrte {

// Gated recurrent cell over the concatenated [hidden; input] vector:
//   z = sigmoid(Wz [h;x] + bz)
//   r = sigmoid(Wr [h;x] + br)
//   c = tanh(Wc [r.*h; x] + bc)
//   h' = (1-z).*h + z.*c
// Matrix arguments are processed column-wise (one sample per column).
struct GruCell {
  ParamTensor w_update, b_update;
  ParamTensor w_reset, b_reset;
  ParamTensor w_cand, b_cand;
  Index hidden, input;

  GruCell(const std::string& prefix, Index hidden_, Index input_)
      : w_update(prefix + ".update.weight", hidden_, hidden_ + input_),
        b_update(prefix + ".update.bias", hidden_, 1),
        w_reset(prefix + ".reset.weight", hidden_, hidden_ + input_),
        b_reset(prefix + ".reset.bias", hidden_, 1),
        w_cand(prefix + ".cand.weight", hidden_, hidden_ + input_),
        b_cand(prefix + ".cand.bias", hidden_, 1),
        hidden(hidden_),
        input(input_) {}

  void init(Rng& rng) {
    glorot_init(w_update, rng);
    glorot_init(w_reset, rng);
    glorot_init(w_cand, rng);
  }
};

struct GruTape {
  Matrix h_prev, x;    // inputs
  Matrix z, r, gated;  // gate values; gated = r.*h_prev
  Matrix cand;         // candidate
};

Matrix gru_forward(const GruCell& cell, const Matrix& hidden, const Matrix& input,
                   GruTape* tape = nullptr);
Vector gru_forward(const GruCell& cell, const Vector& hidden, const Vector& input);

// Accumulates weight gradients; returns dL/dh_prev and, if dx != nullptr,
// writes dL/dx.
Matrix gru_backward(GruCell& cell, const GruTape& tape, const Matrix& dh_new,
                    Matrix* dx = nullptr);

}  // namespace mrte
