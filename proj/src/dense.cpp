#include "mrte/dense.hpp"

#include "mrte/error.hpp"

namespace mrte {

namespace {

Matrix apply_activation(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::kIdentity:
      return pre;
    case Activation::kRelu:
      return pre.cwiseMax(0.0);
    case Activation::kTanh:
      return pre.array().tanh().matrix();
  }
  throw ContractError("unknown activation");
}

// d(act)/d(pre), expressed from the pre-activation.
Matrix activation_grad(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::kIdentity:
      return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::kRelu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: {
      Matrix t = pre.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
  }
  throw ContractError("unknown activation");
}

}  // namespace

Matrix dense_forward(const DenseLayer& layer, const Matrix& input, DenseTape* tape) {
  if (input.rows() != layer.in_dim())
    throw ValidationError("dense_forward: input dimension " + std::to_string(input.rows()) +
                          " does not match layer in-dimension " + std::to_string(layer.in_dim()) +
                          " (" + layer.weight.name + ")");
  Matrix pre = layer.weight.values * input;
  pre.colwise() += Vector(layer.bias.values.col(0));
  Matrix out = apply_activation(layer.activation, pre);
  if (tape != nullptr) {
    tape->input = input;
    tape->pre = std::move(pre);
  }
  return out;
}

Vector dense_forward(const DenseLayer& layer, const Vector& input) {
  return dense_forward(layer, Matrix(input), nullptr).col(0);
}

Matrix dense_backward(DenseLayer& layer, const DenseTape& tape, const Matrix& dout) {
  if (dout.rows() != layer.out_dim() || dout.cols() != tape.pre.cols())
    throw ValidationError("dense_backward: gradient shape mismatch (" + layer.weight.name + ")");
  const Matrix dpre = dout.cwiseProduct(activation_grad(layer.activation, tape.pre));
  layer.weight.grad.noalias() += dpre * tape.input.transpose();
  layer.bias.grad.col(0).noalias() += dpre.rowwise().sum();
  return layer.weight.values.transpose() * dpre;
}

}  // namespace mrte
