#include "mrte/gru.hpp"

#include "mrte/error.hpp"

namespace mrte {

namespace {

Matrix sigmoid(const Matrix& m) {
  return (1.0 / (1.0 + (-m.array()).exp())).matrix();
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Matrix affine(const ParamTensor& w, const ParamTensor& b, const Matrix& x) {
  Matrix pre = w.values * x;
  pre.colwise() += Vector(b.values.col(0));
  return pre;
}

}  // namespace

Matrix gru_forward(const GruCell& cell, const Matrix& hidden, const Matrix& input,
                   GruTape* tape) {
  if (hidden.rows() != cell.hidden || input.rows() != cell.input ||
      hidden.cols() != input.cols())
    throw ValidationError("gru_forward: dimension mismatch (hidden " +
                          std::to_string(hidden.rows()) + "x" + std::to_string(hidden.cols()) +
                          ", input " + std::to_string(input.rows()) + "x" +
                          std::to_string(input.cols()) + ")");
  const Matrix hx = vstack(hidden, input);
  const Matrix z = sigmoid(affine(cell.w_update, cell.b_update, hx));
  const Matrix r = sigmoid(affine(cell.w_reset, cell.b_reset, hx));
  const Matrix gated = r.cwiseProduct(hidden);
  const Matrix cand = affine(cell.w_cand, cell.b_cand, vstack(gated, input))
                          .array()
                          .tanh()
                          .matrix();
  Matrix h_new = (1.0 - z.array()).matrix().cwiseProduct(hidden) + z.cwiseProduct(cand);
  if (tape != nullptr) {
    tape->h_prev = hidden;
    tape->x = input;
    tape->z = z;
    tape->r = r;
    tape->gated = gated;
    tape->cand = cand;
  }
  return h_new;
}

Vector gru_forward(const GruCell& cell, const Vector& hidden, const Vector& input) {
  return gru_forward(cell, Matrix(hidden), Matrix(input), nullptr).col(0);
}

Matrix gru_backward(GruCell& cell, const GruTape& tape, const Matrix& dh_new, Matrix* dx) {
  const Index h = cell.hidden;
  const Index n = tape.h_prev.cols();
  if (dh_new.rows() != h || dh_new.cols() != n)
    throw ValidationError("gru_backward: gradient shape mismatch");

  const Matrix dcand = dh_new.cwiseProduct(tape.z);
  const Matrix dz = dh_new.cwiseProduct(tape.cand - tape.h_prev);
  Matrix dh = dh_new.cwiseProduct((1.0 - tape.z.array()).matrix());

  // Candidate branch: c = tanh(Wc [gated; x] + bc).
  const Matrix dcand_pre = dcand.cwiseProduct((1.0 - tape.cand.array().square()).matrix());
  cell.w_cand.grad.noalias() += dcand_pre * vstack(tape.gated, tape.x).transpose();
  cell.b_cand.grad.col(0).noalias() += dcand_pre.rowwise().sum();
  const Matrix dgx = cell.w_cand.values.transpose() * dcand_pre;
  const Matrix dgated = dgx.topRows(h);
  Matrix dx_total = dgx.bottomRows(cell.input);

  const Matrix dr = dgated.cwiseProduct(tape.h_prev);
  dh += dgated.cwiseProduct(tape.r);

  // Gate branches through sigmoid.
  const Matrix dz_pre = dz.cwiseProduct(tape.z.cwiseProduct((1.0 - tape.z.array()).matrix()));
  const Matrix dr_pre = dr.cwiseProduct(tape.r.cwiseProduct((1.0 - tape.r.array()).matrix()));
  const Matrix hx_t = vstack(tape.h_prev, tape.x).transpose();
  cell.w_update.grad.noalias() += dz_pre * hx_t;
  cell.b_update.grad.col(0).noalias() += dz_pre.rowwise().sum();
  cell.w_reset.grad.noalias() += dr_pre * hx_t;
  cell.b_reset.grad.col(0).noalias() += dr_pre.rowwise().sum();

  const Matrix dhx = cell.w_update.values.transpose() * dz_pre +
                     cell.w_reset.values.transpose() * dr_pre;
  dh += dhx.topRows(h);
  dx_total += dhx.bottomRows(cell.input);
  if (dx != nullptr) *dx = std::move(dx_total);
  return dh;
}

}  // namespace mrte
