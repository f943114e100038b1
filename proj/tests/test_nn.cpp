#include <cstring>

#include "doctest.h"
#include "mrte/adam.hpp"
#include "mrte/checkpoint.hpp"
#include "mrte/dense.hpp"
#include "mrte/error.hpp"
#include "mrte/gru.hpp"
#include "mrte/softmax.hpp"

using namespace mrte;

namespace {

// Gradient oracle: central finite differences on a scalar loss, independent
// of the backward implementations under test.
constexpr double kFdStep = 1e-6;

bool grad_close(double analytic, double numeric) {
  return std::abs(analytic - numeric) <= 1e-5 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-8;
}

template <typename LossFn>
void check_tensor_gradient(ParamTensor& p, const Matrix& analytic, LossFn loss, Rng& rng,
                           int coords = 10) {
  for (int c = 0; c < coords; ++c) {
    const Index i = rng.uniform_int(static_cast<int>(p.rows()));
    const Index j = rng.uniform_int(static_cast<int>(p.cols()));
    const double saved = p.values(i, j);
    p.values(i, j) = saved + kFdStep;
    const double up = loss();
    p.values(i, j) = saved - kFdStep;
    const double down = loss();
    p.values(i, j) = saved;
    const double numeric = (up - down) / (2.0 * kFdStep);
    INFO(p.name, "(", i, ",", j, "): analytic ", analytic(i, j), " numeric ", numeric);
    CHECK(grad_close(analytic(i, j), numeric));
  }
}

Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("dense forward: identity and relu basics") {
  DenseLayer layer("fc", 2, 2, Activation::kIdentity);
  layer.weight.values = Matrix::Identity(2, 2);
  Vector in(2);
  in << 1.0, 2.0;
  const Vector out = dense_forward(layer, in);
  CHECK(out(0) == doctest::Approx(1.0));
  CHECK(out(1) == doctest::Approx(2.0));

  layer.activation = Activation::kRelu;
  in << -3.0, 4.0;
  const Vector relu_out = dense_forward(layer, in);
  CHECK(relu_out(0) == 0.0);
  CHECK(relu_out(1) == doctest::Approx(4.0));
}

TEST_CASE("dense forward matches double-loop matrix product") {
  Rng rng(11);
  DenseLayer layer("fc", 4, 3, Activation::kIdentity);
  layer.init(rng);
  const Vector in = Vector::Ones(3);
  const Vector out = dense_forward(layer, in);
  for (Index i = 0; i < 4; ++i) {
    double expected = layer.bias.values(i, 0);
    for (Index j = 0; j < 3; ++j) expected += layer.weight.values(i, j) * in(j);
    CHECK(out(i) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("dense forward rejects dimension mismatch") {
  DenseLayer layer("fc", 4, 3, Activation::kTanh);
  const Vector bad = Vector::Ones(5);
  CHECK_THROWS_AS(dense_forward(layer, bad), ValidationError);
}

TEST_CASE("dense gradients match finite differences over random instances") {
  Rng rng(21);
  for (int inst = 0; inst < 100; ++inst) {
    const Index out_dim = 1 + rng.uniform_int(5);
    const Index in_dim = 1 + rng.uniform_int(5);
    const Activation act = static_cast<Activation>(rng.uniform_int(3));
    DenseLayer layer("fc", out_dim, in_dim, act);
    layer.init(rng);
    for (Index i = 0; i < out_dim; ++i) layer.bias.values(i, 0) = rng.uniform(-0.5, 0.5);
    const Vector x = random_vector(in_dim, rng);
    const Vector r = random_vector(out_dim, rng);

    auto loss = [&] { return r.dot(dense_forward(layer, x)); };
    DenseTape tape;
    dense_forward(layer, Matrix(x), &tape);
    layer.weight.zero_grad();
    layer.bias.zero_grad();
    dense_backward(layer, tape, Matrix(r));
    check_tensor_gradient(layer.weight, layer.weight.grad, loss, rng, 4);
    check_tensor_gradient(layer.bias, layer.bias.grad, loss, rng, 2);
  }
}

TEST_CASE("gru: zero weights halve the hidden state") {
  GruCell cell("gru", 4, 3);
  Rng rng(3);
  const Vector h = random_vector(4, rng);
  const Vector x = random_vector(3, rng);
  const Vector out = gru_forward(cell, h, x);
  for (Index i = 0; i < 4; ++i) CHECK(out(i) == doctest::Approx(0.5 * h(i)).epsilon(1e-12));
}

TEST_CASE("gru: zero hidden and zero candidate weights give zero output") {
  GruCell cell("gru", 4, 3);
  Rng rng(5);
  glorot_init(cell.w_update, rng);
  glorot_init(cell.w_reset, rng);
  // Candidate weights stay zero.
  const Vector out = gru_forward(cell, Vector::Zero(4), random_vector(3, rng));
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gru keeps outputs inside (-1, 1) for hidden states inside (-1, 1)") {
  Rng rng(7);
  for (int inst = 0; inst < 50; ++inst) {
    GruCell cell("gru", 6, 4);
    cell.init(rng);
    const Vector h = random_vector(6, rng, 0.999);
    const Vector x = random_vector(4, rng, 3.0);
    const Vector out = gru_forward(cell, h, x);
    CHECK(out.cwiseAbs().maxCoeff() < 1.0);
    CHECK(out.size() == 6);
  }
}

TEST_CASE("gru gradients match finite differences over random instances") {
  Rng rng(9);
  for (int inst = 0; inst < 100; ++inst) {
    GruCell cell("gru", 4, 3);
    cell.init(rng);
    const Vector h = random_vector(4, rng);
    const Vector x = random_vector(3, rng);
    const Vector r = random_vector(4, rng);

    auto loss = [&] { return r.dot(gru_forward(cell, h, x)); };
    GruTape tape;
    gru_forward(cell, Matrix(h), Matrix(x), &tape);
    for (ParamTensor* p : {&cell.w_update, &cell.b_update, &cell.w_reset, &cell.b_reset,
                           &cell.w_cand, &cell.b_cand})
      p->zero_grad();
    Matrix dx;
    const Matrix dh = gru_backward(cell, tape, Matrix(r), &dx);

    check_tensor_gradient(cell.w_update, cell.w_update.grad, loss, rng, 3);
    check_tensor_gradient(cell.w_reset, cell.w_reset.grad, loss, rng, 3);
    check_tensor_gradient(cell.w_cand, cell.w_cand.grad, loss, rng, 3);
    check_tensor_gradient(cell.b_cand, cell.b_cand.grad, loss, rng, 2);

    // Input gradients via the same central differences.
    for (int c = 0; c < 3; ++c) {
      Vector hp = h;
      const Index i = rng.uniform_int(4);
      hp(i) = h(i) + kFdStep;
      const double up = r.dot(gru_forward(cell, hp, x));
      hp(i) = h(i) - kFdStep;
      const double down = r.dot(gru_forward(cell, hp, x));
      CHECK(grad_close(dh(i, 0), (up - down) / (2.0 * kFdStep)));
    }
  }
}

TEST_CASE("softmax: uniform, dominant, and hand-computed cases") {
  Vector uniform(3);
  uniform << 0.0, 0.0, 0.0;
  const Vector p = softmax(uniform);
  for (Index i = 0; i < 3; ++i) CHECK(p(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  Vector dominant(2);
  dominant << 1000.0, 0.0;
  const Vector pd = softmax(dominant);
  CHECK(pd(0) >= 1.0 - 1e-12);
  CHECK(std::isfinite(pd(1)));

  Vector hand(2);
  hand << std::log(1.0), std::log(3.0);
  const Vector ph = softmax(hand);
  CHECK(ph(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ph(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax is a probability distribution for logit magnitudes up to 1e4") {
  Rng rng(13);
  for (int inst = 0; inst < 200; ++inst) {
    const Index n = 1 + rng.uniform_int(30);
    const Vector logits = random_vector(n, rng, 1e4);
    const Vector p = softmax(logits);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax_sample: distribution and determinism") {
  Vector logits(3);
  logits << std::log(0.2), std::log(0.5), std::log(0.3);
  Rng rng(17);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i) {
    Rng draw = Rng::child(17, static_cast<std::uint64_t>(i));
    const auto [idx, logp] = softmax_sample(logits, draw);
    ++counts[idx];
    CHECK(logp == doctest::Approx(logits(idx) - log_sum_exp(logits)).epsilon(1e-12));
  }
  CHECK(counts[1] > counts[2]);
  CHECK(counts[2] > counts[0]);
  CHECK(std::abs(counts[1] / 30000.0 - 0.5) < 0.02);

  CHECK_THROWS_AS(softmax(Vector{}), ContractError);
}

TEST_CASE("forward passes are pure: repeated calls bit-identical") {
  Rng rng(19);
  DenseLayer layer("fc", 6, 5, Activation::kTanh);
  layer.init(rng);
  const Vector x = random_vector(5, rng);
  const Vector a = dense_forward(layer, x);
  const Vector b = dense_forward(layer, x);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 6) == 0);

  GruCell cell("gru", 5, 5);
  cell.init(rng);
  const Vector h = random_vector(5, rng);
  const Vector g1 = gru_forward(cell, h, x);
  const Vector g2 = gru_forward(cell, h, x);
  CHECK(std::memcmp(g1.data(), g2.data(), sizeof(double) * 5) == 0);
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
  ParamTensor p("p", 1, 1);
  p.values(0, 0) = 0.7;
  AdamOptimizer opt({&p}, AdamConfig{});
  opt.apply();
  CHECK(p.values(0, 0) == 0.7);
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
  ParamTensor p("p", 1, 1);
  p.values(0, 0) = 1.0;
  AdamConfig cfg;
  AdamOptimizer opt({&p}, cfg);
  p.grad(0, 0) = 1.0;
  opt.apply();
  // Bias-corrected first step: lr * 1 / (1 + eps).
  const double expected = 1.0 - cfg.learning_rate / (1.0 + cfg.epsilon);
  CHECK(p.values(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(p.grad(0, 0) == 0.0);  // gradients zeroed afterward
}

TEST_CASE("adam: exponential decay, factor 0.96 every update") {
  ParamTensor p("p", 1, 1);
  AdamConfig cfg;
  cfg.decay_factor = 0.96;
  cfg.decay_interval = 1;
  AdamOptimizer opt({&p}, cfg);
  opt.end_update();
  opt.end_update();
  CHECK(opt.learning_rate() == doctest::Approx(2e-4 * 0.96 * 0.96).epsilon(1e-12));

  // Non-increasing over many updates.
  double prev = opt.learning_rate();
  for (int i = 0; i < 100; ++i) {
    opt.end_update();
    CHECK(opt.learning_rate() <= prev);
    CHECK(opt.learning_rate() > 0.0);
    prev = opt.learning_rate();
  }
}

TEST_CASE("adam: non-finite gradient aborts and names the tensor") {
  ParamTensor a("layer.alpha", 2, 2), b("layer.beta", 2, 2);
  AdamOptimizer opt({&a, &b}, AdamConfig{});
  a.values.setOnes();
  a.grad.setOnes();
  b.grad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  const Matrix before = a.values;
  CHECK_THROWS_WITH_AS(opt.apply(), doctest::Contains("layer.beta"), NumericError);
  CHECK(a.values == before);  // nothing was touched
}

TEST_CASE("checkpoint: tensors round-trip bit-exactly through JSON") {
  Rng rng(23);
  ParamTensor w("block.weight", 7, 5), b("block.bias", 7, 1);
  glorot_init(w, rng);
  glorot_init(b, rng);
  w.values(0, 0) = 1.0 / 3.0;
  w.values(1, 1) = 1e-17;

  const nlohmann::json j = nlohmann::json::parse(tensors_to_json({&w, &b}).dump());
  ParamTensor w2("block.weight", 7, 5), b2("block.bias", 7, 1);
  tensors_from_json(j, {&w2, &b2});
  CHECK(std::memcmp(w.values.data(), w2.values.data(), sizeof(double) * 35) == 0);
  CHECK(std::memcmp(b.values.data(), b2.values.data(), sizeof(double) * 7) == 0);

  ParamTensor wrong("block.weight", 5, 7);
  CHECK_THROWS_AS(tensors_from_json(j, {&wrong}), ValidationError);
}

TEST_CASE("rng state save/load resumes the exact stream") {
  Rng rng(29);
  for (int i = 0; i < 100; ++i) rng.next_u64();
  const std::string state = rng.save_state();
  const double expected = rng.uniform01();
  Rng other(1);
  other.load_state(state);
  CHECK(other.uniform01() == expected);
}
