#include "mrte/softmax.hpp"

#include <cmath>

#include "mrte/error.hpp"

namespace mrte {

namespace {

void check_logits(const Vector& logits) {
  require(logits.size() > 0, "softmax: empty logits");
  if (!logits.allFinite()) throw NumericError("softmax: non-finite logit");
}

}  // namespace

Vector softmax(const Vector& logits) {
  check_logits(logits);
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

double log_sum_exp(const Vector& logits) {
  check_logits(logits);
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

std::pair<int, double> softmax_sample(const Vector& logits, Rng& rng) {
  const Vector p = softmax(logits);
  const double u = rng.uniform01();
  double cum = 0.0;
  int idx = static_cast<int>(p.size()) - 1;
  for (int i = 0; i < p.size(); ++i) {
    cum += p(i);
    if (u < cum) {
      idx = i;
      break;
    }
  }
  const double logp = logits(idx) - log_sum_exp(logits);
  return {idx, logp};
}

int argmax(const Vector& logits) {
  check_logits(logits);
  Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

double softmax_entropy(const Vector& logits) {
  const Vector p = softmax(logits);
  const double lse = log_sum_exp(logits);
  double h = 0.0;
  for (int i = 0; i < p.size(); ++i) h -= p(i) * (logits(i) - lse);
  return h;
}

}  // namespace mrte
