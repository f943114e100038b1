#pragma once

#include <utility>

#include "mrte/linalg.hpp"
#include "mrte/rng.hpp"

namespace mrte {

// Max-subtracted softmax; safe for logits up to ~1e300 apart.
Vector softmax(const Vector& logits);
double log_sum_exp(const Vector& logits);

// Draws an index from softmax(logits); returns (index, log-probability).
std::pair<int, double> softmax_sample(const Vector& logits, Rng& rng);

int argmax(const Vector& logits);

// Entropy of softmax(logits), -sum p log p.
double softmax_entropy(const Vector& logits);

}  // namespace mrte
