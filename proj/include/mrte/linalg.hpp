#pragma once

#include <Eigen/Dense>

namespace mrte {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace mrte
