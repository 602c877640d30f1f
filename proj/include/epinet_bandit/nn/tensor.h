#pragma once

#include <Eigen/Core>

namespace epinet_bandit::nn {

// Row-major dense matrix; batches are stored one example per row.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline bool all_finite(const Tensor2& t) { return t.allFinite(); }

}  // namespace epinet_bandit::nn
