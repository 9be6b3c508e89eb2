#pragma once

// Partition agreement measures and the moment estimator of lambda.

#include "hbcm/common.hpp"

#include <vector>

namespace hbcm {

// Adjusted Rand index from exact pair counts. Label values are arbitrary
// non-negative integers; only the partitions matter.
double adjusted_rand_index(const Labels& a, const Labels& b);

struct SoftConfusion {
  Matrix r;  // K x K, R(k, k') = (1/P) sum_j q(j, k) q~(j, k')
};

SoftConfusion soft_confusion(const Matrix& q, const Matrix& q_tilde);

// Optimal assignment maximizing sum_k cost(k, perm[k]) (Hungarian method).
std::vector<int> max_weight_assignment(const Matrix& weight);

// min over column permutations s of 1 - Tr(R(q, I_truth o s)). Refuses K > 10.
double min_misclassification(const Matrix& q, const Labels& truth);

// lambda_hat_j = (1 / (P N)) sum_j' sum_i X_ij X_ij'.
Vector moment_lambda(const Matrix& x);

}  // namespace hbcm
