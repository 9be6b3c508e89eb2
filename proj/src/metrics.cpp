#include "hbcm/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace hbcm {

namespace {

using u128 = unsigned __int128;
using i128 = __int128;

u128 pairs(std::uint64_t n) { return static_cast<u128>(n) * (n - (n > 0)) / 2; }

}  // namespace

double adjusted_rand_index(const Labels& a, const Labels& b) {
  if (a.size() != b.size()) {
    throw ValidationError("label vectors differ in length: " +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.size() < 2) throw ValidationError("ARI needs at least 2 items");

  std::map<std::pair<int, int>, std::uint64_t> cells;
  std::map<int, std::uint64_t> rows;
  std::map<int, std::uint64_t> cols;
  for (std::size_t j = 0; j < a.size(); ++j) {
    ++cells[{a[j], b[j]}];
    ++rows[a[j]];
    ++cols[b[j]];
  }
  u128 index = 0;
  for (const auto& [key, n] : cells) index += pairs(n);
  u128 sum_a = 0;
  for (const auto& [key, n] : rows) sum_a += pairs(n);
  u128 sum_b = 0;
  for (const auto& [key, n] : cols) sum_b += pairs(n);
  const u128 total = pairs(a.size());

  // ARI = (index - sa sb / T) / ((sa + sb) / 2 - sa sb / T), scaled by 2T.
  const i128 num = 2 * (static_cast<i128>(index) * static_cast<i128>(total) -
                        static_cast<i128>(sum_a) * static_cast<i128>(sum_b));
  const i128 den = static_cast<i128>(sum_a + sum_b) * static_cast<i128>(total) -
                   2 * static_cast<i128>(sum_a) * static_cast<i128>(sum_b);
  if (den == 0) return 1.0;  // both partitions trivial and identical
  return static_cast<double>(static_cast<long double>(num) /
                             static_cast<long double>(den));
}

SoftConfusion soft_confusion(const Matrix& q, const Matrix& q_tilde) {
  if (q.rows() != q_tilde.rows() || q.cols() != q_tilde.cols()) {
    throw ValidationError("soft confusion needs matching P x K matrices");
  }
  if (q.rows() == 0) throw ValidationError("soft confusion needs P > 0");
  return {q.transpose() * q_tilde / static_cast<double>(q.rows())};
}

std::vector<int> max_weight_assignment(const Matrix& weight) {
  // Hungarian algorithm (potentials form) on cost = -weight, 1-based arrays.
  const int n = static_cast<int>(weight.rows());
  if (weight.cols() != n) throw ValidationError("assignment needs a square matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weight(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) perm[static_cast<std::size_t>(match[j] - 1)] = j - 1;
  return perm;
}

double min_misclassification(const Matrix& q, const Labels& truth) {
  const auto k = static_cast<int>(q.cols());
  if (k > 10) throw ValidationError("min_misclassification supports K <= 10");
  if (static_cast<Eigen::Index>(truth.size()) != q.rows()) {
    throw ValidationError("truth length must equal the number of rows of q");
  }
  if (num_classes(truth) > k) throw ValidationError("truth uses more than K classes");
  const SoftConfusion conf = soft_confusion(q, one_hot(truth, k));
  // Tr(R(q, I o s)) = sum_k R(k, s(k)); maximize over the assignment.
  const std::vector<int> perm = max_weight_assignment(conf.r);
  double trace = 0.0;
  for (int c = 0; c < k; ++c) trace += conf.r(c, perm[static_cast<std::size_t>(c)]);
  return std::clamp(1.0 - trace, 0.0, 1.0);
}

Vector moment_lambda(const Matrix& x) {
  if (!x.allFinite()) throw ValidationError("data matrix has non-finite entries");
  const double scale = static_cast<double>(x.rows()) * static_cast<double>(x.cols());
  return x.transpose() * x.rowwise().sum() / scale;
}

}  // namespace hbcm
