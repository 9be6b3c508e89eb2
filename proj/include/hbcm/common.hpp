#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Hard community labels, 0-based internally. Files and the CLI use 1-based.
using Labels = std::vector<int>;

using Rng = std::mt19937_64;

// Raised when inputs break a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a computation hits a numerical dead end (singular system,
// non-finite objective, failed factorization).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return master ^ mix_seed(mix_seed(a) ^ (b + 0x632be59bd9b4e019ULL));
}

// P x K one-hot membership matrix. Throws if a label is outside [0, k).
Matrix one_hot(const Labels& labels, int k);

// Row-wise argmax, ties resolved to the lowest index.
Labels argmax_rows(const Matrix& m);

// Number of classes implied by the labels (max + 1); validates non-negativity.
int num_classes(const Labels& labels);

// Sample covariance X^T X / N of an already centered matrix.
Matrix sample_covariance(const Matrix& x);

// Copy of x with each column shifted to zero mean.
Matrix center_columns(const Matrix& x);

// Throws ValidationError unless x is at least 2x2 with finite entries.
void check_data(const Matrix& x);

}  // namespace hbcm
