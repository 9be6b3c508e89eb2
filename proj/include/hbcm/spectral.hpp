#pragma once

// Spectral clustering of features on the absolute sample correlation kernel.

#include "hbcm/common.hpp"

#include <cstdint>
#include <vector>

namespace hbcm {

struct KernelMatrix {
  Matrix m;  // P x P, symmetric, unit diagonal, entries in [0, 1]
};

// |Pearson correlation| between columns after centering. Throws
// ValidationError naming the first column whose variance is <= 1e-12.
KernelMatrix abs_correlation(const Matrix& x);

enum class Laplacian { None, Normalized };

struct KMeansOptions {
  int restarts = 10;
  int max_iters = 300;
};

struct SpectralOptions {
  Laplacian laplacian = Laplacian::None;
  // Scale each embedded row to unit length before k-means (zero rows are
  // left alone). Off by default: the raw embedding keeps the per-feature
  // signal strength, which is the behavior the benchmarks compare against.
  bool row_normalize = false;
  KMeansOptions kmeans;
};

struct KMeansResult {
  Labels labels;
  Matrix centers;           // K x D
  double wcss = 0.0;        // within-cluster sum of squares
  std::vector<double> trace;  // WCSS after each Lloyd iteration of the kept run
  std::vector<double> restart_wcss;
};

// k-means++ seeding followed by Lloyd iterations until assignments stop
// changing; the restart with the smallest WCSS is kept. Rows are visited in a
// canonical (lexicographic) order so the result does not depend on the input
// row order. Throws NumericalError if every restart leaves a cluster empty.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    const KMeansOptions& opts = {});

struct Embedding {
  Vector eigenvalues;   // top-K, non-increasing
  Matrix eigenvectors;  // P x K, orthonormal columns
};

// Leading K eigenpairs of the kernel (or of D^-1/2 W D^-1/2 for the
// normalized variant). Each eigenvector's sign is fixed so that its entry
// sum is positive.
Embedding spectral_embedding(const KernelMatrix& kernel, int k,
                             Laplacian laplacian = Laplacian::None);

Labels spectral_cluster(const KernelMatrix& kernel, int k, std::uint64_t seed,
                        const SpectralOptions& opts = {});

}  // namespace hbcm
