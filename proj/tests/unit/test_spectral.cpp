#include "hbcm/metrics.hpp"
#include "hbcm/simulate.hpp"
#include "hbcm/spectral.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace hbcm;

namespace {

Matrix gaussian(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  return Matrix::NullaryExpr(n, p, [&] { return nd(rng); });
}

}  // namespace

TEST(AbsCorrelation, PerfectAndAntiCorrelation) {
  Matrix x = gaussian(50, 3, 1);
  x.col(1) = 2.0 * x.col(0);
  x.col(2) = -x.col(0);
  const KernelMatrix k = abs_correlation(x);
  EXPECT_NEAR(k.m(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(k.m(0, 2), 1.0, 1e-12);
}

TEST(AbsCorrelation, IndependentColumnsNearZero) {
  const KernelMatrix k = abs_correlation(gaussian(10000, 6, 2));
  Matrix off = k.m;
  off.diagonal().setZero();
  EXPECT_LT(off.maxCoeff(), 0.05);
  EXPECT_GE(off.minCoeff(), 0.0);
}

TEST(AbsCorrelation, ScaleInvariantAndRejectsConstantColumn) {
  Matrix x = gaussian(40, 5, 3);
  Vector b(5);
  b << 2.0, -0.5, 3.0, 1e-3, -7.0;
  EXPECT_LT((abs_correlation(x * b.asDiagonal()).m - abs_correlation(x).m).cwiseAbs().maxCoeff(),
            1e-12);
  x.col(3).setConstant(4.0);
  try {
    abs_correlation(x);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos);
  }
}

TEST(Embedding, OrderedOrthonormal) {
  const ParameterSystem s = table1_system(40, 3, 4);
  const KernelMatrix k = abs_correlation(generate_dataset(200, s, NoiseSpec::gaussian(), 5).x);
  for (Laplacian lap : {Laplacian::None, Laplacian::Normalized}) {
    const Embedding e = spectral_embedding(k, 4, lap);
    for (int c = 1; c < 4; ++c) EXPECT_GE(e.eigenvalues(c - 1), e.eigenvalues(c));
    const Matrix gram = e.eigenvectors.transpose() * e.eigenvectors;
    EXPECT_LT((gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
    for (int c = 0; c < 4; ++c) EXPECT_GT(e.eigenvectors.col(c).sum(), -1e-12);
  }
}

TEST(Spectral, BlockDiagonalKernel) {
  KernelMatrix k;
  k.m = Matrix::Zero(10, 10);
  k.m.topLeftCorner(4, 4).setOnes();
  k.m.bottomRightCorner(6, 6).setOnes();
  const Labels truth = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(spectral_cluster(k, 2, 1), truth), 1.0);
  SpectralOptions normalized;
  normalized.row_normalize = true;
  normalized.laplacian = Laplacian::Normalized;
  EXPECT_DOUBLE_EQ(adjusted_rand_index(spectral_cluster(k, 2, 1, normalized), truth), 1.0);
  EXPECT_THROW(spectral_cluster(k, 1, 1), ValidationError);
  EXPECT_THROW(spectral_cluster(k, 11, 1), ValidationError);
}

TEST(Spectral, ColumnPermutationEquivariance) {
  const ParameterSystem s = table1_system(60, 3, 6);
  const Matrix x = generate_dataset(300, s, NoiseSpec::gaussian(), 7).x;
  std::vector<int> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), Rng(8));
  Matrix xp(x.rows(), 60);
  for (int j = 0; j < 60; ++j) xp.col(j) = x.col(perm[j]);
  const Labels a = spectral_cluster(abs_correlation(x), 3, 9);
  const Labels b = spectral_cluster(abs_correlation(xp), 3, 9);
  Labels a_perm(60);
  for (int j = 0; j < 60; ++j) a_perm[j] = a[perm[j]];
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a_perm, b), 1.0);
}

TEST(KMeans, MonotoneTraceAndBestRestart) {
  const Matrix pts = gaussian(300, 3, 10);
  for (int k = 2; k <= 6; ++k) {
    const KMeansResult r = kmeans(pts, k, 11);
    for (std::size_t t = 1; t < r.trace.size(); ++t) EXPECT_LE(r.trace[t], r.trace[t - 1] + 1e-12);
    ASSERT_EQ(r.restart_wcss.size(), 10u);
    for (double w : r.restart_wcss) EXPECT_LE(r.wcss, w);
    std::vector<int> counts(k, 0);
    for (int c : r.labels) ++counts[c];
    for (int c : counts) EXPECT_GT(c, 0);
  }
}

TEST(KMeans, RowOrderDoesNotMatter) {
  const Matrix pts = gaussian(100, 2, 12);
  Matrix rev = pts.colwise().reverse();
  const Labels a = kmeans(pts, 4, 13).labels;
  Labels b = kmeans(rev, 4, 13).labels;
  std::reverse(b.begin(), b.end());
  EXPECT_EQ(a, b);
}
