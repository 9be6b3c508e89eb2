#include "hbcm/simulate.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace hbcm;

namespace {

Matrix empirical_cov(const Matrix& x) { return sample_covariance(center_columns(x)); }

}  // namespace

TEST(Labels, DegenerateSimplex) {
  Vector pi(3);
  pi << 1, 0, 0;
  const Labels l = generate_labels(50, pi, 1);
  EXPECT_TRUE(std::all_of(l.begin(), l.end(), [](int c) { return c == 0; }));
}

TEST(Labels, Proportions) {
  const Labels l = generate_labels(30000, Vector::Constant(3, 1.0 / 3), 2);
  for (int k = 0; k < 3; ++k) {
    const double frac = std::count(l.begin(), l.end(), k) / 30000.0;
    EXPECT_NEAR(frac, 1.0 / 3, 0.02);
  }
}

TEST(Labels, SeedDeterminismAndValidation) {
  const Vector pi = Vector::Constant(4, 0.25);
  EXPECT_EQ(generate_labels(100, pi, 3), generate_labels(100, pi, 3));
  EXPECT_NE(generate_labels(100, pi, 3), generate_labels(100, pi, 4));
  Vector bad(2);
  bad << 0.7, 0.7;
  EXPECT_THROW(generate_labels(10, bad, 1), ValidationError);
}

TEST(Dataset, NoiselessColumnsCoincide) {
  ParameterSystem s = homogeneous_system(5, 1, 1.0, 1e-12, 1.0, 0.5, 1);
  const Dataset d = generate_dataset(100, s, NoiseSpec::gaussian(), 2);
  for (int j = 1; j < 5; ++j) {
    EXPECT_LT((d.x.col(j) - d.x.col(0)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Dataset, GaussianCovarianceMatchesModel) {
  ParameterSystem s;
  s.p = 4;
  s.k = 2;
  s.labels = {0, 0, 1, 1};
  s.lambda = Vector(4);
  s.lambda << 1.0, -0.8, 1.5, 0.6;
  s.sigma2 = Vector(4);
  s.sigma2 << 0.5, 1.0, 0.8, 1.2;
  s.omega = Matrix(2, 2);
  s.omega << 1.0, 0.5, 0.5, 1.0;
  const Dataset d = generate_dataset(200000, s, NoiseSpec::gaussian(), 3);
  const Matrix sigma = assemble_covariance(s);
  const Matrix emp = empirical_cov(d.x);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      EXPECT_NEAR(emp(a, b), sigma(a, b), 0.05 * std::abs(sigma(a, b))) << a << "," << b;
    }
  }
  EXPECT_EQ(d.truth.labels, s.labels);
  EXPECT_EQ(d.truth.alpha.rows(), 200000);
  EXPECT_EQ(d.truth.alpha.cols(), 2);
}

TEST(Dataset, StudentTVariance) {
  ParameterSystem s = homogeneous_system(3, 1, 1.0, 1.0, 1.0, 0.5, 4);
  const double v = 5.0;
  const Matrix sigma = assemble_covariance(s);
  const Matrix std_t =
      empirical_cov(generate_dataset(200000, s, NoiseSpec::student_t_standardized(v), 5).x);
  const Matrix raw_t = empirical_cov(generate_dataset(200000, s, NoiseSpec::student_t(v), 6).x);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(std_t(j, j), sigma(j, j), 0.05 * sigma(j, j));
    const double expected = 1.0 + v / (v - 2.0);
    EXPECT_NEAR(raw_t(j, j), expected, 0.05 * expected);
  }
  EXPECT_THROW(generate_dataset(10, s, NoiseSpec::student_t(2.0), 1), ValidationError);
}

TEST(Dataset, SeedDeterminism) {
  const ParameterSystem s = table1_system(20, 2, 7);
  const Dataset a = generate_dataset(30, s, NoiseSpec::gaussian(), 8);
  const Dataset b = generate_dataset(30, s, NoiseSpec::gaussian(), 8);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.truth.alpha, b.truth.alpha);
}

TEST(Table1System, Moments) {
  const ParameterSystem s = table1_system(100000, 3, 9);
  EXPECT_EQ(s.omega.diagonal(), Vector::Ones(3));
  EXPECT_EQ(s.omega(0, 1), 0.5);
  EXPECT_EQ(s.omega(2, 1), 0.5);
  EXPECT_GE(s.sigma2.minCoeff(), 1.0);
  const double mean = s.lambda.mean();
  const double var = (s.lambda.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.05);
  EXPECT_NEAR(s.sigma2.mean(), 3.0, 0.05);
}

TEST(Perturbed, ZeroStrengthIsModelCovariance) {
  const ParameterSystem s = table1_system(30, 3, 10);
  const Matrix w = spike_matrix(30, 10, 11);
  EXPECT_EQ(perturbed_covariance(s, w, 0.0), assemble_covariance(s));
}

TEST(Perturbed, SpikeMatrixMoments) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(spike_matrix(40, 10, seed));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  }
  const int p = 1500;  // 1.12e6 off-diagonal entries
  const Matrix w = spike_matrix(p, 10, 12);
  double sum = 0.0, sq = 0.0;
  long count = 0;
  for (int a = 0; a < p; ++a) {
    for (int b = a + 1; b < p; ++b) {
      sum += w(a, b);
      sq += w(a, b) * w(a, b);
      ++count;
    }
  }
  const double mean = sum / count;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq / count - mean * mean, 1.0, 0.05);
}

TEST(Perturbed, DatasetShape) {
  const ParameterSystem s = homogeneous_system(20, 2, 1.0, 1.0, 1.0, 0.5, 13);
  const Dataset d = perturbed_covariance_dataset(50, s, 0.3, 10, 14);
  EXPECT_EQ(d.x.rows(), 50);
  EXPECT_EQ(d.x.cols(), 20);
  EXPECT_TRUE(d.x.allFinite());
  EXPECT_THROW(perturbed_covariance_dataset(50, s, -1.0, 10, 14), ValidationError);
}

TEST(Mislead, TierSizes) {
  const MisleadingSetup m = misleading_lambda_system(6.0, 15);
  ASSERT_EQ(m.system.p, 1000);
  EXPECT_EQ(m.system.k, 3);
  EXPECT_EQ(std::count(m.mislead.begin(), m.mislead.end(), 0), 330);
  EXPECT_EQ(std::count(m.mislead.begin(), m.mislead.end(), 1), 330);
  EXPECT_EQ(std::count(m.mislead.begin(), m.mislead.end(), 2), 340);
  EXPECT_EQ(m.system.lambda(0), 1.0);
  EXPECT_EQ(m.system.lambda(330), 5.0);
  EXPECT_EQ(m.system.lambda(999), 25.0);
}

TEST(PsdFactor, Reconstructs) {
  Matrix m(3, 3);
  m << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  const Matrix f = psd_factor(m);
  EXPECT_LT((f * f.transpose() - m).cwiseAbs().maxCoeff(), 1e-12);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_ANY_THROW(psd_factor(bad));
}
