#include "hbcm/model.hpp"
#include "hbcm/io.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace hbcm;

namespace {

ParameterSystem make(std::vector<double> lambda, std::vector<double> sigma2, Matrix omega,
                     Labels labels) {
  ParameterSystem s;
  s.p = static_cast<int>(lambda.size());
  s.k = static_cast<int>(omega.rows());
  s.lambda = Eigen::Map<Vector>(lambda.data(), s.p);
  s.sigma2 = Eigen::Map<Vector>(sigma2.data(), s.p);
  s.omega = omega;
  s.labels = std::move(labels);
  return s;
}

Matrix omega2(double diag, double off) {
  Matrix m(2, 2);
  m << diag, off, off, diag;
  return m;
}

ParameterSystem random_system(int p, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.5, 2.0);
  ParameterSystem s;
  s.p = p;
  s.k = k;
  s.labels.resize(p);
  for (int j = 0; j < p; ++j) s.labels[j] = j % k;
  s.lambda.resize(p);
  s.sigma2.resize(p);
  for (int j = 0; j < p; ++j) {
    double l = nd(rng);
    s.lambda(j) = l + (l >= 0 ? 0.3 : -0.3);
    s.sigma2(j) = ud(rng);
  }
  Matrix a = Matrix::NullaryExpr(k, k, [&] { return nd(rng); });
  s.omega = a * a.transpose() + Matrix::Identity(k, k);
  return s;
}

}  // namespace

TEST(Assemble, SingleCommunity) {
  Matrix omega(1, 1);
  omega << 1.0;
  Matrix expected(2, 2);
  expected << 1.5, 1.0, 1.0, 1.5;
  EXPECT_TRUE(assemble_covariance(make({1, 1}, {0.5, 0.5}, omega, {0, 0})).isApprox(expected));
  expected << 4.5, -2.0, -2.0, 1.5;
  EXPECT_TRUE(assemble_covariance(make({2, -1}, {0.5, 0.5}, omega, {0, 0})).isApprox(expected));
}

TEST(Assemble, TwoCommunities) {
  Matrix expected(3, 3);
  expected << 2, 1, 0.5, 1, 2, 0.5, 0.5, 0.5, 2;
  const Matrix sigma = assemble_covariance(make({1, 1, 1}, {1, 1, 1}, omega2(1, 0.5), {0, 0, 1}));
  EXPECT_LT((sigma - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Assemble, RejectsBadInput) {
  EXPECT_THROW(assemble_covariance(make({1, 0}, {1, 1}, omega2(1, 0.5), {0, 1})), ValidationError);
  EXPECT_THROW(assemble_covariance(make({1, 1}, {1, 0}, omega2(1, 0.5), {0, 1})), ValidationError);
  EXPECT_THROW(assemble_covariance(make({1, 1}, {1, 1}, omega2(1, 2.0), {0, 1})), ValidationError);
}

TEST(Assemble, SymmetricWithNoiseFloorEigenvalue) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ParameterSystem s = random_system(12, 3, seed);
    const Matrix sigma = assemble_covariance(s);
    EXPECT_EQ((sigma - sigma.transpose()).cwiseAbs().maxCoeff(), 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    EXPECT_GE(es.eigenvalues().minCoeff(), s.sigma2.minCoeff() - 1e-9);
  }
}

TEST(Canonicalize, WorkedExample) {
  const CanonicalSystem c = canonicalize(make({1, 1, 1, 1}, {1, 1, 1, 1}, omega2(1, 0.5), {0, 0, 1, 1}));
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(c.lambda_star(j), 0.75, 1e-14);
  EXPECT_NEAR(c.omega_star(0, 0), 16.0 / 9, 1e-14);
  EXPECT_NEAR(c.omega_star(0, 1), 8.0 / 9, 1e-14);
  EXPECT_NEAR(c.omega_star(1, 1), 16.0 / 9, 1e-14);
}

TEST(Canonicalize, PreservesCovarianceAndIsIdempotent) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ParameterSystem s = random_system(15, 3, seed);
    const CanonicalSystem c = canonicalize(s);
    const ParameterSystem cs = c.as_system(3);
    EXPECT_LT((assemble_covariance(s) - assemble_covariance(cs)).cwiseAbs().maxCoeff(), 1e-10);
    const CanonicalSystem cc = canonicalize(cs);
    EXPECT_LT((cc.lambda_star - c.lambda_star).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((cc.omega_star - c.omega_star).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((cc.multiplier.array() - 1.0).abs().maxCoeff(), 1e-9);

    // (1/P) sum_j' lambda*_j' omega*_{k, c_j'} = 1 for every k.
    const Vector row = c.omega_star * one_hot(s.labels, 3).transpose() * c.lambda_star / 15.0;
    EXPECT_LT((row.array() - 1.0).abs().maxCoeff(), 1e-10);
  }
}

TEST(Canonicalize, ScalarRescalingGivesSameRepresentative) {
  const ParameterSystem s = random_system(9, 3, 7);
  ParameterSystem t = s;
  t.lambda /= 2.0;
  t.omega *= 4.0;
  const CanonicalSystem a = canonicalize(s), b = canonicalize(t);
  EXPECT_LT((a.lambda_star - b.lambda_star).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.omega_star - b.omega_star).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Canonicalize, VanishingDenominatorNamesFeature) {
  // Community 1 sums lambda to zero and is uncorrelated with community 2.
  Matrix omega(2, 2);
  omega << 1, 0, 0, 1;
  try {
    canonicalize(make({1, -1, 1, 1}, {1, 1, 1, 1}, omega, {0, 0, 1, 1}));
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Equivalence, IdentityWitness) {
  const ParameterSystem s = random_system(9, 3, 3);
  const Equivalence e = systems_equivalent(s, s);
  ASSERT_TRUE(e.equivalent);
  EXPECT_EQ(e.witness->perm, (std::vector<int>{0, 1, 2}));
  EXPECT_LT((e.witness->d.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Equivalence, RescaledSystemIsEquivalent) {
  const ParameterSystem a = random_system(8, 2, 4);
  Vector d(2);
  d << 2.0, 0.5;
  const ParameterSystem b = transform_system(a, {0, 1}, d);
  EXPECT_LT((assemble_covariance(a) - assemble_covariance(b)).cwiseAbs().maxCoeff(), 1e-12);
  const Equivalence e = systems_equivalent(a, b);
  ASSERT_TRUE(e.equivalent) << e.reason;
  EXPECT_LT((e.witness->d - d).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Equivalence, PermutedSystemIsEquivalent) {
  const ParameterSystem a = random_system(12, 3, 5);
  Vector d(3);
  d << 1.5, -0.7, 3.0;
  const ParameterSystem b = transform_system(a, {2, 0, 1}, d);
  const Equivalence e = systems_equivalent(a, b);
  ASSERT_TRUE(e.equivalent) << e.reason;
  EXPECT_EQ(e.witness->perm, (std::vector<int>{2, 0, 1}));
  EXPECT_LT((assemble_covariance(a) - assemble_covariance(b)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Equivalence, ChangedLabelIsNotEquivalent) {
  const ParameterSystem a = random_system(8, 2, 6);  // four features per community
  ParameterSystem b = a;
  b.labels[0] = 1;
  const Equivalence e = systems_equivalent(a, b);
  EXPECT_FALSE(e.equivalent);
  EXPECT_FALSE(e.reason.empty());
}

TEST(Equivalence, RequiresIdentifiableSystems) {
  ParameterSystem a = make({1, 1, 1, 1}, {1, 1, 1, 1}, omega2(1, 0.5), {0, 0, 1, 1});
  EXPECT_THROW(systems_equivalent(a, a), ValidationError);
}

TEST(Condition1, Reports) {
  const ParameterSystem ok = random_system(9, 3, 8);
  EXPECT_TRUE(validate_condition1(ok).empty());

  ParameterSystem small = make({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1}, omega2(1, 0.5), {0, 0, 0, 1, 1});
  auto v = validate_condition1(small);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::CommunityTooSmall);
  EXPECT_EQ(v[0].index, 2);

  ParameterSystem zero = ok;
  zero.lambda(2) = 0.0;
  v = validate_condition1(zero);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::ZeroLambda);
  EXPECT_EQ(v[0].index, 3);
}

TEST(Rescale, FeatureScalingScalesCovariance) {
  Rng rng(9);
  std::normal_distribution<double> nd;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ParameterSystem s = random_system(10, 2, seed);
    Vector b = Vector::NullaryExpr(10, [&] { return nd(rng) + 0.1; });
    const ParameterSystem r = rescale_features(s, b);
    EXPECT_EQ(r.labels, s.labels);
    const Matrix lhs = assemble_covariance(r);
    const Matrix rhs = b.asDiagonal() * assemble_covariance(s) * b.asDiagonal();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Json, RoundTrip) {
  ParameterSystem s = random_system(6, 2, 10);
  s.pi = Vector::Constant(2, 0.5);
  const nlohmann::json j = s;
  for (const char* key : {"p", "k", "labels", "lambda", "sigma2", "omega", "pi"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const ParameterSystem back = j.get<ParameterSystem>();
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.lambda, s.lambda);
  EXPECT_EQ(back.omega, s.omega);
  ASSERT_TRUE(back.pi.has_value());
}
