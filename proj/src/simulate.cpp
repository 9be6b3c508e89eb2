#include "hbcm/simulate.hpp"

#include <cmath>
#include <random>

namespace hbcm {

namespace {

void check_simplex(const Vector& pi) {
  if (pi.size() == 0) throw ValidationError("pi is empty");
  for (Eigen::Index k = 0; k < pi.size(); ++k) {
    if (!(pi(k) >= 0.0 && pi(k) <= 1.0)) {
      throw ValidationError("pi entry " + std::to_string(k + 1) +
                            " is outside [0, 1]");
    }
  }
  if (std::abs(pi.sum() - 1.0) > 1e-12) throw ValidationError("pi does not sum to 1");
}

void check_noise(const NoiseSpec& noise) {
  if (noise.kind != NoiseKind::Gaussian && !(noise.dof > 2.0)) {
    throw ValidationError("t noise needs dof > 2");
  }
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> z;
  Matrix m(rows, cols);
  // Fill row by row so the stream order does not depend on storage order.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  }
  return m;
}

Matrix noise_matrix(Eigen::Index rows, Eigen::Index cols, const NoiseSpec& noise,
                    Rng& rng) {
  if (noise.kind == NoiseKind::Gaussian) return standard_normal(rows, cols, rng);
  std::student_t_distribution<double> t(noise.dof);
  const double scale = noise.kind == NoiseKind::StudentTStandardized
                           ? 1.0 / std::sqrt(noise.dof / (noise.dof - 2.0))
                           : 1.0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t(rng) * scale;
  }
  return m;
}

Vector uniform_pi(int k) { return Vector::Constant(k, 1.0 / k); }

Matrix compound_symmetric(int k, double diag, double offdiag) {
  Matrix omega = Matrix::Constant(k, k, offdiag);
  omega.diagonal().setConstant(diag);
  return omega;
}

}  // namespace

Labels generate_labels(int p, const Vector& pi, std::uint64_t seed) {
  check_simplex(pi);
  if (p <= 0) throw ValidationError("p must be positive");
  Rng rng(seed);
  std::discrete_distribution<int> draw(pi.data(), pi.data() + pi.size());
  Labels out(static_cast<std::size_t>(p));
  for (int& c : out) c = draw(rng);
  return out;
}

Matrix psd_factor(const Matrix& m) {
  if (!is_psd(m)) throw NumericalError("matrix to factor is not positive semi-definite");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

Dataset generate_dataset(int n, const ParameterSystem& sys, const NoiseSpec& noise,
                         std::uint64_t seed) {
  validate_system(sys);
  check_noise(noise);
  if (n < 2) throw ValidationError("need at least 2 samples");
  Rng rng(seed);

  const Matrix factor = psd_factor(sys.omega);
  Dataset out;
  out.truth.alpha = standard_normal(n, sys.k, rng) * factor.transpose();
  out.x = noise_matrix(n, sys.p, noise, rng);
  for (int j = 0; j < sys.p; ++j) {
    const double sd = std::sqrt(sys.sigma2(j));
    out.x.col(j) = sys.lambda(j) * out.truth.alpha.col(sys.labels[j]) + sd * out.x.col(j);
  }
  out.truth.labels = sys.labels;
  out.truth.system = sys;
  return out;
}

ParameterSystem table1_system(int p, int k, std::uint64_t seed) {
  if (p <= 0 || k <= 0) throw ValidationError("p and k must be positive");
  ParameterSystem sys;
  sys.p = p;
  sys.k = k;
  sys.omega = compound_symmetric(k, 1.0, 0.5);
  sys.pi = uniform_pi(k);
  sys.labels = generate_labels(p, *sys.pi, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  std::normal_distribution<double> normal;
  std::chi_squared_distribution<double> chi2(2.0);
  sys.lambda.resize(p);
  sys.sigma2.resize(p);
  for (int j = 0; j < p; ++j) {
    sys.lambda(j) = normal(rng);
    sys.sigma2(j) = chi2(rng) + 1.0;
  }
  return sys;
}

ParameterSystem homogeneous_system(int p, int k, double lambda, double sigma,
                                   double diag, double offdiag,
                                   std::uint64_t seed) {
  if (p <= 0 || k <= 0) throw ValidationError("p and k must be positive");
  ParameterSystem sys;
  sys.p = p;
  sys.k = k;
  sys.omega = compound_symmetric(k, diag, offdiag);
  sys.pi = uniform_pi(k);
  sys.labels = generate_labels(p, *sys.pi, derive_seed(seed, 1));
  sys.lambda = Vector::Constant(p, lambda);
  sys.sigma2 = Vector::Constant(p, sigma * sigma);
  return sys;
}

Matrix spike_matrix(int p, int num_spikes, std::uint64_t seed) {
  if (p <= 0 || num_spikes <= 0) throw ValidationError("p and m must be positive");
  Rng rng(seed);
  const Matrix z = standard_normal(p, num_spikes, rng);
  Matrix w = z * z.transpose() / std::sqrt(static_cast<double>(num_spikes));
  return 0.5 * (w + w.transpose());
}

Matrix perturbed_covariance(const ParameterSystem& sys, const Matrix& w, double r) {
  Matrix sigma = assemble_covariance(sys);
  if (r == 0.0) return sigma;
  if (w.rows() != sys.p || w.cols() != sys.p) throw ValidationError("W must be p x p");
  sigma += r * (sys.lambda.asDiagonal() * w * sys.lambda.asDiagonal());
  return 0.5 * (sigma + sigma.transpose());
}

Dataset perturbed_covariance_dataset(int n, const ParameterSystem& sys, double r,
                                     int num_spikes, std::uint64_t seed) {
  if (!(r >= 0.0)) throw ValidationError("r must be non-negative");
  if (num_spikes <= 0) throw ValidationError("number of spikes must be positive");
  Dataset out = generate_dataset(n, sys, NoiseSpec::gaussian(), derive_seed(seed, 1));
  if (r == 0.0) return out;

  // r W = (r / sqrt(m)) Z Z^T, so sqrt(r / sqrt(m)) Z g with g ~ N(0, I_m) has
  // covariance r W. Adding diag(lambda) times that draw to each row yields
  // rows distributed as N(0, perturbed_covariance(sys, W, r)) without a
  // P x P factorization.
  Rng spikes(derive_seed(seed, 2));
  const Matrix z = standard_normal(sys.p, num_spikes, spikes);
  Rng rng(derive_seed(seed, 3));
  const Matrix g = standard_normal(n, num_spikes, rng);
  const double scale = std::sqrt(r / std::sqrt(static_cast<double>(num_spikes)));
  out.x += scale * (g * z.transpose()) * sys.lambda.asDiagonal();
  return out;
}

MisleadingSetup misleading_lambda_system(double sigma, std::uint64_t seed) {
  constexpr int kP = 1000;
  MisleadingSetup out;
  out.system = homogeneous_system(kP, 3, 1.0, sigma, 1.0, 0.5, seed);
  out.mislead.resize(kP);
  for (int j = 0; j < kP; ++j) {
    const int tier = j < 330 ? 0 : (j < 660 ? 1 : 2);
    out.system.lambda(j) = tier == 0 ? 1.0 : (tier == 1 ? 5.0 : 25.0);
    out.mislead[static_cast<std::size_t>(j)] = tier;
  }
  return out;
}

}  // namespace hbcm
