#pragma once

// Synthetic data from the block covariance generative process:
//   1. c_j ~ Multinomial(1, pi)
//   2. alpha_i ~ N(0, Omega)
//   3. X_ij = lambda_j alpha_{i, c_j} + sigma_j eps_ij
// and the perturbed variants used in robustness experiments.
//
// Every generator takes an explicit seed; identical seeds and arguments give
// bit-identical output.

#include "hbcm/common.hpp"
#include "hbcm/model.hpp"

#include <cstdint>

namespace hbcm {

enum class NoiseKind { Gaussian, StudentT, StudentTStandardized };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double dof = 0.0;  // required (> 2) for the t variants

  static NoiseSpec gaussian() { return {}; }
  static NoiseSpec student_t(double v) { return {NoiseKind::StudentT, v}; }
  static NoiseSpec student_t_standardized(double v) {
    return {NoiseKind::StudentTStandardized, v};
  }
};

struct GroundTruth {
  Labels labels;
  Matrix alpha;  // N x K community factors
  ParameterSystem system;
};

struct Dataset {
  Matrix x;  // N x P
  GroundTruth truth;
};

Labels generate_labels(int p, const Vector& pi, std::uint64_t seed);

// Draws N rows from the system. The labels of the system are the truth.
Dataset generate_dataset(int n, const ParameterSystem& sys, const NoiseSpec& noise,
                         std::uint64_t seed);

// Symmetric square-root-type factor F with F F^T = m, negative eigenvalues
// clipped to zero. Throws if m is not PSD within tolerance.
Matrix psd_factor(const Matrix& m);

// Omega = 0.5 + 0.5 I, uniform pi, lambda_j ~ N(0, 1), sigma2_j ~ chi2(2) + 1.
ParameterSystem table1_system(int p, int k, std::uint64_t seed);

// lambda_j = lambda, sigma_j = sigma for every feature, omega_kk = diag and
// omega_kl = offdiag, uniform pi, multinomial labels.
ParameterSystem homogeneous_system(int p, int k, double lambda, double sigma,
                                   double diag, double offdiag,
                                   std::uint64_t seed);

// W = (1/sqrt(m)) sum_m z_m z_m^T with z_m ~ N(0, I_P).
Matrix spike_matrix(int p, int num_spikes, std::uint64_t seed);

// diag(lambda) (Omega_tilde + r W) diag(lambda) + diag(sigma2), where
// Omega_tilde(j, j') = omega(c_j, c_j').
Matrix perturbed_covariance(const ParameterSystem& sys, const Matrix& w, double r);

// Rows drawn i.i.d. from N(0, perturbed_covariance(sys, W, r)) with
// W = spike_matrix(sys.p, num_spikes, derive_seed(seed, 2)).
Dataset perturbed_covariance_dataset(int n, const ParameterSystem& sys, double r,
                                     int num_spikes, std::uint64_t seed);

struct MisleadingSetup {
  ParameterSystem system;
  Labels mislead;  // features grouped by their lambda tier
};

// P = 1000, K = 3, lambda in tiers {1, 5, 25} over features 1-330, 331-660
// and 661-1000, omega_kk = 1, omega_kl = 0.5, uniform multinomial labels.
MisleadingSetup misleading_lambda_system(double sigma, std::uint64_t seed);

}  // namespace hbcm
