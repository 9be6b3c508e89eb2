#pragma once

// Variational EM for the heterogeneous block covariance model.
//
// Two latent layers: column labels c_j ~ Multinomial(pi) and row factors
// alpha_i ~ N(0, Omega), with X_ij | alpha_i, c_j ~ N(lambda_j alpha_{i c_j},
// sigma2_j). The posterior is approximated by q1(c) q2(alpha) where
//   q1 factorizes over columns: a P x K row-stochastic matrix,
//   q2 factorizes over rows:    alpha_i ~ N(mu_i, V) with a shared V.
// Each update below maximizes the evidence lower bound J in one block of
// coordinates with the others held fixed, so J never decreases.

#include "hbcm/common.hpp"
#include "hbcm/spectral.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace hbcm {

struct Params {
  Vector pi;      // K
  Matrix omega;   // K x K
  Vector lambda;  // P
  Vector sigma2;  // P
};

struct Posterior2 {
  Matrix mu;  // N x K
  Matrix v;   // K x K
};

struct FitOptions {
  int max_iters = 500;
  double elbo_rel_tol = 1e-6;
  double min_pi = 1e-6;
  double sigma2_floor = 1e-8;
  // Mass placed on the initial label of each q1 row is drawn from
  // Uniform(0.5, 1); the literal variant draws it from Uniform(0, 0.5).
  bool paper_literal_init = false;
  // Inner iterations of the one-community fit that seeds lambda and sigma2.
  int init_inner_iters = 5;
  // Align column signs within each initial cluster before averaging
  // covariances. Without it, averages over features whose lambda differ in
  // sign cancel out.
  bool align_init_signs = true;
  SpectralOptions spectral;
};

struct FitResult {
  Labels labels;
  Params params;
  Matrix q1;
  Posterior2 q2;
  std::vector<double> elbo_trace;
  int iterations = 0;
  bool converged = false;
  // Iterations (1-based) after which an emptied community was re-seeded. The
  // ascent restarts there, so monotonicity holds between these points.
  std::vector<int> reseeds;
  // Features whose lambda update had a vanishing denominator at some point.
  std::vector<int> lambda_guarded;
};

// q2 update: A = Omega^-1 + diag(sum_j q1_jk lambda_j^2 / sigma2_j),
// V = A^-1, mu_i = V B_i with B_ik = sum_j q1_jk lambda_j X_ij / sigma2_j.
Posterior2 e_step_q2(const Matrix& x, const Matrix& q1, const Params& params);

// q1 update: softmax over k of
//   log pi_k - sum_i (X_ij^2 - 2 lambda_j X_ij mu_ik
//                     + lambda_j^2 (mu_ik^2 + V_kk)) / (2 sigma2_j),
// evaluated with per-row max subtraction.
Matrix e_step_q1(const Matrix& x, const Posterior2& q2, const Params& params);

struct MStepReport {
  std::vector<int> lambda_guarded;  // features that kept their previous lambda
};

// Closed-form maximizer of J over the parameters given q1 and q2. `previous`
// supplies lambda where its update is degenerate.
Params m_step(const Matrix& x, const Matrix& q1, const Posterior2& q2,
              const FitOptions& opts = {}, const Params* previous = nullptr,
              MStepReport* report = nullptr);

// Evidence lower bound J(q1, q2, Phi); 0 log 0 is taken as 0.
double elbo(const Matrix& x, const Matrix& q1, const Posterior2& q2,
            const Params& params);

struct InitState {
  Matrix q1;
  Params params;
};

// Initial q1 and parameters from hard labels: noisy q1 concentrated on the
// labels, pi from the column means of q1, Omega from average between-column
// sample covariances, and lambda, sigma2 from a short one-community fit on
// each cluster's columns. Expects centered data.
InitState init_from_labels(const Matrix& x, const Labels& labels, int k,
                           const FitOptions& opts, std::uint64_t seed);

// Per-column signs of the leading eigenvector of each cluster's covariance
// block (diagonal removed), oriented so each eigenvector sums positive.
Vector init_column_signs(const Matrix& x, const Labels& labels, int k, std::uint64_t seed);

// Full estimator. Columns are centered first; without init labels, spectral
// clustering of the absolute correlation kernel supplies them.
FitResult fit(const Matrix& x, int k, const FitOptions& opts,
              const std::optional<Labels>& init_labels, std::uint64_t seed);

void to_json(nlohmann::json& j, const FitResult& r);

}  // namespace hbcm
