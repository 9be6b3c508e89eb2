#pragma once

// Heterogeneous block covariance parameter systems.
//
// A system {lambda, Omega, c, sigma2} defines the feature covariance
//
//   Sigma = diag(lambda) L Omega L^T diag(lambda) + diag(sigma2)
//
// where L is the one-hot membership matrix of the labels c. Entrywise,
// Sigma(j, j') = lambda_j lambda_j' omega(c_j, c_j') + sigma2_j [j == j'].

#include "hbcm/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hbcm {

struct ParameterSystem {
  int p = 0;
  int k = 0;
  Labels labels;           // length p, entries in [0, k)
  Vector lambda;           // length p, nonzero
  Vector sigma2;           // length p, positive
  Matrix omega;            // k x k symmetric
  std::optional<Vector> pi;  // length k simplex, when mixing weights matter

  Matrix membership() const { return one_hot(labels, k); }
};

struct CanonicalSystem {
  Vector lambda_star;
  Matrix omega_star;
  Labels labels;
  Vector sigma2;
  // d = (Omega L^T lambda / P)^{-1}; the multiplier that maps the input
  // system onto its canonical representative.
  Vector multiplier;

  ParameterSystem as_system(int k) const;
};

struct EquivalenceWitness {
  // perm[k] is the community of system b that community k of system a maps
  // to, i.e. L_b = L_a Q with Q(k, perm[k]) = 1.
  std::vector<int> perm;
  Vector d;

  Matrix permutation_matrix() const;
};

struct Equivalence {
  bool equivalent = false;
  std::optional<EquivalenceWitness> witness;
  std::string reason;  // why the systems differ, empty when equivalent
};

struct Violation {
  enum class Kind { ZeroLambda, NonPositiveSigma2, OmegaNotPositiveDefinite,
                    OmegaNotSymmetric, LabelOutOfRange, CommunityTooSmall,
                    ShapeMismatch };
  Kind kind;
  int index;  // 1-based feature or community index, 0 when not applicable
  std::string message;
};

// Shape and value checks shared by every operation (lambda nonzero,
// sigma2 positive, Omega symmetric PSD, labels in range, pi a simplex).
// Throws ValidationError naming the first offending entry.
void validate_system(const ParameterSystem& sys);

// True when every eigenvalue of the symmetric matrix is at least
// -1e-10 * (largest absolute eigenvalue).
bool is_psd(const Matrix& m, double* min_eigenvalue = nullptr);

Matrix assemble_covariance(const ParameterSystem& sys);

CanonicalSystem canonicalize(const ParameterSystem& sys);

// Identifiability conditions: nonzero lambda, positive definite Omega,
// positive sigma2, labels in range and at least 3 features per community.
std::vector<Violation> validate_condition1(const ParameterSystem& sys);

// Decides whether two systems satisfying the identifiability conditions are
// related by a label permutation and a community-wise rescaling of lambda
// against Omega. Throws ValidationError if either violates the conditions.
Equivalence systems_equivalent(const ParameterSystem& a,
                               const ParameterSystem& b);

// Applies the transformation that leaves Sigma invariant:
// Omega' = Q^T diag(d) Omega diag(d) Q, L' = L Q, lambda' = lambda o (L d^-1).
ParameterSystem transform_system(const ParameterSystem& sys,
                                 const std::vector<int>& perm, const Vector& d);

// Feature rescaling: {b o lambda, Omega, c, b^2 o sigma2}, whose covariance is
// diag(b) Sigma diag(b).
ParameterSystem rescale_features(const ParameterSystem& sys, const Vector& b);

void to_json(nlohmann::json& j, const ParameterSystem& sys);
void from_json(const nlohmann::json& j, ParameterSystem& sys);

}  // namespace hbcm
