#include "hbcm/model.hpp"

#include "hbcm/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hbcm {

namespace {

constexpr double kPsdRelTol = 1e-10;
constexpr double kCanonicalZero = 1e-12;
constexpr double kRatioTol = 1e-8;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool is_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

bool near(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

Matrix EquivalenceWitness::permutation_matrix() const {
  const int k = static_cast<int>(perm.size());
  Matrix q = Matrix::Zero(k, k);
  for (int a = 0; a < k; ++a) q(a, perm[a]) = 1.0;
  return q;
}

ParameterSystem CanonicalSystem::as_system(int k) const {
  ParameterSystem s;
  s.p = static_cast<int>(labels.size());
  s.k = k;
  s.labels = labels;
  s.lambda = lambda_star;
  s.sigma2 = sigma2;
  s.omega = omega_star;
  return s;
}

bool is_psd(const Matrix& m, double* min_eigenvalue) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver failed");
  }
  const Vector& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  if (min_eigenvalue) *min_eigenvalue = lo;
  const double scale = ev.cwiseAbs().maxCoeff();
  return lo >= -kPsdRelTol * scale;
}

void validate_system(const ParameterSystem& sys) {
  if (sys.p <= 0 || sys.k <= 0) {
    throw ValidationError("system needs p > 0 and k > 0");
  }
  const auto p = static_cast<Eigen::Index>(sys.p);
  if (static_cast<int>(sys.labels.size()) != sys.p || sys.lambda.size() != p ||
      sys.sigma2.size() != p) {
    throw ValidationError("labels, lambda and sigma2 must all have length p = " +
                          std::to_string(sys.p));
  }
  if (sys.omega.rows() != sys.k || sys.omega.cols() != sys.k) {
    throw ValidationError("omega must be k x k");
  }
  for (int j = 0; j < sys.p; ++j) {
    if (sys.labels[j] < 0 || sys.labels[j] >= sys.k) {
      throw ValidationError("label of feature " + std::to_string(j + 1) +
                            " is outside 1.." + std::to_string(sys.k));
    }
    if (!(sys.lambda(j) != 0.0) || !std::isfinite(sys.lambda(j))) {
      throw ValidationError("lambda of feature " + std::to_string(j + 1) +
                            " must be finite and nonzero");
    }
    if (!(sys.sigma2(j) > 0.0) || !std::isfinite(sys.sigma2(j))) {
      throw ValidationError("sigma2 of feature " + std::to_string(j + 1) +
                            " must be finite and positive, got " +
                            fmt_double(sys.sigma2(j)));
    }
  }
  if (!is_symmetric(sys.omega)) throw ValidationError("omega is not symmetric");
  double lo = 0.0;
  if (!is_psd(sys.omega, &lo)) {
    throw ValidationError("omega is not positive semi-definite: eigenvalue " +
                          fmt_double(lo));
  }
  if (sys.pi) {
    const Vector& pi = *sys.pi;
    if (pi.size() != sys.k) throw ValidationError("pi must have length k");
    for (Eigen::Index c = 0; c < pi.size(); ++c) {
      if (!(pi(c) >= 0.0 && pi(c) <= 1.0)) {
        throw ValidationError("pi entry " + std::to_string(c + 1) +
                              " is outside [0, 1]");
      }
    }
    if (std::abs(pi.sum() - 1.0) > 1e-12) {
      throw ValidationError("pi does not sum to 1");
    }
  }
}

Matrix assemble_covariance(const ParameterSystem& sys) {
  validate_system(sys);
  const int p = sys.p;
  Matrix sigma(p, p);
  for (int j = 0; j < p; ++j) {
    for (int jj = 0; jj <= j; ++jj) {
      const double v =
          sys.lambda(j) * sys.lambda(jj) * sys.omega(sys.labels[j], sys.labels[jj]);
      sigma(j, jj) = v;
      sigma(jj, j) = v;
    }
    sigma(j, j) += sys.sigma2(j);
  }
  return sigma;
}

CanonicalSystem canonicalize(const ParameterSystem& sys) {
  validate_system(sys);
  const Matrix l = sys.membership();
  // inv_d(k) = (1/P) sum_j' lambda_j' omega(k, c_j')
  const Vector inv_d = sys.omega * (l.transpose() * sys.lambda) / sys.p;
  for (int j = 0; j < sys.p; ++j) {
    if (std::abs(inv_d(sys.labels[j])) < kCanonicalZero) {
      throw ValidationError(
          "canonical scale vanishes at feature " + std::to_string(j + 1) +
          ": sum_j' lambda_j' omega(c_j', c_j) is zero");
    }
  }
  for (int c = 0; c < sys.k; ++c) {
    if (std::abs(inv_d(c)) < kCanonicalZero) {
      throw ValidationError("canonical scale vanishes for empty community " +
                            std::to_string(c + 1));
    }
  }

  CanonicalSystem out;
  out.multiplier = inv_d.cwiseInverse();
  out.lambda_star.resize(sys.p);
  for (int j = 0; j < sys.p; ++j) {
    out.lambda_star(j) = sys.lambda(j) * inv_d(sys.labels[j]);
  }
  out.omega_star =
      out.multiplier.asDiagonal() * sys.omega * out.multiplier.asDiagonal();
  out.omega_star = 0.5 * (out.omega_star + out.omega_star.transpose()).eval();
  out.labels = sys.labels;
  out.sigma2 = sys.sigma2;
  return out;
}

std::vector<Violation> validate_condition1(const ParameterSystem& sys) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  const auto p = static_cast<Eigen::Index>(sys.p);
  if (sys.p <= 0 || sys.k <= 0 || static_cast<int>(sys.labels.size()) != sys.p ||
      sys.lambda.size() != p || sys.sigma2.size() != p ||
      sys.omega.rows() != sys.k || sys.omega.cols() != sys.k) {
    out.push_back({K::ShapeMismatch, 0, "inconsistent system dimensions"});
    return out;
  }
  std::vector<int> sizes(static_cast<std::size_t>(sys.k), 0);
  for (int j = 0; j < sys.p; ++j) {
    if (sys.lambda(j) == 0.0) {
      out.push_back({K::ZeroLambda, j + 1,
                     "lambda of feature " + std::to_string(j + 1) + " is zero"});
    }
    if (!(sys.sigma2(j) > 0.0)) {
      out.push_back({K::NonPositiveSigma2, j + 1,
                     "sigma2 of feature " + std::to_string(j + 1) +
                         " is not positive"});
    }
    // A row of L sums to one exactly when the label is a valid index.
    if (sys.labels[j] < 0 || sys.labels[j] >= sys.k) {
      out.push_back({K::LabelOutOfRange, j + 1,
                     "feature " + std::to_string(j + 1) +
                         " has no valid community"});
    } else {
      ++sizes[static_cast<std::size_t>(sys.labels[j])];
    }
  }
  if (!is_symmetric(sys.omega)) {
    out.push_back({K::OmegaNotSymmetric, 0, "omega is not symmetric"});
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sys.omega, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (!(lo > 0.0)) {
      out.push_back({K::OmegaNotPositiveDefinite, 0,
                     "omega is not positive definite: eigenvalue " +
                         fmt_double(lo)});
    }
  }
  for (int c = 0; c < sys.k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] < 3) {
      out.push_back({K::CommunityTooSmall, c + 1,
                     "community " + std::to_string(c + 1) + " has " +
                         std::to_string(sizes[static_cast<std::size_t>(c)]) +
                         " features, needs at least 3"});
    }
  }
  return out;
}

Equivalence systems_equivalent(const ParameterSystem& a,
                               const ParameterSystem& b) {
  for (const auto* s : {&a, &b}) {
    const auto v = validate_condition1(*s);
    if (!v.empty()) {
      throw ValidationError("identifiability conditions violated: " +
                            v.front().message);
    }
  }
  Equivalence res;
  if (a.p != b.p || a.k != b.k) {
    res.reason = "different numbers of features or communities";
    return res;
  }
  const int p = a.p;
  const int k = a.k;

  for (int j = 0; j < p; ++j) {
    if (!near(a.sigma2(j), b.sigma2(j), kRatioTol)) {
      res.reason = "sigma2 differs at feature " + std::to_string(j + 1);
      return res;
    }
  }

  // The memberships must agree up to relabeling, which pins the permutation:
  // each community of a maps to the unique community of b its members share.
  std::vector<int> perm(static_cast<std::size_t>(k), -1);
  std::vector<int> inverse(static_cast<std::size_t>(k), -1);
  for (int j = 0; j < p; ++j) {
    const int ca = a.labels[j];
    const int cb = b.labels[j];
    auto& fwd = perm[static_cast<std::size_t>(ca)];
    auto& back = inverse[static_cast<std::size_t>(cb)];
    if ((fwd != -1 && fwd != cb) || (back != -1 && back != ca)) {
      res.reason = "memberships differ at feature " + std::to_string(j + 1);
      return res;
    }
    fwd = cb;
    back = ca;
  }

  // d_k = lambda_a,j / lambda_b,j for any j in community k of a.
  Vector d = Vector::Zero(k);
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int j = 0; j < p; ++j) {
    const int ca = a.labels[j];
    const double ratio = a.lambda(j) / b.lambda(j);
    if (!seen[static_cast<std::size_t>(ca)]) {
      d(ca) = ratio;
      seen[static_cast<std::size_t>(ca)] = true;
    } else if (!near(d(ca), ratio, kRatioTol)) {
      res.reason = "lambda ratio is not constant within community " +
                   std::to_string(ca + 1);
      return res;
    }
  }

  // Omega_b = Q^T diag(d) Omega_a diag(d) Q, i.e.
  // Omega_b(perm[r], perm[s]) = d_r d_s Omega_a(r, s).
  const double scale = std::max(1.0, b.omega.cwiseAbs().maxCoeff());
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      const double expected = d(r) * d(s) * a.omega(r, s);
      const double got = b.omega(perm[r], perm[s]);
      if (std::abs(expected - got) > kRatioTol * std::max(scale, std::abs(expected))) {
        res.reason = "omega entries are not a rescaling at (" +
                     std::to_string(r + 1) + ", " + std::to_string(s + 1) + ")";
        return res;
      }
    }
  }

  res.equivalent = true;
  res.witness = EquivalenceWitness{std::move(perm), std::move(d)};
  return res;
}

ParameterSystem transform_system(const ParameterSystem& sys,
                                 const std::vector<int>& perm, const Vector& d) {
  if (static_cast<int>(perm.size()) != sys.k || d.size() != sys.k) {
    throw ValidationError("permutation and multiplier must have length k");
  }
  ParameterSystem out = sys;
  for (int r = 0; r < sys.k; ++r) {
    if (d(r) == 0.0) throw ValidationError("multiplier entries must be nonzero");
    for (int s = 0; s < sys.k; ++s) {
      out.omega(perm[r], perm[s]) = d(r) * d(s) * sys.omega(r, s);
    }
  }
  for (int j = 0; j < sys.p; ++j) {
    const int c = sys.labels[j];
    out.labels[j] = perm[c];
    out.lambda(j) = sys.lambda(j) / d(c);
  }
  if (sys.pi) {
    Vector pi(sys.k);
    for (int r = 0; r < sys.k; ++r) pi(perm[r]) = (*sys.pi)(r);
    out.pi = pi;
  }
  return out;
}

ParameterSystem rescale_features(const ParameterSystem& sys, const Vector& b) {
  if (b.size() != sys.p) throw ValidationError("scale vector must have length p");
  ParameterSystem out = sys;
  out.lambda = b.cwiseProduct(sys.lambda);
  out.sigma2 = b.cwiseAbs2().cwiseProduct(sys.sigma2);
  return out;
}

void to_json(nlohmann::json& j, const ParameterSystem& sys) {
  Labels one_based = sys.labels;
  for (int& c : one_based) ++c;
  j = nlohmann::json{
      {"p", sys.p},
      {"k", sys.k},
      {"labels", one_based},
      {"lambda", vector_to_json(sys.lambda)},
      {"sigma2", vector_to_json(sys.sigma2)},
      {"omega", matrix_to_json(sys.omega)},
  };
  if (sys.pi) {
    j["pi"] = vector_to_json(*sys.pi);
  } else {
    j["pi"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, ParameterSystem& sys) {
  sys.p = j.at("p").get<int>();
  sys.k = j.at("k").get<int>();
  sys.labels = j.at("labels").get<Labels>();
  for (int& c : sys.labels) --c;
  sys.lambda = vector_from_json(j.at("lambda"));
  sys.sigma2 = vector_from_json(j.at("sigma2"));
  sys.omega = matrix_from_json(j.at("omega"));
  if (j.contains("pi") && !j.at("pi").is_null()) {
    sys.pi = vector_from_json(j.at("pi"));
  } else {
    sys.pi.reset();
  }
}

}  // namespace hbcm
