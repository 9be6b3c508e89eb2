#include "hbcm/vem.hpp"

#include "hbcm/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace hbcm {

namespace {

constexpr double kLambdaDenTiny = 1e-12;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_shapes(const Matrix& x, const Matrix& q1, const Params& params) {
  const Eigen::Index p = x.cols();
  const Eigen::Index k = params.omega.rows();
  if (q1.rows() != p || q1.cols() != k || params.omega.cols() != k ||
      params.pi.size() != k || params.lambda.size() != p ||
      params.sigma2.size() != p) {
    throw ValidationError("inconsistent shapes between data, q1 and parameters");
  }
}

double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

double xlogy(double x, double y) { return x > 0.0 ? x * std::log(y) : 0.0; }

// log|M| for a symmetric positive definite matrix.
double log_det_spd(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + " is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Per-column statistics shared by the q1 update, the M-step and J:
// cross(j, k) = sum_i X_ij mu_ik and second(k) = sum_i (mu_ik^2 + V_kk).
struct Moments {
  Matrix cross;
  Vector second;
};

// X * W and X^T * M for thin W, M, one matrix-vector product per column.
// Eigen's blocked GEMM scales worse than linearly in N P for this shape.
Matrix thin_product(const Matrix& x, const Matrix& w) {
  Matrix out(x.rows(), w.cols());
  for (Eigen::Index c = 0; c < w.cols(); ++c) out.col(c).noalias() = x * w.col(c);
  return out;
}

Matrix thin_product_t(const Matrix& x, const Matrix& m) {
  Matrix out(x.cols(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c).noalias() = x.transpose() * m.col(c);
  return out;
}

Moments moments(const Matrix& x, const Posterior2& q2) {
  Moments m;
  m.cross = thin_product_t(x, q2.mu);
  m.second = q2.mu.colwise().squaredNorm().transpose() +
             static_cast<double>(x.rows()) * q2.v.diagonal();
  return m;
}

}  // namespace

Posterior2 e_step_q2(const Matrix& x, const Matrix& q1, const Params& params) {
  check_shapes(x, q1, params);
  const Eigen::Index k = params.omega.rows();
  Eigen::LLT<Matrix> omega_llt(params.omega);
  if (omega_llt.info() != Eigen::Success) {
    throw NumericalError("Omega is not positive definite in the q2 update");
  }
  const Matrix omega_inv = omega_llt.solve(Matrix::Identity(k, k));

  // weight(j, k) = q1_jk lambda_j / sigma2_j, so D_j b_ij summed over j is
  // X_i. weight and the diagonal of sum_j D_j is lambda^T weight.
  const Vector ratio = params.lambda.cwiseQuotient(params.sigma2);
  const Matrix weight = ratio.asDiagonal() * q1;
  Matrix a = omega_inv;
  a.diagonal() += weight.transpose() * params.lambda;
  a = symmetrized(a);

  Eigen::LLT<Matrix> a_llt(a);
  if (a_llt.info() != Eigen::Success) {
    throw NumericalError("posterior precision A is singular");
  }
  Posterior2 q2;
  q2.v = symmetrized(a_llt.solve(Matrix::Identity(k, k)));
  q2.mu = thin_product(x, weight) * q2.v;
  return q2;
}

namespace {

Matrix q1_from_moments(const Moments& m, const Params& params) {
  const Eigen::Index p = m.cross.rows();
  const Eigen::Index k = params.omega.rows();
  Matrix logf(p, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double log_pi = std::log(params.pi(c));
    for (Eigen::Index j = 0; j < p; ++j) {
      const double lam = params.lambda(j);
      logf(j, c) = log_pi + (lam * m.cross(j, c) - 0.5 * lam * lam * m.second(c)) /
                                params.sigma2(j);
    }
  }
  Matrix q1(p, k);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double top = logf.row(j).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      q1(j, c) = std::exp(logf(j, c) - top);
      total += q1(j, c);
    }
    q1.row(j) /= total;
  }
  return q1;
}

Params m_step_from_moments(const Vector& xx, Eigen::Index n, const Matrix& q1,
                           const Posterior2& q2, const Moments& m, const FitOptions& opts,
                           const Params* previous, MStepReport* report);

double elbo_from_moments(const Vector& xx, Eigen::Index n, const Matrix& q1,
                         const Posterior2& q2, const Moments& m, const Params& params);

}  // namespace

Matrix e_step_q1(const Matrix& x, const Posterior2& q2, const Params& params) {
  const Eigen::Index p = x.cols();
  const Eigen::Index k = params.omega.rows();
  if (q2.mu.rows() != x.rows() || q2.mu.cols() != k || params.lambda.size() != p ||
      params.sigma2.size() != p || params.pi.size() != k) {
    throw ValidationError("inconsistent shapes in the q1 update");
  }
  return q1_from_moments(moments(x, q2), params);
}

Params m_step(const Matrix& x, const Matrix& q1, const Posterior2& q2,
              const FitOptions& opts, const Params* previous, MStepReport* report) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index k = q1.cols();
  if (q1.rows() != p || q2.mu.rows() != n || q2.mu.cols() != k || q2.v.rows() != k ||
      q2.v.cols() != k) {
    throw ValidationError("inconsistent shapes in the M-step");
  }
  return m_step_from_moments(x.colwise().squaredNorm().transpose(), n, q1, q2, moments(x, q2),
                             opts, previous, report);
}

namespace {

Params m_step_from_moments(const Vector& xx, Eigen::Index n, const Matrix& q1,
                           const Posterior2& q2, const Moments& m, const FitOptions& opts,
                           const Params* previous, MStepReport* report) {
  const Eigen::Index p = q1.rows();
  const double nd = static_cast<double>(n);
  Params out;
  out.omega = symmetrized(q2.mu.transpose() * q2.mu / nd + q2.v);
  const Vector mass = q1.colwise().sum().transpose();
  out.pi = mass / mass.sum();
  out.lambda.resize(p);
  out.sigma2.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double num = q1.row(j).dot(m.cross.row(j));
    const double den = q1.row(j).dot(m.second.transpose());
    const double row_mass = q1.row(j).sum();
    double lam = 0.0;
    if (den > kLambdaDenTiny * nd && std::isfinite(num / den)) {
      lam = num / den;
    } else {
      lam = previous ? previous->lambda(j) : 0.0;
      if (report) report->lambda_guarded.push_back(static_cast<int>(j));
    }
    out.lambda(j) = lam;
    const double s2 = (row_mass * xx(j) + lam * lam * den - 2.0 * lam * num) / nd;
    out.sigma2(j) = std::max(s2, opts.sigma2_floor);
  }
  return out;
}

double elbo_from_moments(const Vector& xx, Eigen::Index n, const Matrix& q1,
                         const Posterior2& q2, const Moments& m, const Params& params) {
  const Eigen::Index p = q1.rows();
  const Eigen::Index k = params.omega.rows();
  const double nd = static_cast<double>(n);

  double labels_term = 0.0;
  double entropy_q1 = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index c = 0; c < k; ++c) {
      labels_term += xlogy(q1(j, c), params.pi(c));
      entropy_q1 -= xlogx(q1(j, c));
    }
  }

  Eigen::LLT<Matrix> omega_llt(params.omega);
  if (omega_llt.info() != Eigen::Success) {
    throw NumericalError("Omega is not positive definite in the objective");
  }
  const double log_det_omega =
      2.0 * omega_llt.matrixLLT().diagonal().array().log().sum();
  const Matrix second_moment = q2.mu.transpose() * q2.mu + nd * q2.v;
  const double factor_term =
      -0.5 * nd * log_det_omega - 0.5 * omega_llt.solve(second_moment).trace();

  double data_term = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double lam = params.lambda(j);
    const double s2 = params.sigma2(j);
    const double row_mass = q1.row(j).sum();
    const double num = q1.row(j).dot(m.cross.row(j));
    const double den = q1.row(j).dot(m.second.transpose());
    data_term += -0.5 * nd * row_mass * std::log(s2) -
                 (row_mass * xx(j) - 2.0 * lam * num + lam * lam * den) / (2.0 * s2);
  }

  const double entropy_q2 =
      0.5 * nd * log_det_spd(q2.v, "V") +
      0.5 * nd * static_cast<double>(k) * (1.0 + std::log(2.0 * std::numbers::pi));

  return labels_term + factor_term + data_term + entropy_q1 + entropy_q2;
}

}  // namespace

double elbo(const Matrix& x, const Matrix& q1, const Posterior2& q2,
            const Params& params) {
  check_shapes(x, q1, params);
  const Eigen::Index k = params.omega.rows();
  if (q2.mu.rows() != x.rows() || q2.mu.cols() != k || q2.v.rows() != k || q2.v.cols() != k) {
    throw ValidationError("inconsistent shapes between data and q2");
  }
  return elbo_from_moments(x.colwise().squaredNorm().transpose(), x.rows(), q1, q2,
                           moments(x, q2), params);
}

Vector init_column_signs(const Matrix& x, const Labels& labels, int k, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(labels.size()) != p) {
    throw ValidationError("initial labels must have one entry per column");
  }
  Vector signs = Vector::Ones(p);
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int c = 0; c < k; ++c) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (labels[static_cast<std::size_t>(j)] == c) cols.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(cols.size());
    if (m < 2) continue;
    Matrix sub(n, m);
    for (Eigen::Index t = 0; t < m; ++t) sub.col(t) = x.col(cols[static_cast<std::size_t>(t)]);
    const Vector var = sub.colwise().squaredNorm().transpose() / static_cast<double>(n);
    // Power iteration on the off-diagonal part of the block covariance.
    Vector v(m);
    for (Eigen::Index t = 0; t < m; ++t) v(t) = z(rng);
    v.normalize();
    for (int it = 0; it < 100; ++it) {
      Vector next = sub.transpose() * (sub * v) / static_cast<double>(n) - var.cwiseProduct(v);
      const double norm = next.norm();
      if (!(norm > 0.0)) break;
      next /= norm;
      if (next.dot(v) < 0) next = -next;
      const double change = (next - v).norm();
      v = std::move(next);
      if (change < 1e-8) break;
    }
    // Orient so that most of the loading mass is positive.
    if (v.sum() < 0) v = -v;
    for (Eigen::Index t = 0; t < m; ++t) {
      if (v(t) < 0) signs(cols[static_cast<std::size_t>(t)]) = -1.0;
    }
  }
  return signs;
}

InitState init_from_labels(const Matrix& x_in, const Labels& labels, int k,
                           const FitOptions& opts, std::uint64_t seed) {
  const Eigen::Index n = x_in.rows();
  const Eigen::Index p = x_in.cols();
  const double nd = static_cast<double>(n);
  if (static_cast<Eigen::Index>(labels.size()) != p) {
    throw ValidationError("initial labels must have one entry per column");
  }
  const Matrix l = one_hot(labels, k);
  const Vector sizes = l.colwise().sum().transpose();
  for (int c = 0; c < k; ++c) {
    if (sizes(c) == 0) {
      throw ValidationError("initial labels leave community " + std::to_string(c + 1) +
                            " empty");
    }
  }
  // Flipping column j together with lambda_j leaves the model unchanged, so
  // the averages below are taken over sign-aligned columns.
  const Vector signs = opts.align_init_signs
                           ? init_column_signs(x_in, labels, k, mix_seed(seed))
                           : Vector::Ones(p);
  const Matrix x = x_in * signs.asDiagonal();

  InitState init;
  Rng rng(seed);
  std::uniform_real_distribution<double> major =
      opts.paper_literal_init ? std::uniform_real_distribution<double>(0.0, 0.5)
                              : std::uniform_real_distribution<double>(0.5, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  init.q1.resize(p, k);
  for (Eigen::Index j = 0; j < p; ++j) {
    const int own = labels[static_cast<std::size_t>(j)];
    const double u = k == 1 ? 1.0 : major(rng);
    double spread = 0.0;
    for (int c = 0; c < k; ++c) {
      init.q1(j, c) = c == own ? 0.0 : unit(rng) + 1e-12;
      spread += init.q1(j, c);
    }
    for (int c = 0; c < k; ++c) {
      init.q1(j, c) = c == own ? u : (1.0 - u) * init.q1(j, c) / spread;
    }
    init.q1.row(j) /= init.q1.row(j).sum();
  }
  init.params.pi = init.q1.colwise().mean().transpose();

  // Average sample covariance over column pairs (j in k, j' in l, j != j'),
  // from group sums: sum_{j in k, j' in l} S_jj' = g_k^T g_l / N, g = X L.
  const Matrix g = thin_product(x, l);
  const Matrix block = g.transpose() * g / nd;
  const Vector var = x.colwise().squaredNorm().transpose() / nd;
  const Vector var_sum = l.transpose() * var;
  Matrix omega(k, k);
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      if (r != s) {
        omega(r, s) = block(r, s) / (sizes(r) * sizes(s));
      } else if (sizes(r) > 1) {
        omega(r, r) = (block(r, r) - var_sum(r)) / (sizes(r) * (sizes(r) - 1));
      } else {
        omega(r, r) = var_sum(r);
      }
    }
  }
  omega = symmetrized(omega);
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(omega);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    const double floor = std::max(1e-3 * top, 1e-10);
    if (es.eigenvalues().minCoeff() < floor) {
      const Vector clipped = es.eigenvalues().cwiseMax(floor);
      omega = symmetrized(es.eigenvectors() * clipped.asDiagonal() *
                          es.eigenvectors().transpose());
    }
  }
  init.params.omega = omega;

  // One-community fit per cluster: q1 fixed to the cluster, Omega fixed to
  // omega_kk. lambda starts from the within-cluster moment estimate.
  init.params.lambda = Vector::Zero(p);
  init.params.sigma2 = Vector::Zero(p);
  const Matrix xg = thin_product_t(x, g) / nd;  // xg(j, k) = sum_{j' in k} S_jj'
  for (int c = 0; c < k; ++c) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (labels[static_cast<std::size_t>(j)] == c) cols.push_back(j);
    }
    const double w = omega(c, c);
    const auto m = static_cast<Eigen::Index>(cols.size());
    Matrix sub(n, m);
    Vector lam(m);
    Vector s2(m);
    for (Eigen::Index t = 0; t < m; ++t) {
      const Eigen::Index j = cols[static_cast<std::size_t>(t)];
      sub.col(t) = x.col(j);
      if (m > 1) {
        lam(t) = (xg(j, c) - var(j)) / (static_cast<double>(m - 1) * w);
      } else {
        lam(t) = std::sqrt(0.5 * var(j) / w);
      }
      s2(t) = std::max(var(j) - lam(t) * lam(t) * w, 0.1 * var(j));
      s2(t) = std::max(s2(t), opts.sigma2_floor);
    }
    const Vector xx = sub.colwise().squaredNorm().transpose();
    for (int it = 0; it < opts.init_inner_iters; ++it) {
      const Vector ratio = lam.cwiseQuotient(s2);
      const double v = 1.0 / (1.0 / w + ratio.dot(lam));
      const Vector mu = v * (sub * ratio);
      const Vector cross = sub.transpose() * mu;
      const double second = mu.squaredNorm() + nd * v;
      for (Eigen::Index t = 0; t < m; ++t) {
        lam(t) = cross(t) / second;
        s2(t) = std::max((xx(t) + lam(t) * lam(t) * second - 2.0 * lam(t) * cross(t)) / nd,
                         opts.sigma2_floor);
      }
    }
    for (Eigen::Index t = 0; t < m; ++t) {
      const Eigen::Index j = cols[static_cast<std::size_t>(t)];
      init.params.lambda(j) = signs(j) * lam(t);
      init.params.sigma2(j) = s2(t);
    }
  }
  return init;
}

namespace {

// Re-seeds communities whose q1 mass fell below min_pi * P by handing them
// the rows with the least confident assignment. Returns true if it acted.
bool reseed_empty(Matrix& q1, double min_pi) {
  const Eigen::Index p = q1.rows();
  const Eigen::Index k = q1.cols();
  bool acted = false;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (q1.col(c).sum() >= min_pi * static_cast<double>(p)) continue;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) order[static_cast<std::size_t>(j)] = j;
    const auto take = std::min<Eigen::Index>(
        p, std::max<Eigen::Index>(3, p / (4 * k)));
    std::partial_sort(order.begin(), order.begin() + take, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        const double ma = q1.row(a).maxCoeff();
                        const double mb = q1.row(b).maxCoeff();
                        return ma != mb ? ma < mb : a < b;
                      });
    for (Eigen::Index t = 0; t < take; ++t) {
      const Eigen::Index j = order[static_cast<std::size_t>(t)];
      q1.row(j).setZero();
      q1(j, c) = 1.0;
    }
    acted = true;
  }
  return acted;
}

}  // namespace

FitResult fit(const Matrix& x, int k, const FitOptions& opts,
              const std::optional<Labels>& init_labels, std::uint64_t seed) {
  check_data(x);
  if (k < 2) throw ValidationError("fit needs K >= 2");
  if (k > x.cols()) throw ValidationError("fit needs K <= P");
  if (opts.max_iters < 1 || !(opts.elbo_rel_tol >= 0.0) || !(opts.min_pi >= 0.0) ||
      !(opts.sigma2_floor > 0.0)) {
    throw ValidationError("invalid fit options");
  }
  const Matrix xc = center_columns(x);

  Labels labels0;
  if (init_labels) {
    labels0 = *init_labels;
  } else {
    labels0 = spectral_cluster(abs_correlation(xc), k, derive_seed(seed, 11),
                               opts.spectral);
  }
  InitState init = init_from_labels(xc, labels0, k, opts, derive_seed(seed, 12));
  const Vector xx = xc.colwise().squaredNorm().transpose();

  FitResult res;
  Matrix q1 = std::move(init.q1);
  Params params = std::move(init.params);
  Posterior2 q2;
  const int max_reseeds = 10 * k;
  int reseeds = 0;
  for (int it = 1; it <= opts.max_iters; ++it) {
    q2 = e_step_q2(xc, q1, params);
    const Moments mom = moments(xc, q2);
    q1 = q1_from_moments(mom, params);
    bool reseeded = false;
    if (reseeds < max_reseeds && reseed_empty(q1, opts.min_pi)) {
      reseeded = true;
      ++reseeds;
      res.reseeds.push_back(it);
    }
    MStepReport report;
    params = m_step_from_moments(xx, xc.rows(), q1, q2, mom, opts, &params, &report);
    for (int j : report.lambda_guarded) {
      if (std::find(res.lambda_guarded.begin(), res.lambda_guarded.end(), j) ==
          res.lambda_guarded.end()) {
        res.lambda_guarded.push_back(j);
      }
    }
    const double j_now = elbo_from_moments(xx, xc.rows(), q1, q2, mom, params);
    if (!std::isfinite(j_now)) {
      std::ostringstream os;
      os << "objective became non-finite at iteration " << it
         << " (min sigma2 " << params.sigma2.minCoeff() << ", min pi "
         << params.pi.minCoeff() << ")";
      throw NumericalError(os.str());
    }
    res.elbo_trace.push_back(j_now);
    res.iterations = it;
    if (it > 1 && !reseeded) {
      const double prev = res.elbo_trace[res.elbo_trace.size() - 2];
      if (std::abs(j_now - prev) < opts.elbo_rel_tol * std::abs(prev)) {
        res.converged = true;
        break;
      }
    }
  }
  res.labels = argmax_rows(q1);
  res.params = std::move(params);
  res.q1 = std::move(q1);
  res.q2 = std::move(q2);
  return res;
}

void to_json(nlohmann::json& j, const FitResult& r) {
  Labels one_based = r.labels;
  for (int& c : one_based) ++c;
  j = nlohmann::json{
      {"labels", one_based},
      {"pi", vector_to_json(r.params.pi)},
      {"omega", matrix_to_json(r.params.omega)},
      {"lambda", vector_to_json(r.params.lambda)},
      {"sigma2", vector_to_json(r.params.sigma2)},
      {"elbo_trace", r.elbo_trace},
      {"iterations", r.iterations},
      {"converged", r.converged},
  };
}

}  // namespace hbcm
