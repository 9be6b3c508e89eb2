#include "hbcm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace hbcm {

KernelMatrix abs_correlation(const Matrix& x) {
  check_data(x);
  const Matrix xc = center_columns(x);
  const Vector ss = xc.colwise().squaredNorm();
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < xc.cols(); ++j) {
    if (!(ss(j) / n > 1e-12)) {
      throw ValidationError("column " + std::to_string(j + 1) +
                            " is constant; correlation undefined");
    }
  }
  const Vector inv_sd = ss.cwiseSqrt().cwiseInverse();
  const Matrix z = xc * inv_sd.asDiagonal();
  KernelMatrix k;
  k.m = Matrix::Zero(x.cols(), x.cols());
  k.m.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
  k.m.triangularView<Eigen::StrictlyUpper>() = k.m.transpose();
  k.m = k.m.cwiseAbs().cwiseMin(1.0);
  k.m.diagonal().setOnes();
  return k;
}

Embedding spectral_embedding(const KernelMatrix& kernel, int k, Laplacian laplacian) {
  const Eigen::Index p = kernel.m.rows();
  if (k < 1 || k > p) throw ValidationError("need 1 <= K <= P");
  Matrix target = kernel.m;
  if (laplacian == Laplacian::Normalized) {
    const Vector inv_sqrt_deg = kernel.m.rowwise().sum().cwiseSqrt().cwiseInverse();
    target = inv_sqrt_deg.asDiagonal() * kernel.m * inv_sqrt_deg.asDiagonal();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(target);
  if (es.info() != Eigen::Success) throw NumericalError("kernel eigendecomposition failed");

  Embedding out;
  out.eigenvalues.resize(k);
  out.eigenvectors.resize(p, k);
  for (int c = 0; c < k; ++c) {
    const Eigen::Index src = p - 1 - c;  // eigenvalues come in ascending order
    out.eigenvalues(c) = es.eigenvalues()(src);
    Vector v = es.eigenvectors().col(src);
    double s = v.sum();
    if (std::abs(s) < 1e-8) {
      Eigen::Index at = 0;
      v.cwiseAbs().maxCoeff(&at);
      s = v(at);
    }
    if (s < 0) v = -v;
    out.eigenvectors.col(c) = v;
  }
  return out;
}

namespace {

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index c) {
  return (a.row(i) - b.row(c)).squaredNorm();
}

struct Run {
  Labels labels;
  Matrix centers;
  double wcss = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  bool valid = false;
};

Run lloyd(const Matrix& pts, int k, Rng& rng, int max_iters) {
  const Eigen::Index n = pts.rows();
  Run run;
  run.centers.resize(k, pts.cols());

  // k-means++ seeding
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  run.centers.row(0) = pts.row(first(rng));
  Vector best = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      best(i) = std::min(best(i), sq_dist(pts, i, run.centers, c - 1));
    }
    const double total = best.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= best(pick);
        if (target <= 0) break;
      }
    } else {
      pick = first(rng);
    }
    run.centers.row(c) = pts.row(pick);
  }

  run.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double d = sq_dist(pts, i, run.centers, 0);
      for (int c = 1; c < k; ++c) {
        const double dc = sq_dist(pts, i, run.centers, c);
        if (dc < d) {
          d = dc;
          arg = c;
        }
      }
      if (run.labels[static_cast<std::size_t>(i)] != arg) {
        run.labels[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }

    // Move the farthest point into any empty cluster.
    std::fill(counts.begin(), counts.end(), 0);
    for (int c : run.labels) ++counts[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int own = run.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(own)] <= 1) continue;
        const double d = sq_dist(pts, i, run.centers, own);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) return run;
      --counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
      run.labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      changed = true;
    }

    run.centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      run.centers.row(run.labels[static_cast<std::size_t>(i)]) += pts.row(i);
    }
    for (int c = 0; c < k; ++c) run.centers.row(c) /= counts[static_cast<std::size_t>(c)];

    double wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      wcss += sq_dist(pts, i, run.centers, run.labels[static_cast<std::size_t>(i)]);
    }
    run.trace.push_back(wcss);
    run.wcss = wcss;
    if (!changed) break;
  }
  run.valid = true;
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                    const KMeansOptions& opts) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) throw ValidationError("need 1 <= K <= number of points");
  if (opts.restarts < 1 || opts.max_iters < 1) {
    throw ValidationError("k-means needs at least one restart and one iteration");
  }

  // Canonical row order: lexicographic on coordinates, then original index.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
      if (points(a, d) != points(b, d)) return points(a, d) < points(b, d);
    }
    return a < b;
  });
  Matrix pts(n, points.cols());
  for (Eigen::Index i = 0; i < n; ++i) pts.row(i) = points.row(order[static_cast<std::size_t>(i)]);

  Rng rng(seed);
  Run best;
  KMeansResult out;
  for (int r = 0; r < opts.restarts; ++r) {
    Run run = lloyd(pts, k, rng, opts.max_iters);
    out.restart_wcss.push_back(run.valid ? run.wcss
                                         : std::numeric_limits<double>::infinity());
    if (run.valid && run.wcss < best.wcss) best = std::move(run);
  }
  if (!best.valid) {
    throw NumericalError("k-means left a cluster empty in every restart");
  }

  out.labels.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        best.labels[static_cast<std::size_t>(i)];
  }
  out.centers = std::move(best.centers);
  out.wcss = best.wcss;
  out.trace = std::move(best.trace);
  return out;
}

Labels spectral_cluster(const KernelMatrix& kernel, int k, std::uint64_t seed,
                        const SpectralOptions& opts) {
  const Eigen::Index p = kernel.m.rows();
  if (k < 2 || k > p) throw ValidationError("spectral clustering needs 2 <= K <= P");
  Embedding emb = spectral_embedding(kernel, k, opts.laplacian);
  Matrix rows = emb.eigenvectors;
  if (opts.row_normalize) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double norm = rows.row(j).norm();
      if (norm > 0) rows.row(j) /= norm;
    }
  }
  return kmeans(rows, k, seed, opts.kmeans).labels;
}

}  // namespace hbcm
