#include "hbcm/common.hpp"

#include <algorithm>

namespace hbcm {

Matrix one_hot(const Labels& labels, int k) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= k) {
      throw ValidationError("label " + std::to_string(labels[j] + 1) +
                            " of feature " + std::to_string(j + 1) +
                            " is outside 1.." + std::to_string(k));
    }
    out(static_cast<Eigen::Index>(j), labels[j]) = 1.0;
  }
  return out;
}

Labels argmax_rows(const Matrix& m) {
  Labels out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < m.cols(); ++k) {
      if (m(j, k) > m(j, best)) best = k;
    }
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

int num_classes(const Labels& labels) {
  int k = 0;
  for (int c : labels) {
    if (c < 0) throw ValidationError("negative label");
    k = std::max(k, c + 1);
  }
  return k;
}

Matrix sample_covariance(const Matrix& x) {
  Matrix s = Matrix::Zero(x.cols(), x.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return s / static_cast<double>(x.rows());
}

Matrix center_columns(const Matrix& x) {
  Matrix out = x;
  out.rowwise() -= x.colwise().mean();
  return out;
}

void check_data(const Matrix& x) {
  if (x.rows() < 2 || x.cols() < 2) {
    throw ValidationError("data matrix must be at least 2x2, got " +
                          std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()));
  }
  if (!x.allFinite()) throw ValidationError("data matrix has non-finite entries");
}

}  // namespace hbcm
