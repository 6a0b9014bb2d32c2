#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedrad/core/error.hpp"
#include "fedrad/core/log.hpp"

namespace fedrad::feature_space {

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x R, orthonormal rows
  std::vector<double> explained_variance;
  std::vector<double> explained_variance_ratio;
  std::size_t requested_k = 0;
  std::vector<std::string> warnings;

  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t input_dims() const { return static_cast<std::size_t>(components.cols()); }
};

inline Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "no samples");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto r = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd x(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == r, ErrorCode::DimensionMismatch,
            "sample lengths differ");
    for (Eigen::Index j = 0; j < r; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return x;
}

namespace detail {

inline constexpr double kEigenFloor = 1e-12;

struct Spectrum {
  Eigen::VectorXd mean;
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, matching `values`
  double total = 0.0;
};

inline Spectrum spectrum(const Eigen::MatrixXd& x) {
  require(x.rows() >= 2, ErrorCode::InsufficientSamples, "PCA needs at least 2 samples");
  Spectrum s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  require(es.info() == Eigen::Success, ErrorCode::RankDeficient, "covariance eigendecomposition failed");
  const Eigen::Index r = cov.rows();
  s.values.resize(r);
  s.vectors.resize(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    s.values(i) = std::max(0.0, es.eigenvalues()(r - 1 - i));
    s.vectors.col(i) = es.eigenvectors().col(r - 1 - i);
  }
  s.total = s.values.sum();
  return s;
}

inline PcaModel build(const Spectrum& s, std::size_t k, std::size_t requested) {
  PcaModel m;
  m.mean = s.mean;
  m.requested_k = requested;
  const Eigen::Index r = s.values.size();
  m.components.resize(static_cast<Eigen::Index>(k), r);
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::VectorXd v = s.vectors.col(static_cast<Eigen::Index>(i));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    m.components.row(static_cast<Eigen::Index>(i)) = v.transpose();
    m.explained_variance.push_back(s.values(static_cast<Eigen::Index>(i)));
    m.explained_variance_ratio.push_back(s.total > 0.0 ? s.values(static_cast<Eigen::Index>(i)) / s.total : 0.0);
  }
  return m;
}

inline std::size_t positive_count(const Spectrum& s) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < s.values.size(); ++i) n += s.values(i) > kEigenFloor ? 1 : 0;
  return n;
}

}  // namespace detail

// Eigendecomposition of the sample covariance; components sorted by decreasing
// eigenvalue, each signed so its largest-magnitude coordinate is positive. If fewer
// than k eigenvalues exceed 1e-12, k is truncated and a warning recorded.
inline PcaModel fit_pca(const Eigen::MatrixXd& x, std::size_t k) {
  require(x.rows() >= 2, ErrorCode::InsufficientSamples, "PCA needs at least 2 samples");
  require(k >= 1 && k <= std::min<std::size_t>(static_cast<std::size_t>(x.rows()) - 1, static_cast<std::size_t>(x.cols())),
          ErrorCode::InvalidArgument,
          "PCA dims k=" + std::to_string(k) + " must be in [1, min(n-1, R)] with n=" + std::to_string(x.rows()) +
              ", R=" + std::to_string(x.cols()));
  const auto s = detail::spectrum(x);
  const std::size_t positive = detail::positive_count(s);
  require(positive >= 1, ErrorCode::RankDeficient, "all samples are identical; covariance is zero");
  std::size_t kept = k;
  std::string warning;
  if (positive < k) {
    kept = positive;
    warning = "RankDeficient: covariance has " + std::to_string(positive) +
              " eigenvalues above 1e-12; k truncated from " + std::to_string(k) + " to " + std::to_string(kept);
    log::warn("{}", warning);
  }
  auto m = detail::build(s, kept, k);
  if (!warning.empty()) m.warnings.push_back(warning);
  return m;
}

// Smallest k whose cumulative explained variance ratio reaches `target`.
inline PcaModel fit_pca_variance(const Eigen::MatrixXd& x, double target) {
  require(target > 0.0 && target <= 1.0, ErrorCode::InvalidArgument, "variance target must be in (0, 1]");
  const auto s = detail::spectrum(x);
  const std::size_t positive = detail::positive_count(s);
  require(positive >= 1, ErrorCode::RankDeficient, "all samples are identical; covariance is zero");
  const std::size_t limit = std::min(positive, static_cast<std::size_t>(x.rows()) - 1);
  std::size_t k = 0;
  double cum = 0.0;
  while (k < limit && cum < target) {
    cum += s.values(static_cast<Eigen::Index>(k)) / s.total;
    ++k;
  }
  return detail::build(s, std::max<std::size_t>(k, 1), k);
}

inline Eigen::VectorXd project_pca(const Eigen::VectorXd& f, const PcaModel& m) {
  require(f.size() == m.mean.size(), ErrorCode::DimensionMismatch, "PCA input dimension mismatch");
  return m.components * (f - m.mean);
}

inline Eigen::VectorXd reconstruct_pca(const Eigen::VectorXd& z, const PcaModel& m) {
  require(static_cast<std::size_t>(z.size()) == m.k(), ErrorCode::DimensionMismatch, "PCA code dimension mismatch");
  return m.components.transpose() * z + m.mean;
}

}  // namespace fedrad::feature_space
