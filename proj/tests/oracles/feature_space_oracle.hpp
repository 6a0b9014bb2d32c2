#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Percentile by full sort: rank h = (n-1) q / 100, interpolate between floor and ceil.
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// log w_c + log N(z; mu_c, Sigma) through an explicit inverse and LU determinant.
inline double log_joint(const Eigen::VectorXd& z, double w, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  const Eigen::MatrixXd inv = lu.inverse();
  const Eigen::VectorXd d = z - mu;
  const double k = static_cast<double>(z.size());
  return std::log(w) - 0.5 * (k * std::log(2.0 * std::numbers::pi) + std::log(lu.determinant()) + d.dot(inv * d));
}

}  // namespace oracle
