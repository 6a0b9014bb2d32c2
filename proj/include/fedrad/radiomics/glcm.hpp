#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fedrad/radiomics/texture.hpp"

namespace fedrad::radiomics {

// One co-occurrence matrix per direction (distance 1), accumulated symmetrically and
// normalized to sum 1. Directions without any in-mask pair keep an all-zero matrix
// and pair_counts == 0; they are left out of feature averaging.
struct Glcm {
  int n_levels = 0;
  std::array<TextureMatrix, 13> matrices;
  std::array<std::size_t, 13> pair_counts{};
};

inline Glcm build_glcm(const DiscretizedVolume& d) {
  require(d.n_levels >= 1, ErrorCode::InvalidArgument, "GLCM needs at least one gray level");
  Glcm out;
  out.n_levels = d.n_levels;
  const auto ng = static_cast<std::size_t>(d.n_levels);
  const auto& dirs = directions();
  std::array<std::vector<std::size_t>, 13> counts;
  for (auto& c : counts) c.assign(ng * ng, 0);
  const Dims& dims = d.dims;
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x) {
        const int a = d.levels[dims.index(x, y, z)];
        if (a == 0) continue;
        for (std::size_t k = 0; k < 13; ++k) {
          const int b = d.at(static_cast<long>(x) + dirs[k][0], static_cast<long>(y) + dirs[k][1],
                             static_cast<long>(z) + dirs[k][2]);
          if (b == 0) continue;
          ++counts[k][static_cast<std::size_t>(a - 1) * ng + static_cast<std::size_t>(b - 1)];
          ++counts[k][static_cast<std::size_t>(b - 1) * ng + static_cast<std::size_t>(a - 1)];
          out.pair_counts[k] += 2;
        }
      }
    }
  }
  for (std::size_t k = 0; k < 13; ++k) {
    TextureMatrix m(TextureFamily::Glcm, ng, ng);
    if (out.pair_counts[k] > 0) {
      const auto total = static_cast<double>(out.pair_counts[k]);
      for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = static_cast<double>(counts[k][i]) / total;
    }
    out.matrices[k] = std::move(m);
  }
  return out;
}

inline constexpr std::array<std::string_view, 24> kGlcmNames{
    "Autocorrelation",    "JointAverage",       "ClusterProminence", "ClusterShade",  "ClusterTendency",
    "Contrast",           "Correlation",        "DifferenceAverage", "DifferenceEntropy",
    "DifferenceVariance", "JointEnergy",        "JointEntropy",      "Imc1",          "Imc2",
    "Idm",                "Idmn",               "Id",                "Idn",           "InverseVariance",
    "MaximumProbability", "SumAverage",         "SumEntropy",        "SumSquares",    "MCC"};

using GlcmFeatures = std::array<double, 24>;

// Second largest eigenvalue of Q(i,j) = sum_k p(i,k) p(j,k) / (px(i) py(k)).
// For a symmetric matrix Q = (D^-1/2 P D^-1/2)^2 with D = diag(px), so its spectrum
// is the squared spectrum of a symmetric matrix. Values below 1e-12 are taken as 0.
inline double glcm_mcc(const TextureMatrix& p, const std::vector<double>& px) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (px[i] > 0.0) keep.push_back(i);
  }
  if (keep.size() < 2) return 0.0;
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto i = keep[static_cast<std::size_t>(r)];
      const auto j = keep[static_cast<std::size_t>(c)];
      a(r, c) = p(i, j) / std::sqrt(px[i] * px[j]);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  std::vector<double> sq(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) sq[static_cast<std::size_t>(i)] = es.eigenvalues()(i) * es.eigenvalues()(i);
  std::sort(sq.begin(), sq.end(), std::greater<>());
  const double second = sq[1];
  return second < 1e-12 ? 0.0 : std::sqrt(second);
}

inline GlcmFeatures glcm_direction_features(const TextureMatrix& p, int n_levels) {
  const auto ng = static_cast<std::size_t>(n_levels);
  std::vector<double> px(ng, 0.0);
  std::vector<double> psum(2 * ng + 1, 0.0);  // index k = i + j, levels 1-based
  std::vector<double> pdiff(ng, 0.0);         // index k = |i - j|
  double mu = 0.0, autocorr = 0.0, energy = 0.0, hxy = 0.0, maxp = 0.0;
  double idm = 0.0, idmn = 0.0, id = 0.0, idn = 0.0;
  const double ngd = static_cast<double>(ng);
  for (std::size_t r = 0; r < ng; ++r) {
    for (std::size_t c = 0; c < ng; ++c) {
      const double v = p(r, c);
      if (v == 0.0) continue;
      const double i = static_cast<double>(r + 1), j = static_cast<double>(c + 1);
      const double diff = std::abs(i - j);
      px[r] += v;
      psum[r + c + 2] += v;
      pdiff[r > c ? r - c : c - r] += v;
      mu += i * v;
      autocorr += i * j * v;
      energy += v * v;
      hxy += entropy_term(v);
      maxp = std::max(maxp, v);
      idm += v / (1.0 + diff * diff);
      idmn += v / (1.0 + diff * diff / (ngd * ngd));
      id += v / (1.0 + diff);
      idn += v / (1.0 + diff / ngd);
    }
  }
  // P is symmetric, so py == px and mu_y == mu_x.
  double var = 0.0, hx = 0.0;
  for (std::size_t r = 0; r < ng; ++r) {
    const double i = static_cast<double>(r + 1);
    var += (i - mu) * (i - mu) * px[r];
    hx += entropy_term(px[r]);
  }
  double prominence = 0.0, shade = 0.0, tendency = 0.0, hxy1 = 0.0, hxy2 = 0.0;
  for (std::size_t r = 0; r < ng; ++r) {
    for (std::size_t c = 0; c < ng; ++c) {
      const double v = p(r, c);
      const double pp = px[r] * px[c];
      if (pp > 0.0) hxy2 -= pp * std::log2(pp);
      if (v == 0.0) continue;
      const double t = static_cast<double>(r + c + 2) - 2.0 * mu;
      prominence += t * t * t * t * v;
      shade += t * t * t * v;
      tendency += t * t * v;
      hxy1 -= v * std::log2(pp);
    }
  }
  double contrast = 0.0, diff_avg = 0.0, diff_ent = 0.0, inv_var = 0.0;
  for (std::size_t k = 0; k < ng; ++k) {
    const double kd = static_cast<double>(k);
    contrast += kd * kd * pdiff[k];
    diff_avg += kd * pdiff[k];
    diff_ent += entropy_term(pdiff[k]);
    if (k > 0) inv_var += pdiff[k] / (kd * kd);
  }
  double diff_var = 0.0;
  for (std::size_t k = 0; k < ng; ++k) {
    const double kd = static_cast<double>(k);
    diff_var += (kd - diff_avg) * (kd - diff_avg) * pdiff[k];
  }
  double sum_avg = 0.0, sum_ent = 0.0;
  for (std::size_t k = 2; k < psum.size(); ++k) {
    sum_avg += static_cast<double>(k) * psum[k];
    sum_ent += entropy_term(psum[k]);
  }
  const double correlation = var > 0.0 ? (autocorr - mu * mu) / var : 0.0;
  const double imc1 = safe_div(hxy - hxy1, hx);
  const double imc2 = hxy2 > hxy ? std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - hxy)))) : 0.0;

  GlcmFeatures f{};
  f[0] = autocorr;
  f[1] = mu;
  f[2] = prominence;
  f[3] = shade;
  f[4] = tendency;
  f[5] = contrast;
  f[6] = correlation;
  f[7] = diff_avg;
  f[8] = diff_ent;
  f[9] = diff_var;
  f[10] = energy;
  f[11] = hxy;
  f[12] = imc1;
  f[13] = imc2;
  f[14] = idm;
  f[15] = idmn;
  f[16] = id;
  f[17] = idn;
  f[18] = inv_var;
  f[19] = maxp;
  f[20] = sum_avg;
  f[21] = sum_ent;
  f[22] = var;
  f[23] = glcm_mcc(p, px);
  return f;
}

// Features per direction, averaged over directions that have at least one pair.
// A mask with no adjacent voxel pairs yields all zeros.
inline GlcmFeatures glcm_features(const Glcm& g) {
  GlcmFeatures avg{};
  std::size_t used = 0;
  for (std::size_t k = 0; k < 13; ++k) {
    if (g.pair_counts[k] == 0) continue;
    const auto f = glcm_direction_features(g.matrices[k], g.n_levels);
    for (std::size_t i = 0; i < f.size(); ++i) avg[i] += f[i];
    ++used;
  }
  if (used > 0) {
    for (auto& v : avg) v /= static_cast<double>(used);
  }
  return avg;
}

}  // namespace fedrad::radiomics
