#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fedrad/core/random.hpp"
#include "fedrad/fed/params.hpp"
#include "fedrad/volume/volume.hpp"

namespace fedrad::fed {

namespace detail {

// Numerically stable binary cross-entropy on a logit; returns loss, writes dL/dz.
inline double bce_logit(double z, double y, double& dz) {
  const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  dz = s - y;
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

inline void check_pair(const Volume& v, const BrainMask& b) {
  require(v.dims() == b.dims(), ErrorCode::DimensionMismatch,
          "volume " + to_string(v.dims()) + " vs brain mask " + to_string(b.dims()));
}

}  // namespace detail

// Dense per-voxel design: rows are brain voxels, targets are per-label values in [0, 1].
struct VoxelSample {
  std::size_t n = 0;
  std::size_t n_inputs = 0;
  std::vector<double> x;  // n x n_inputs
  std::vector<double> y;  // n x labels
};

// Logistic regression per label on [x, mean_3x3x3(x), x^2] of every modality plus a bias,
// evaluated on brain voxels. Inputs are expected to be standardized.
class LinearSegmenter {
 public:
  using Sample = VoxelSample;

  explicit LinearSegmenter(std::size_t modalities, std::size_t labels = 3, double ridge = 1e-4)
      : modalities_(modalities), labels_(labels), ridge_(ridge) {
    require(modalities >= 1 && labels >= 1, ErrorCode::InvalidArgument, "model needs >= 1 modality and label");
    require(ridge >= 0.0, ErrorCode::InvalidArgument, "ridge must be >= 0");
  }

  std::size_t n_inputs() const { return 3 * modalities_ + 1; }
  std::size_t n_params() const { return labels_ * n_inputs(); }
  std::size_t labels() const { return labels_; }

  ModelParams initial_params(std::uint64_t /*seed*/) const { return ModelParams(n_params(), 0.0); }

  // Feature rows for every brain voxel, in raster order.
  std::vector<double> design(const Volume& v, const BrainMask& b) const {
    detail::check_pair(v, b);
    require(v.modalities() == modalities_, ErrorCode::DimensionMismatch,
            "model expects " + std::to_string(modalities_) + " modalities, volume has " +
                std::to_string(v.modalities()));
    const Dims& d = v.dims();
    const std::size_t f = n_inputs();
    std::vector<double> x;
    x.reserve(b.foreground() * f);
    auto mask = b.voxels();
    for (std::size_t z = 0; z < d.d; ++z)
      for (std::size_t y = 0; y < d.h; ++y)
        for (std::size_t xx = 0; xx < d.w; ++xx) {
          if (!mask[d.index(xx, y, z)]) continue;
          for (std::size_t c = 0; c < modalities_; ++c) {
            const double val = v.at(c, xx, y, z);
            double sum = 0.0;
            int cnt = 0;
            for (int dz = -1; dz <= 1; ++dz)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                  const long nx = static_cast<long>(xx) + dx, ny = static_cast<long>(y) + dy,
                             nz = static_cast<long>(z) + dz;
                  if (!d.contains(nx, ny, nz)) continue;
                  sum += v.at(c, static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                              static_cast<std::size_t>(nz));
                  ++cnt;
                }
            x.push_back(val);
            x.push_back(sum / cnt);
            x.push_back(val * val);
          }
          x.push_back(1.0);
        }
    return x;
  }

  Sample make_sample(const Volume& v, const BrainMask& b, const SegMask& s) const {
    require(s.dims() == v.dims() && s.channels() == labels_, ErrorCode::DimensionMismatch,
            "segmentation mask does not match model/volume");
    Sample out;
    out.n_inputs = n_inputs();
    out.x = design(v, b);
    out.n = out.x.size() / out.n_inputs;
    out.y.reserve(out.n * labels_);
    auto mask = b.voxels();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      for (std::size_t l = 0; l < labels_; ++l) out.y.push_back(s.channel(l)[i]);
    }
    return out;
  }

  LossGrad loss_and_gradient(const ModelParams& w, std::span<const Sample* const> batch) const {
    require(w.size() == n_params(), ErrorCode::DimensionMismatch, "parameter length mismatch");
    require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
    const std::size_t f = n_inputs();
    LossGrad out{0.0, ModelParams(w.size(), 0.0)};
    for (const Sample* s : batch) {
      require(s->n_inputs == f && s->n > 0, ErrorCode::DimensionMismatch, "sample does not match model");
      const double scale = 1.0 / static_cast<double>(s->n * labels_ * batch.size());
      for (std::size_t i = 0; i < s->n; ++i) {
        const double* xi = &s->x[i * f];
        for (std::size_t l = 0; l < labels_; ++l) {
          const double* wl = &w[l * f];
          double z = 0.0;
          for (std::size_t j = 0; j < f; ++j) z += wl[j] * xi[j];
          double dz = 0.0;
          out.loss += scale * detail::bce_logit(z, s->y[i * labels_ + l], dz);
          double* gl = &out.grad[l * f];
          for (std::size_t j = 0; j < f; ++j) gl[j] += scale * dz * xi[j];
        }
      }
    }
    for (std::size_t l = 0; l < labels_; ++l)
      for (std::size_t j = 0; j + 1 < f; ++j) {
        const double wj = w[l * f + j];
        out.loss += 0.5 * ridge_ * wj * wj;
        out.grad[l * f + j] += ridge_ * wj;
      }
    return out;
  }

  SegMask predict(const ModelParams& w, const Volume& v, const BrainMask& b) const {
    require(w.size() == n_params(), ErrorCode::DimensionMismatch, "parameter length mismatch");
    const auto x = design(v, b);
    const std::size_t f = n_inputs();
    const std::size_t nv = v.dims().voxels();
    std::vector<std::uint8_t> out(labels_ * nv, 0);
    auto mask = b.voxels();
    std::size_t row = 0;
    for (std::size_t i = 0; i < nv; ++i) {
      if (!mask[i]) continue;
      for (std::size_t l = 0; l < labels_; ++l) {
        double z = 0.0;
        for (std::size_t j = 0; j < f; ++j) z += w[l * f + j] * x[row * f + j];
        out[l * nv + i] = z > 0.0 ? 1 : 0;
      }
      ++row;
    }
    return SegMask(labels_, v.dims(), std::move(out));
  }

 private:
  std::size_t modalities_;
  std::size_t labels_;
  double ridge_;
};

// ---- two-layer perceptron on 2x-downsampled patches ------------------------

struct PatchSample {
  std::size_t n = 0;
  std::size_t n_inputs = 0;
  std::vector<double> x;  // n x n_inputs
  std::vector<double> y;  // n x labels, soft targets (label fraction of the block)
};

// Block-averages brain voxels onto a half-resolution grid; each coarse voxel touching
// the brain gets a 3x3x3 patch over all modalities, fed through one tanh hidden layer.
class PatchMlp {
 public:
  using Sample = PatchSample;

  PatchMlp(std::size_t modalities, std::size_t labels = 3, std::size_t hidden = 8)
      : modalities_(modalities), labels_(labels), hidden_(hidden) {
    require(modalities >= 1 && labels >= 1 && hidden >= 1, ErrorCode::InvalidArgument, "invalid MLP shape");
  }

  std::size_t n_inputs() const { return 27 * modalities_; }
  std::size_t n_params() const { return hidden_ * (n_inputs() + 1) + labels_ * (hidden_ + 1); }
  std::size_t labels() const { return labels_; }

  ModelParams initial_params(std::uint64_t seed) const {
    Rng rng(derive_seed(seed, 0x31f));
    Normal normal;
    ModelParams w(n_params(), 0.0);
    const std::size_t d = n_inputs();
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (std::size_t i = 0; i < hidden_ * d; ++i) w[i] = s1 * normal(rng);
    const std::size_t w2 = hidden_ * (d + 1);
    for (std::size_t i = 0; i < labels_ * hidden_; ++i) w[w2 + i] = s2 * normal(rng);
    return w;
  }

  static Dims coarse_dims(const Dims& d) { return Dims{(d.h + 1) / 2, (d.w + 1) / 2, (d.d + 1) / 2}; }

  struct Coarse {
    Dims dims;
    std::vector<double> values;       // modalities x coarse voxels
    std::vector<std::uint8_t> brain;  // coarse voxels
    std::vector<double> fraction;     // labels x coarse voxels
  };

  Coarse downsample(const Volume& v, const BrainMask& b, const SegMask* s) const {
    detail::check_pair(v, b);
    require(v.modalities() == modalities_, ErrorCode::DimensionMismatch, "modality count mismatch");
    const Dims& d = v.dims();
    Coarse c;
    c.dims = coarse_dims(d);
    const std::size_t nc = c.dims.voxels();
    c.values.assign(modalities_ * nc, 0.0);
    c.brain.assign(nc, 0);
    c.fraction.assign(labels_ * nc, 0.0);
    std::vector<double> count(nc, 0.0);
    auto mask = b.voxels();
    for (std::size_t z = 0; z < d.d; ++z)
      for (std::size_t y = 0; y < d.h; ++y)
        for (std::size_t x = 0; x < d.w; ++x) {
          const std::size_t i = d.index(x, y, z);
          if (!mask[i]) continue;
          const std::size_t ci = c.dims.index(x / 2, y / 2, z / 2);
          count[ci] += 1.0;
          for (std::size_t m = 0; m < modalities_; ++m) c.values[m * nc + ci] += v.at(m, x, y, z);
          if (s)
            for (std::size_t l = 0; l < labels_; ++l) c.fraction[l * nc + ci] += s->channel(l)[i];
        }
    for (std::size_t ci = 0; ci < nc; ++ci) {
      if (count[ci] == 0.0) continue;
      c.brain[ci] = 1;
      for (std::size_t m = 0; m < modalities_; ++m) c.values[m * nc + ci] /= count[ci];
      for (std::size_t l = 0; l < labels_; ++l) c.fraction[l * nc + ci] /= count[ci];
    }
    return c;
  }

  std::vector<double> patches(const Coarse& c) const {
    const Dims& d = c.dims;
    const std::size_t nc = d.voxels();
    std::vector<double> x;
    for (std::size_t z = 0; z < d.d; ++z)
      for (std::size_t y = 0; y < d.h; ++y)
        for (std::size_t xx = 0; xx < d.w; ++xx) {
          if (!c.brain[d.index(xx, y, z)]) continue;
          for (std::size_t m = 0; m < modalities_; ++m)
            for (int dz = -1; dz <= 1; ++dz)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                  const long nx = static_cast<long>(xx) + dx, ny = static_cast<long>(y) + dy,
                             nz = static_cast<long>(z) + dz;
                  x.push_back(d.contains(nx, ny, nz)
                                  ? c.values[m * nc + d.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                                                              static_cast<std::size_t>(nz))]
                                  : 0.0);
                }
        }
    return x;
  }

  Sample make_sample(const Volume& v, const BrainMask& b, const SegMask& s) const {
    require(s.dims() == v.dims() && s.channels() == labels_, ErrorCode::DimensionMismatch,
            "segmentation mask does not match model/volume");
    const auto c = downsample(v, b, &s);
    Sample out;
    out.n_inputs = n_inputs();
    out.x = patches(c);
    out.n = out.x.size() / out.n_inputs;
    const std::size_t nc = c.dims.voxels();
    for (std::size_t ci = 0; ci < nc; ++ci) {
      if (!c.brain[ci]) continue;
      for (std::size_t l = 0; l < labels_; ++l) out.y.push_back(c.fraction[l * nc + ci]);
    }
    return out;
  }

  LossGrad loss_and_gradient(const ModelParams& w, std::span<const Sample* const> batch) const {
    require(w.size() == n_params(), ErrorCode::DimensionMismatch, "parameter length mismatch");
    require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
    const std::size_t d = n_inputs();
    const std::size_t b1 = hidden_ * d, w2 = b1 + hidden_, b2 = w2 + labels_ * hidden_;
    LossGrad out{0.0, ModelParams(w.size(), 0.0)};
    std::vector<double> h(hidden_), dh(hidden_);
    for (const Sample* s : batch) {
      require(s->n_inputs == d && s->n > 0, ErrorCode::DimensionMismatch, "sample does not match model");
      const double scale = 1.0 / static_cast<double>(s->n * labels_ * batch.size());
      for (std::size_t i = 0; i < s->n; ++i) {
        const double* xi = &s->x[i * d];
        for (std::size_t k = 0; k < hidden_; ++k) {
          double a = w[b1 + k];
          for (std::size_t j = 0; j < d; ++j) a += w[k * d + j] * xi[j];
          h[k] = std::tanh(a);
          dh[k] = 0.0;
        }
        for (std::size_t l = 0; l < labels_; ++l) {
          double z = w[b2 + l];
          for (std::size_t k = 0; k < hidden_; ++k) z += w[w2 + l * hidden_ + k] * h[k];
          double dz = 0.0;
          out.loss += scale * detail::bce_logit(z, s->y[i * labels_ + l], dz);
          dz *= scale;
          out.grad[b2 + l] += dz;
          for (std::size_t k = 0; k < hidden_; ++k) {
            out.grad[w2 + l * hidden_ + k] += dz * h[k];
            dh[k] += dz * w[w2 + l * hidden_ + k];
          }
        }
        for (std::size_t k = 0; k < hidden_; ++k) {
          const double da = dh[k] * (1.0 - h[k] * h[k]);
          out.grad[b1 + k] += da;
          for (std::size_t j = 0; j < d; ++j) out.grad[k * d + j] += da * xi[j];
        }
      }
    }
    return out;
  }

  SegMask predict(const ModelParams& w, const Volume& v, const BrainMask& b) const {
    require(w.size() == n_params(), ErrorCode::DimensionMismatch, "parameter length mismatch");
    const auto c = downsample(v, b, nullptr);
    const auto x = patches(c);
    const std::size_t d = n_inputs();
    const std::size_t b1 = hidden_ * d, w2 = b1 + hidden_, b2 = w2 + labels_ * hidden_;
    const std::size_t nc = c.dims.voxels();
    std::vector<std::uint8_t> coarse(labels_ * nc, 0);
    std::vector<double> h(hidden_);
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < nc; ++ci) {
      if (!c.brain[ci]) continue;
      const double* xi = &x[row * d];
      for (std::size_t k = 0; k < hidden_; ++k) {
        double a = w[b1 + k];
        for (std::size_t j = 0; j < d; ++j) a += w[k * d + j] * xi[j];
        h[k] = std::tanh(a);
      }
      for (std::size_t l = 0; l < labels_; ++l) {
        double z = w[b2 + l];
        for (std::size_t k = 0; k < hidden_; ++k) z += w[w2 + l * hidden_ + k] * h[k];
        coarse[l * nc + ci] = z > 0.0 ? 1 : 0;
      }
      ++row;
    }
    const Dims& fd = v.dims();
    const std::size_t nv = fd.voxels();
    std::vector<std::uint8_t> out(labels_ * nv, 0);
    auto mask = b.voxels();
    for (std::size_t z = 0; z < fd.d; ++z)
      for (std::size_t y = 0; y < fd.h; ++y)
        for (std::size_t xx = 0; xx < fd.w; ++xx) {
          const std::size_t i = fd.index(xx, y, z);
          if (!mask[i]) continue;
          const std::size_t ci = c.dims.index(xx / 2, y / 2, z / 2);
          for (std::size_t l = 0; l < labels_; ++l) out[l * nv + i] = coarse[l * nc + ci];
        }
    return SegMask(labels_, fd, std::move(out));
  }

 private:
  std::size_t modalities_;
  std::size_t labels_;
  std::size_t hidden_;
};

// ---- finite-difference validation -----------------------------------------

struct GradientCheck {
  std::vector<double> relative_errors;
  double max_relative_error = 0.0;

  bool passed(double tol = 1e-4) const { return max_relative_error < tol; }
};

// Central differences along random unit directions compared with grad . u.
template <TrainableModel M>
GradientCheck gradient_check(const M& model, const ModelParams& w, std::span<const typename M::Sample* const> batch,
                             std::size_t probes = 20, std::uint64_t seed = 0, double h = 1e-5) {
  const auto base = model.loss_and_gradient(w, batch);
  Rng rng(derive_seed(seed, 0x9c));
  Normal normal;
  GradientCheck out;
  for (std::size_t p = 0; p < probes; ++p) {
    ModelParams u(w.size());
    double norm = 0.0;
    for (auto& x : u) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    ModelParams plus = w, minus = w;
    double analytic = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      u[i] /= norm;
      plus[i] += h * u[i];
      minus[i] -= h * u[i];
      analytic += base.grad[i] * u[i];
    }
    const double fd =
        (model.loss_and_gradient(plus, batch).loss - model.loss_and_gradient(minus, batch).loss) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
    out.relative_errors.push_back(std::abs(fd - analytic) / denom);
    out.max_relative_error = std::max(out.max_relative_error, out.relative_errors.back());
  }
  return out;
}

}  // namespace fedrad::fed
