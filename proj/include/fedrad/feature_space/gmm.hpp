#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "fedrad/core/error.hpp"
#include "fedrad/core/log.hpp"
#include "fedrad/core/random.hpp"

namespace fedrad::feature_space {

struct GmmModel {
  Eigen::VectorXd weights;      // C
  Eigen::MatrixXd means;        // C x k
  Eigen::MatrixXd covariance;   // k x k, shared by all components
  double ridge = 1e-6;

  std::size_t n_components() const { return static_cast<std::size_t>(weights.size()); }
  std::size_t dims() const { return static_cast<std::size_t>(means.cols()); }
};

struct GmmOptions {
  std::size_t n_init = 10;
  std::size_t max_iter = 500;
  double tol = 1e-7;  // on mean per-sample objective gain
  double ridge = 1e-6;
};

struct EmRun {
  std::uint64_t seed = 0;
  std::vector<double> objective;       // penalized log-likelihood after every E-step
  std::vector<double> log_likelihood;  // plain log-likelihood, same steps
  std::size_t iterations = 0;
  std::size_t reseeds = 0;
  bool converged = false;
  bool monotone = true;
};

struct GmmFit {
  GmmModel model;
  std::vector<EmRun> runs;
  std::size_t best = 0;

  const EmRun& best_run() const { return runs[best]; }
};

// Precomputed Cholesky factor of the tied covariance; immutable once built.
class GmmDensity {
 public:
  explicit GmmDensity(const GmmModel& m) : model_(&m), llt_(m.covariance) {
    require(llt_.info() == Eigen::Success, ErrorCode::RankDeficient, "GMM covariance is not positive definite");
    const Eigen::MatrixXd l = llt_.matrixL();
    log_det_ = 2.0 * l.diagonal().array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(m.dims()) * std::log(2.0 * std::numbers::pi) + log_det_);
  }

  // log(w_c) + log N(z; mu_c, Sigma) for every c.
  Eigen::VectorXd joint(const Eigen::VectorXd& z) const {
    const auto c = model_->weights.size();
    Eigen::VectorXd out(c);
    for (Eigen::Index j = 0; j < c; ++j) {
      const Eigen::VectorXd d = z - model_->means.row(j).transpose();
      const Eigen::VectorXd s = llt_.matrixL().solve(d);
      out(j) = std::log(model_->weights(j)) + log_norm_ - 0.5 * s.squaredNorm();
    }
    return out;
  }

  double trace_inverse() const {
    const auto k = model_->covariance.rows();
    return llt_.solve(Eigen::MatrixXd::Identity(k, k)).trace();
  }

 private:
  const GmmModel* model_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
  double log_norm_ = 0.0;
};

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Posterior responsibilities; they sum to 1 by construction.
inline Eigen::VectorXd responsibilities(const GmmDensity& g, const Eigen::VectorXd& z) {
  const Eigen::VectorXd j = g.joint(z);
  return (j.array() - log_sum_exp(j)).exp();
}

namespace detail {

struct EStep {
  Eigen::MatrixXd resp;         // n x C
  Eigen::VectorXd sample_ll;    // n
  double log_likelihood = 0.0;
  double objective = 0.0;
};

inline EStep e_step(const Eigen::MatrixXd& z, const GmmModel& m) {
  GmmDensity g(m);
  EStep e;
  const auto n = z.rows();
  e.resp.resize(n, m.weights.size());
  e.sample_ll.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd j = g.joint(z.row(i).transpose());
    const double lse = log_sum_exp(j);
    e.sample_ll(i) = lse;
    e.resp.row(i) = (j.array() - lse).exp().transpose();
  }
  e.log_likelihood = e.sample_ll.sum();
  // MAP objective whose exact M-step is Sigma = S/n + ridge*I.
  e.objective = e.log_likelihood - 0.5 * static_cast<double>(n) * m.ridge * g.trace_inverse();
  return e;
}

inline GmmModel m_step(const Eigen::MatrixXd& z, const Eigen::MatrixXd& resp, double ridge) {
  const auto n = z.rows();
  const auto k = z.cols();
  const auto c = resp.cols();
  GmmModel m;
  m.ridge = ridge;
  const Eigen::VectorXd nk = resp.colwise().sum().transpose();
  m.weights = nk / static_cast<double>(n);
  m.means = (resp.transpose() * z).array().colwise() / nk.array();
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j < c; ++j) {
    const Eigen::MatrixXd d = z.rowwise() - m.means.row(j);
    scatter.noalias() += d.transpose() * resp.col(j).asDiagonal() * d;
  }
  m.covariance = scatter / static_cast<double>(n);
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose());
  m.covariance.diagonal().array() += ridge;
  return m;
}

inline constexpr double kEmptyMass = 1e-10;

// An empty component takes over the sample the current model explains worst.
inline std::size_t reseed_empty(Eigen::MatrixXd& resp, const Eigen::VectorXd& sample_ll) {
  std::size_t reseeds = 0;
  std::vector<bool> taken(static_cast<std::size_t>(resp.rows()), false);
  for (Eigen::Index j = 0; j < resp.cols(); ++j) {
    if (resp.col(j).sum() > kEmptyMass) continue;
    Eigen::Index worst = -1;
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (worst < 0 || sample_ll(i) < sample_ll(worst)) worst = i;
    }
    require(worst >= 0, ErrorCode::TooFewSamples, "cannot reseed empty GMM component");
    taken[static_cast<std::size_t>(worst)] = true;
    resp.row(worst).setZero();
    resp(worst, j) = 1.0;
    ++reseeds;
  }
  return reseeds;
}

// k-means++ seeding followed by hard assignment to the nearest seed.
inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& z, std::size_t c, Rng& rng) {
  const auto n = static_cast<std::size_t>(z.rows());
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(uniform_index(rng, n)));
  Eigen::VectorXd d2 = (z.rowwise() - z.row(centers[0])).rowwise().squaredNorm();
  while (centers.size() < c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(uniform_index(rng, n));
    } else {
      double u = uniform(rng, 0.0, total);
      pick = static_cast<Eigen::Index>(n) - 1;
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        u -= d2(i);
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((z.rowwise() - z.row(pick)).rowwise().squaredNorm());
  }
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      const double d = (z.row(i) - z.row(centers[j])).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<Eigen::Index>(j);
      }
    }
    resp(i, best) = 1.0;
  }
  return resp;
}

inline std::pair<GmmModel, EmRun> em_once(const Eigen::MatrixXd& z, std::size_t c, std::uint64_t seed,
                                         const GmmOptions& opt) {
  EmRun run;
  run.seed = seed;
  Rng rng(seed);
  Eigen::MatrixXd resp = kmeanspp_init(z, c, rng);
  const double n = static_cast<double>(z.rows());
  GmmModel model;
  EStep e;
  Eigen::VectorXd sample_ll = Eigen::VectorXd::Zero(z.rows());
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const std::size_t reseeds = reseed_empty(resp, sample_ll);
    run.reseeds += reseeds;
    model = m_step(z, resp, opt.ridge);
    e = e_step(z, model);
    require(std::isfinite(e.objective), ErrorCode::NonFiniteLoss, "EM objective is not finite");
    run.iterations = it + 1;
    if (!run.objective.empty() && reseeds == 0) {
      const double prev = run.objective.back();
      const double slack = 1e-10 * std::max(1.0, std::abs(prev));
      if (e.objective < prev - slack) {
        run.monotone = false;
        log::warn("EM objective decreased at iteration {}: {} -> {}", it, prev, e.objective);
      }
    }
    const bool done = !run.objective.empty() && reseeds == 0 && (e.objective - run.objective.back()) / n < opt.tol;
    run.objective.push_back(e.objective);
    run.log_likelihood.push_back(e.log_likelihood);
    resp = e.resp;
    sample_ll = e.sample_ll;
    if (done) {
      run.converged = true;
      break;
    }
  }
  return {std::move(model), std::move(run)};
}

}  // namespace detail

// Tied-covariance GMM by EM; best of n_init restarts by final log-likelihood.
inline GmmFit fit_gmm_em(const Eigen::MatrixXd& z, std::size_t c, std::uint64_t seed, const GmmOptions& opt = {}) {
  require(c >= 1, ErrorCode::InvalidArgument, "GMM needs at least one component");
  require(static_cast<std::size_t>(z.rows()) >= c, ErrorCode::TooFewSamples,
          "GMM with C=" + std::to_string(c) + " needs at least C samples, got " + std::to_string(z.rows()));
  require(z.cols() >= 1, ErrorCode::InvalidArgument, "GMM input has zero dimensions");
  require(opt.n_init >= 1 && opt.max_iter >= 1, ErrorCode::InvalidArgument, "n_init and max_iter must be >= 1");
  GmmFit fit;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < opt.n_init; ++r) {
    auto [model, run] = detail::em_once(z, c, derive_seed(seed, 0x6a3, r), opt);
    const double ll = run.log_likelihood.back();
    fit.runs.push_back(std::move(run));
    if (ll > best_ll) {
      best_ll = ll;
      fit.best = r;
      fit.model = std::move(model);
    }
  }
  return fit;
}

}  // namespace fedrad::feature_space
