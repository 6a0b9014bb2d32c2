// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "fedrad/pipeline/experiment.hpp"
#include "oracles/feature_space_oracle.hpp"
#include "oracles/metrics_oracle.hpp"
#include "oracles/radiomics_oracle.hpp"
#include "support/fixtures.hpp"

using namespace fedrad;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class... T>
std::string str(const T&... parts) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << parts);
  return os.str();
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)) || std::abs(a - b) <= 1e-300;
}

// ---- 1, 2: radiomics -----------------------------------------------------------------

radiomics::DiscretizedVolume from_levels(Dims dims, std::vector<int> levels) {
  radiomics::DiscretizedVolume d;
  d.dims = dims;
  d.levels = std::move(levels);
  for (int l : d.levels)
    if (l > 0) {
      ++d.voxel_count;
      d.n_levels = std::max(d.n_levels, l);
    }
  return d;
}

// 93 features from the brute-force matrices and literal formulas.
std::vector<double> oracle_features(const std::vector<float>& values, const std::vector<std::uint8_t>& mask, Dims dims,
                                    double bw, double vox, std::string& mismatch) {
  using namespace radiomics;
  std::vector<double> x;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mask[i]) x.push_back(values[i]);
  const double lo = *std::min_element(x.begin(), x.end());
  std::vector<int> lv(values.size(), 0), inlv;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mask[i]) {
      lv[i] = static_cast<int>(std::floor((values[i] - lo) / bw)) + 1;
      inlv.push_back(lv[i]);
    }
  const auto d = from_levels(dims, lv);
  const double np = static_cast<double>(d.voxel_count);
  const int ng = d.n_levels;

  // the library's matrices must match the brute force ones exactly
  const auto lib_d = discretize(values, BrainMask(dims, mask), bw);
  if (lib_d.levels != d.levels) mismatch += " discretization";

  std::vector<double> out;
  auto fo = oracle::first_order(x, inlv, vox);
  out.insert(out.end(), fo.begin(), fo.end());

  const auto counts = oracle::glcm_counts(d, directions());
  const auto g = build_glcm(lib_d);
  std::array<double, 24> gl{};
  std::size_t used = 0;
  for (std::size_t k = 0; k < 13; ++k) {
    double total = 0;
    for (double c : counts[k]) total += c;
    if (static_cast<double>(g.pair_counts[k]) != total) mismatch += str(" glcm-count", k);
    if (total == 0) continue;
    std::vector<double> p(counts[k].size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = counts[k][i] / total;
    if (g.matrices[k].values != p) mismatch += str(" glcm", k);
    const auto f = oracle::glcm_features_literal(p, ng);
    for (std::size_t i = 0; i < 24; ++i) gl[i] += f[i];
    ++used;
  }
  if (used)
    for (auto& v : gl) v /= static_cast<double>(used);
  out.insert(out.end(), gl.begin(), gl.end());

  const auto& dirs = directions();
  std::vector<std::vector<std::pair<int, std::size_t>>> runs(13);
  std::size_t cols = 1;
  for (std::size_t k = 0; k < 13; ++k) {
    runs[k] = oracle::components(d, {dirs[k]});
    cols = std::max(cols, oracle::max_size(runs[k]));
  }
  const auto rl = build_glrlm(lib_d);
  std::array<double, 16> rlf{};
  for (std::size_t k = 0; k < 13; ++k) {
    const auto table = oracle::count_table(runs[k], ng, cols);
    if (rl.matrices[k].values != table) mismatch += str(" glrlm", k);
    const auto f = oracle::size_features_literal(table, ng, cols, np);
    for (std::size_t i = 0; i < 16; ++i) rlf[i] += f[i] / 13.0;
  }
  out.insert(out.end(), rlf.begin(), rlf.end());

  std::vector<Offset> all(neighbors26().begin(), neighbors26().end());
  const auto zones = oracle::components(d, all);
  const auto zcols = oracle::max_size(zones);
  const auto zt = oracle::count_table(zones, ng, zcols);
  if (build_glszm(lib_d).values != zt) mismatch += " glszm";
  const auto szf = oracle::size_features_literal(zt, ng, zcols, np);
  out.insert(out.end(), szf.begin(), szf.end());

  const auto ngm = oracle::ngtdm(d);
  if (build_ngtdm(lib_d).values != ngm) mismatch += " ngtdm";
  const auto ngf = oracle::ngtdm_features_literal(ngm, ng);
  out.insert(out.end(), ngf.begin(), ngf.end());

  const auto gdm = oracle::gldm(d);
  if (build_gldm(lib_d).values != gdm) mismatch += " gldm";
  const auto gdf = oracle::gldm_features_literal(gdm, ng);
  out.insert(out.end(), gdf.begin(), gdf.end());
  return out;
}

Verdict radiomics_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const auto names = radiomics::feature_names(1);
  std::size_t volumes = 0, matrix_fail = 0, feature_fail = 0;
  double worst = 0.0;
  std::string first;
  for (int t = 0; t < 60; ++t) {
    const Dims dims{2 + uniform_index(rng, 7), 2 + uniform_index(rng, 7), 2 + uniform_index(rng, 7)};
    const int ng = 1 + static_cast<int>(uniform_index(rng, 6));
    const double fill = t % 3 == 0 ? 1.0 : uniform(rng, 0.4, 0.95);
    std::vector<float> v(dims.voxels());
    std::vector<std::uint8_t> m(dims.voxels());
    for (std::size_t i = 0; i < v.size(); ++i) {
      // levels sit mid-bin so float rounding cannot move a value across a boundary
      v[i] = static_cast<float>(static_cast<double>(uniform_index(rng, ng)) + uniform(rng, 0.1, 0.9));
      m[i] = uniform(rng, 0, 1) < fill ? 1 : 0;
    }
    m[uniform_index(rng, m.size())] = 1;
    const double vox = uniform(rng, 0.5, 2.0);
    std::string mismatch;
    const auto want = oracle_features(v, m, dims, 1.0, vox, mismatch);
    const auto got = radiomics::modality_features(v, BrainMask(dims, m), 1.0, vox);
    ++volumes;
    if (!mismatch.empty()) {
      ++matrix_fail;
      if (first.empty()) first = str("volume ", t, ":", mismatch);
    }
    for (std::size_t i = 0; i < radiomics::kFeaturesPerModality; ++i) {
      const double scale = std::max(std::abs(got[i]), std::abs(want[i]));
      const double err = scale > 0 ? std::abs(got[i] - want[i]) / scale : 0.0;
      worst = std::max(worst, err);
      if (!rel_close(got[i], want[i], 1e-9)) {
        ++feature_fail;
        if (first.empty()) first = str("volume ", t, " ", names[i], ": ", got[i], " vs ", want[i]);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {matrix_fail == 0 && feature_fail == 0 && secs < 60.0,
          str(volumes, " volumes, matrix mismatches ", matrix_fail, ", feature mismatches ", feature_fail,
              ", worst rel err ", worst, ", ", secs, " s", first.empty() ? "" : "; first: " + first)};
}

Verdict count_identities() {
  Rng rng(202);
  std::size_t failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const Dims dims{1 + uniform_index(rng, 7), 1 + uniform_index(rng, 7), 1 + uniform_index(rng, 7)};
    const int ng = 1 + static_cast<int>(uniform_index(rng, 8));
    const double fill = uniform(rng, 0.05, 1.0);
    std::vector<int> lv(dims.voxels());
    for (auto& l : lv) l = uniform(rng, 0, 1) < fill ? 1 + static_cast<int>(uniform_index(rng, ng)) : 0;
    lv[uniform_index(rng, lv.size())] = 1;
    const auto d = from_levels(dims, lv);
    const auto n = static_cast<double>(d.voxel_count);
    for (const auto& m : radiomics::build_glrlm(d).matrices) {
      double total = 0;
      for (std::size_t g = 0; g < m.rows; ++g)
        for (std::size_t r = 0; r < m.cols; ++r) total += static_cast<double>(r + 1) * m(g, r);
      failures += total != n;
    }
    const auto z = radiomics::build_glszm(d);
    double zt = 0;
    for (std::size_t g = 0; g < z.rows; ++g)
      for (std::size_t s = 0; s < z.cols; ++s) zt += static_cast<double>(s + 1) * z(g, s);
    failures += zt != n;
    failures += radiomics::build_gldm(d).sum() != n;
  }
  return {failures == 0, str("1000 fuzz cases, ", failures, " failures")};
}

// ---- 3, 4, 5: feature space -------------------------------------------------------------

Verdict normalization_contract() {
  using feature_space::FeatureVector;
  std::vector<FeatureVector> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back({{static_cast<double>(i)}, {}});
  const auto p = feature_space::fit_normalization(grid, 2.0, 98.0);
  auto at = [&](double x) { return feature_space::apply_normalization(FeatureVector{{x}, {}}, p).values[0]; };
  bool ok = p.p_min[0] == 2.0 && p.p_max[0] == 98.0;
  ok = ok && at(2.0) == 0.0 && at(98.0) == 1.0 && at(50.0) == 0.5 && at(-7.0) == 0.0 && at(1000.0) == 1.0 &&
       at(0.0) == 0.0 && at(100.0) == 1.0;
  Rng rng(303);
  Normal normal;
  std::size_t outside = 0, checked = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 30), r = 1 + uniform_index(rng, 5);
    std::vector<FeatureVector> fs(n);
    for (auto& f : fs) {
      f.values.resize(r);
      for (auto& x : f.values) x = t % 4 == 0 ? std::round(normal(rng)) : normal(rng) * std::exp(normal(rng));
    }
    const auto q = feature_space::fit_normalization(fs, uniform(rng, 0, 20), uniform(rng, 80, 100));
    for (int s = 0; s < 20; ++s) {
      FeatureVector probe{std::vector<double>(r), {}};
      for (auto& x : probe.values) x = 50.0 * normal(rng);
      for (double y : feature_space::apply_normalization(probe, q).values) {
        ++checked;
        outside += !(y >= 0.0 && y <= 1.0);
      }
    }
  }
  return {ok && outside == 0, str("P2=", p.p_min[0], " P98=", p.p_max[0], ", endpoints/clamps ", ok ? "exact" : "WRONG",
                                 ", ", outside, " of ", checked, " fuzz outputs outside [0,1]")};
}

Verdict pca_properties() {
  Rng rng(404);
  Normal normal;
  double worst_orth = 0.0, worst_rec = 0.0, worst_ratio = 1.0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index r = 2 + static_cast<Eigen::Index>(uniform_index(rng, 8));
    const Eigen::Index n = r + 2 + static_cast<Eigen::Index>(uniform_index(rng, 20));
    Eigen::MatrixXd x(n, r);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < r; ++j) x(i, j) = normal(rng) * (1.0 + static_cast<double>(j)) + 3.0;
    const auto m = feature_space::fit_pca(x, static_cast<std::size_t>(r));
    const Eigen::MatrixXd g = m.components * m.components.transpose();
    worst_orth = std::max(worst_orth, (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = x.row(i).transpose();
      const auto back = feature_space::reconstruct_pca(feature_space::project_pca(xi, m), m);
      worst_rec = std::max(worst_rec, (back - xi).norm());
    }
    // rank one: every row on one line through a random offset
    Eigen::VectorXd u(r), c(r);
    for (Eigen::Index j = 0; j < r; ++j) {
      u(j) = normal(rng);
      c(j) = 5.0 * normal(rng);
    }
    Eigen::MatrixXd line(n, r);
    for (Eigen::Index i = 0; i < n; ++i) line.row(i) = (c + normal(rng) * u).transpose();
    const auto m1 = feature_space::fit_pca(line, 1);
    worst_ratio = std::min(worst_ratio, m1.explained_variance_ratio[0]);
  }
  const bool ok = worst_orth < 1e-8 && worst_rec < 1e-8 && worst_ratio >= 1.0 - 1e-9;
  return {ok, str("50 fits: max |VV^T - I| ", worst_orth, ", max reconstruction error ", worst_rec,
                  ", min rank-1 ratio 1-", 1.0 - worst_ratio)};
}

Verdict gmm_properties() {
  Rng rng(505);
  Normal normal;
  std::size_t non_monotone = 0, em_runs = 0;
  for (int run = 0; run < 100; ++run) {
    const std::size_t c = 1 + uniform_index(rng, 5);
    const auto n = static_cast<Eigen::Index>(c + 5 + uniform_index(rng, 40));
    const auto k = static_cast<Eigen::Index>(1 + uniform_index(rng, 4));
    Eigen::MatrixXd z(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < k; ++j) z(i, j) = normal(rng) + 2.0 * static_cast<double>(i % c);
    const auto fit = feature_space::fit_gmm_em(z, c, static_cast<std::uint64_t>(run));
    for (const auto& r : fit.runs) {
      ++em_runs;
      non_monotone += !r.monotone;
    }
  }

  // two wells, seed 0
  Eigen::MatrixXd w(200, 3);
  std::vector<int> truth;
  for (Eigen::Index i = 0; i < 200; ++i) {
    const int l = static_cast<int>(i % 2);
    truth.push_back(l);
    for (Eigen::Index j = 0; j < 3; ++j) w(i, j) = 0.5 * normal(rng);
    w(i, 0) += l ? 10.0 : -10.0;
  }
  const auto two = feature_space::fit_gmm_em(w, 2, 0);
  std::map<std::pair<int, int>, std::size_t> table;
  for (Eigen::Index i = 0; i < 200; ++i)
    ++table[{feature_space::assign_reduced(w.row(i).transpose(), two.model).cluster, truth[i]}];
  std::size_t agree = 0;
  for (int c = 1; c <= 2; ++c) agree += std::max(table[{c, 0}], table[{c, 1}]);
  const double purity = agree / 200.0;

  // C = 1 is closed form: sample mean, ML covariance plus ridge
  Eigen::MatrixXd z(40, 3);
  for (Eigen::Index i = 0; i < 40; ++i) z.row(i) << normal(rng), 2 * normal(rng) + 1, normal(rng) + z(i, 0);
  const auto one = feature_space::fit_gmm_em(z, 1, 0);
  const Eigen::VectorXd mean = z.colwise().mean().transpose();
  const Eigen::MatrixXd cz = z.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = cz.transpose() * cz / 40.0 + one.model.ridge * Eigen::MatrixXd::Identity(3, 3);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < 40; ++i) ll += oracle::log_joint(z.row(i).transpose(), 1.0, mean, cov);
  const double err = std::max({(one.model.means.row(0).transpose() - mean).cwiseAbs().maxCoeff(),
                               (one.model.covariance - cov).cwiseAbs().maxCoeff(), std::abs(one.model.weights(0) - 1.0),
                               std::abs(one.best_run().log_likelihood.back() - ll) / 40.0});
  const bool ok = non_monotone == 0 && purity >= 0.99 && err < 1e-8;
  return {ok, str(em_runs, " EM runs over 100 fits, ", non_monotone, " non-monotone; two-well purity ", purity,
                  "; C=1 max deviation ", err)};
}

// ---- 6, 7, 8: federation ------------------------------------------------------------------

fed::FederationConfig fed_cfg() {
  fed::FederationConfig cfg;
  cfg.local_epochs = 2;
  cfg.rounds = 8;
  cfg.finetune_rounds = 5;
  cfg.lr = 0.05;
  cfg.lr_local = 0.02;
  cfg.weight_decay = 1e-3;
  cfg.batch_size = 2;
  cfg.seed = 606;
  return cfg;
}

Verdict fedavg_degeneracies() {
  using Reg = toy::LinearRegression;
  const auto cfg = fed_cfg();
  const auto solo = fixtures::regression_data(9, 4);
  const auto c = fixtures::client("solo", solo);
  const auto fa = fed::run_fedavg(Reg{}, cfg, {c}, {0.0, 0.0}, cfg.rounds, cfg.lr, {});
  const auto sgd = fed::run_sgd(Reg{}, cfg, c, {0.0, 0.0}, cfg.rounds * cfg.local_epochs, cfg.local_epochs, cfg.lr, {});
  bool k1 = fa.final_params == sgd.final_params && fa.logs.size() == sgd.logs.size();
  for (std::size_t t = 0; k1 && t < fa.logs.size(); ++t) k1 = fa.logs[t].train_loss == sgd.logs[t].train_loss;

  const auto d1 = fixtures::regression_data(5, 1), d2 = fixtures::regression_data(12, 2),
             d3 = fixtures::regression_data(3, 3);
  const auto multi = fed::run_fedavg(Reg{}, cfg, {fixtures::client("b", d2), fixtures::client("a", d1),
                                                  fixtures::client("c", d3)},
                                     {0.0, 0.0}, cfg.rounds, cfg.lr, {});
  double worst = 0.0;
  for (const auto& l : multi.logs) worst = std::max(worst, std::abs(l.weight_sum - 1.0));

  const fed::ModelParams w{1.0, -2.0, 0.375}, d{0.5, -0.25, 8.0};
  const auto q = fed::fedavg_aggregate(w, {{"n1", d, 1}, {"n3", {0.0, 0.0, 0.0}, 3}});
  bool sizes = true;
  for (std::size_t i = 0; i < 3; ++i) sizes = sizes && q.params[i] == w[i] + 0.25 * d[i];
  return {k1 && worst <= 1e-12 && sizes,
          str("K=1 vs SGD ", k1 ? "bit-identical" : "DIFFERENT", "; max |weight sum - 1| ", worst,
              " over ", multi.logs.size(), " rounds; sizes {1,3} ", sizes ? "exact" : "WRONG")};
}

Verdict clustered_degeneracies() {
  using Reg = toy::LinearRegression;
  const auto cfg = fed_cfg();
  const auto d1 = fixtures::regression_data(5, 1), d2 = fixtures::regression_data(7, 2);
  const std::vector clients{fixtures::client("a", d1), fixtures::client("b", d2)};
  const auto pre = fed::run_fedavg(Reg{}, cfg, clients, {0.0, 0.0}, cfg.rounds, cfg.lr, {});
  const std::vector<fed::ClusterFederation<Reg::Sample>> one{{1, clients}};
  const auto cf = fed::run_clustered_finetune(Reg{}, cfg, one, pre.best, {});
  const auto cont = fed::run_fedavg(Reg{}, cfg, clients, pre.best, cfg.finetune_rounds, cfg.lr, {});
  const bool c1 = cf.runs.at(1).final_params == cont.final_params && cf.models.at(1) == cont.best;

  const std::vector<fed::ClusterFederation<Reg::Sample>> split{{1, {fixtures::client("a", d1)}},
                                                                {2, {fixtures::client("b", d2)}}};
  const auto cs = fed::run_clustered_finetune(Reg{}, cfg, split, pre.best, {});
  bool single = true;
  for (const auto& [id, data] : {std::pair{1, &d1}, std::pair{2, &d2}}) {
    const auto local = fed::run_sgd(Reg{}, cfg, fixtures::client(id == 1 ? "a" : "b", *data), pre.best,
                                    cfg.finetune_rounds * cfg.local_epochs, cfg.local_epochs, cfg.lr, {});
    single = single && cs.runs.at(id).final_params == local.final_params;
  }
  return {c1 && single, str("C=1 vs continued FedAvg ", c1 ? "bit-identical" : "DIFFERENT",
                            "; single-institution clusters vs local SGD ", single ? "bit-identical" : "DIFFERENT")};
}

template <class M>
double family_gradient_error(const M& model, std::uint64_t seed) {
  std::vector<typename M::Sample> samples;
  for (int i = 0; i < 2; ++i) {
    Volume v;
    BrainMask b;
    SegMask s;
    fixtures::phantom(2, Dims{6, 7, 5}, seed + static_cast<std::uint64_t>(i), v, b, s);
    samples.push_back(model.make_sample(v, b, s));
  }
  std::vector<const typename M::Sample*> batch{&samples[0], &samples[1]};
  Rng rng(seed);
  Normal normal;
  fed::ModelParams w = model.initial_params(seed);
  for (auto& x : w) x += 0.3 * normal(rng);
  const auto gc = fed::gradient_check(model, w, std::span<const typename M::Sample* const>(batch), 20, seed);
  return gc.relative_errors.size() == 20 ? gc.max_relative_error : INFINITY;
}

Verdict gradient_checks() {
  const double lin = family_gradient_error(fed::LinearSegmenter(2), 808);
  const double mlp = family_gradient_error(fed::PatchMlp(2), 809);
  return {lin < 1e-4 && mlp < 1e-4, str("20 probes each; max relative error linear ", lin, ", mlp ", mlp)};
}

// ---- 9, 11: end to end -----------------------------------------------------------------------

fs::path work_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fedrad_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

double mean_dice(const metrics::EvalReport& r) { return metrics::summary_json(r)["overall"]["dice"]["Average"]["mean"]; }

Verdict end_to_end_direction() {
  const auto t0 = Clock::now();
  auto cfg = pipeline::profile_defaults("desk");
  cfg.method = pipeline::Method::Cfft;
  cfg.output = work_dir("cfft");
  const auto cfft = pipeline::run_experiment(cfg);
  cfg.method = pipeline::Method::FedAvg;
  cfg.output = work_dir("fedavg");
  const auto fedavg = pipeline::run_experiment(cfg);
  const double secs = seconds_since(t0);

  std::map<std::pair<int, int>, std::size_t> table;
  std::set<std::string> insts;
  for (const auto& p : cfft.samples) {
    ++table[{p.assignment.cluster, p.source->regime}];
    insts.insert(p.institution());
  }
  std::map<int, std::size_t> best;
  for (const auto& [k, n] : table) best[k.first] = std::max(best[k.first], n);
  std::size_t agree = 0;
  for (const auto& [_, n] : best) agree += n;
  const double purity = static_cast<double>(agree) / static_cast<double>(cfft.samples.size());

  bool loss_ok = cfft.heldout_loss_init.size() == cfg.clustering.clusters;
  std::string losses;
  for (const auto& [c, l0] : cfft.heldout_loss_init) {
    const double l1 = cfft.heldout_loss_deployed.at(c);
    loss_ok = loss_ok && l1 < l0;
    losses += str(" c", c, " ", l0, "->", l1);
  }
  const double dc = mean_dice(cfft.report), df = mean_dice(fedavg.report);
  const bool ok = insts.size() == 3 && cfg.clustering.clusters == 2 && purity >= 0.95 && loss_ok && dc >= df &&
                  secs < 600.0;
  return {ok, str("purity ", purity, "; held-out loss", losses, "; test dice CFFT ", dc, " vs FedAvg ", df, "; ",
                  secs, " s")};
}

Verdict metrics_oracle() {
  Rng rng(1010);
  std::size_t dice_fail = 0, hd_fail = 0;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Dims d{1 + uniform_index(rng, 12), 1 + uniform_index(rng, 12), 1 + uniform_index(rng, 12)};
    const VoxelSize vs = t % 2 ? VoxelSize{1, 1, 1}
                               : VoxelSize{static_cast<float>(uniform(rng, 0.5, 2)),
                                           static_cast<float>(uniform(rng, 0.5, 2)),
                                           static_cast<float>(uniform(rng, 0.5, 2))};
    std::vector<std::uint8_t> a(d.voxels()), b(d.voxels());
    const double pa = uniform(rng, 0.0, 0.6), pb = uniform(rng, 0.0, 0.6);
    for (auto& x : a) x = uniform(rng, 0, 1) < pa ? 1 : 0;
    for (auto& x : b) x = uniform(rng, 0, 1) < pb ? 1 : 0;
    dice_fail += std::abs(metrics::dice(a, b) - oracle::dice(a, b)) > 1e-15;
    const auto got = metrics::hd95(a, b, d, vs), want = oracle::hd95(a, b, d, vs);
    if (got.has_value() != want.has_value()) {
      ++hd_fail;
    } else if (got) {
      worst = std::max(worst, std::abs(*got - *want));
      hd_fail += std::abs(*got - *want) > 1e-9;
    }
  }
  const Dims d{5, 9, 4};
  std::vector<std::uint8_t> p(d.voxels(), 0), q(d.voxels(), 0);
  p[d.index(1, 2, 1)] = 1;
  q[d.index(4, 2, 1)] = 1;
  const bool hand = metrics::dice(p, p) == 1.0 && metrics::hd95(p, p, d, {1, 1, 1}) == 0.0 &&
                    metrics::hd95(p, q, d, {1, 1, 1}) == 3.0 && metrics::hd95(q, p, d, {1, 1, 1}) == 3.0;
  return {dice_fail == 0 && hd_fail == 0 && hand,
          str("200 random pairs: dice mismatches ", dice_fail, ", hd95 mismatches ", hd_fail, " (max abs err ", worst,
              " mm); hand cases ", hand ? "exact" : "WRONG")};
}

Verdict determinism() {
  auto cfg = pipeline::profile_defaults("desk");
  cfg.method = pipeline::Method::Cfft;
  cfg.output = work_dir("determinism");
  const auto a = pipeline::run_experiment(cfg);
  const auto b = pipeline::run_experiment(cfg);
  const auto ma = pipeline::manifest_without_timestamps(a.manifest);
  const auto mb = pipeline::manifest_without_timestamps(b.manifest);
  return {ma == mb && !ma["files"].empty(),
          str(ma["files"].size(), " files, manifests ", ma == mb ? "identical" : "DIFFERENT", " apart from timestamps")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"radiomics matrices and features vs brute-force oracles", radiomics_oracle},
      {"GLRLM/GLSZM/GLDM count identities", count_identities},
      {"percentile normalization contract", normalization_contract},
      {"PCA orthonormality, rank-1, reconstruction", pca_properties},
      {"GMM EM monotonicity, purity, C=1 closed form", gmm_properties},
      {"FedAvg degeneracies", fedavg_degeneracies},
      {"clustered finetuning degeneracies", clustered_degeneracies},
      {"model gradient checks", gradient_checks},
      {"end-to-end direction check on the synthetic cohort", end_to_end_direction},
      {"Dice and HD95 vs brute-force oracles", metrics_oracle},
      {"run_experiment determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %2zu  %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
