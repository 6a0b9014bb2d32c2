#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedrad/metrics/report.hpp"
#include "fedrad/pipeline/bundle.hpp"
#include "fedrad/pipeline/plots.hpp"

namespace fedrad::pipeline {

// Re-throws library errors with the stage and sample that raised them.
template <class Fn>
auto in_stage(std::string_view stage, std::string_view sample, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string ctx = "stage '" + std::string(stage) + "'";
    if (!sample.empty()) ctx += ", sample '" + std::string(sample) + "'";
    throw Error(e.code(), ctx + ": " + e.message());
  }
}

inline std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) { return derive_seed(seed, hash_id(stage)); }

struct PreparedSample {
  const Sample* source = nullptr;
  Prepared prep;
  SegMask labels;  // cropped like prep
  radiomics::FeatureVector features;
  feature_space::ClusterAssignment assignment;

  const std::string& id() const { return source->sample_id; }
  const std::string& institution() const { return source->institution_id; }
  Split split() const { return source->split; }
};

inline std::vector<InstitutionDataset> load_or_generate_cohort(const ExperimentConfig& c) {
  if (c.cohort_dir) return in_stage("load-cohort", "", [&] { return load_cohort(*c.cohort_dir); });
  return in_stage("generate-cohort", "",
                  [&] { return generate_synthetic_cohort(*c.cohort_spec, c.cohort_spec->seed, c.effective_jobs()); });
}

// Crop, standardize and extract features for every sample, in cohort order.
inline std::vector<PreparedSample> prepare_cohort(const std::vector<InstitutionDataset>& cohort,
                                                  const ExperimentConfig& c) {
  std::vector<PreparedSample> out;
  for (const auto& inst : cohort)
    for (const auto& s : inst.samples) out.push_back(PreparedSample{&s, {}, {}, {}, {}});
  require(!out.empty(), ErrorCode::InvalidArgument, "cohort has no samples");
  parallel_for(out.size(), c.effective_jobs(), [&](std::size_t i) {
    auto& p = out[i];
    in_stage("extract", p.id(), [&] {
      p.prep = prepare_volume(p.source->image, p.source->brain, c.min_size);
      p.labels = apply_crop(p.source->labels, p.prep.crop);
      p.features = radiomics::extract_feature_vector(p.prep.image, p.prep.brain, c.extraction);
    });
  });
  return out;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<InstitutionDataset> cohort;
  std::vector<PreparedSample> samples;  // points into cohort
  feature_space::ClusteringFit clustering;
  DeployBundle bundle;
  fed::ModelParams w_init;
  fed::FedResult pretrain;
  std::map<int, fed::FedResult> cluster_runs;
  std::map<std::string, fed::FedResult> local_runs;
  metrics::EvalReport report;
  std::map<int, double> heldout_loss_init;      // per cluster, test samples
  std::map<int, double> heldout_loss_deployed;  // same samples, routed model
  std::vector<std::filesystem::path> files;
  nlohmann::json manifest;
};

// Stages to skip: a fitted pipeline replaces clustering, a w_init replaces pretraining.
struct ExperimentInputs {
  std::optional<feature_space::ClusteringPipeline> pipeline;
  std::optional<fed::ModelParams> w_init;
};

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <fed::SegmentationModel M>
struct Trainer {
  const M& model;
  const ExperimentConfig& cfg;
  ExperimentResult& r;
  const ExperimentInputs& given;
  std::vector<typename M::Sample> inputs;  // aligned with r.samples

  double mean_loss(const fed::ModelParams& w, const std::vector<std::size_t>& idx) const {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (std::size_t i : idx) {
      const typename M::Sample* p = &inputs[i];
      s += model.loss_and_gradient(w, std::span<const typename M::Sample* const>(&p, 1)).loss;
    }
    return s / static_cast<double>(idx.size());
  }

  double mean_dice(const fed::ModelParams& w, const std::vector<std::size_t>& idx) const {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (std::size_t i : idx) {
      const auto& p = r.samples[i];
      const auto pred = metrics::compose_regions(model.predict(w, p.prep.image, p.prep.brain));
      const auto gt = metrics::compose_regions(p.labels);
      for (std::size_t k = 0; k < 3; ++k) s += metrics::dice(pred.masks[k], gt.masks[k]) / 3.0;
    }
    return s / static_cast<double>(idx.size());
  }

  // Higher is better.
  double score(const fed::ModelParams& w, const std::vector<std::size_t>& idx) const {
    return cfg.selection == SelectionMetric::Loss ? -mean_loss(w, idx) : mean_dice(w, idx);
  }

  void run() {
    const std::size_t n = r.samples.size();
    inputs.resize(n);
    parallel_for(n, cfg.effective_jobs(), [&](std::size_t i) {
      const auto& p = r.samples[i];
      inputs[i] = in_stage("model-input", p.id(), [&] { return model.make_sample(p.prep.image, p.prep.brain, p.labels); });
    });

    std::map<std::string, fed::Client<typename M::Sample>> by_inst;
    std::map<std::string, std::vector<std::size_t>> val_inst;
    std::map<int, std::vector<std::size_t>> val_cluster, test_cluster;
    std::vector<std::size_t> val_all;
    std::map<int, std::map<std::string, fed::Client<typename M::Sample>>> by_cluster;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = r.samples[i];
      auto& c = by_inst[p.institution()];
      c.id = p.institution();
      const int k = p.assignment.cluster;
      auto& cc = by_cluster[k][p.institution()];
      cc.id = p.institution();
      if (p.split() == Split::Train) {
        c.train.push_back(&inputs[i]);
        cc.train.push_back(&inputs[i]);
      } else if (p.split() == Split::Val) {
        c.val.push_back(&inputs[i]);
        cc.val.push_back(&inputs[i]);
        val_all.push_back(i);
        val_inst[p.institution()].push_back(i);
        val_cluster[k].push_back(i);
      } else {
        test_cluster[k].push_back(i);
      }
    }
    std::vector<fed::Client<typename M::Sample>> clients;
    for (auto& [_, c] : by_inst) clients.push_back(c);

    fed::FederationConfig fc = cfg.federation;
    fc.seed = stage_seed(cfg.seed, "federation");
    fc.jobs = cfg.effective_jobs();
    const fed::ModelParams w0 = model.initial_params(stage_seed(cfg.seed, "model"));
    const fed::EvalFn pooled_eval = [&](const fed::ModelParams& w) { return score(w, val_all); };
    const std::size_t n_clusters = r.clustering.pipeline.n_clusters();

    auto& b = r.bundle;
    if (given.w_init) {
      require(given.w_init->size() == model.n_params(), ErrorCode::DimensionMismatch,
              "w_init has " + std::to_string(given.w_init->size()) + " parameters, model needs " +
                  std::to_string(model.n_params()));
      r.pretrain = fed::FedResult{*given.w_init, 0, *given.w_init, {}};
    } else if (cfg.method == Method::Centralized) {
      const auto pooled = fed::pool_clients(clients);
      r.pretrain = in_stage("train-centralized", "", [&] {
        return fed::run_sgd(model, fc, pooled, w0, fc.rounds * fc.local_epochs, fc.local_epochs, fc.lr_local, pooled_eval);
      });
    } else {
      r.pretrain = in_stage("train-fedavg", "",
                            [&] { return fed::run_fedavg(model, fc, clients, w0, fc.rounds, fc.lr, pooled_eval); });
    }
    r.w_init = r.pretrain.best;
    for (std::size_t c = 1; c <= n_clusters; ++c) b.cluster_models[static_cast<int>(c)] = r.w_init;

    std::vector<fed::ClusterFederation<typename M::Sample>> clusters;
    for (std::size_t c = 1; c <= n_clusters; ++c) {
      fed::ClusterFederation<typename M::Sample> cf;
      cf.cluster = static_cast<int>(c);
      for (auto& [_, cl] : by_cluster[static_cast<int>(c)]) cf.clients.push_back(cl);
      clusters.push_back(std::move(cf));
    }
    const fed::ClusterEvalFn cluster_eval = [&](int c, const fed::ModelParams& w) { return score(w, val_cluster[c]); };

    if (cfg.method == Method::LocalFinetune) {
      const fed::ClientEvalFn inst_eval = [&](const std::string& id, const fed::ModelParams& w) {
        return score(w, val_inst[id]);
      };
      r.local_runs = in_stage("local-finetune", "",
                              [&] { return fed::local_finetune_baseline(model, fc, clients, r.w_init, inst_eval); });
      for (const auto& [id, run] : r.local_runs) b.institution_models[id] = run.best;
    } else if (cfg.method == Method::Cfft || cfg.method == Method::CfftIdeal) {
      auto res = in_stage("cluster-finetune", "", [&] {
        return cfg.method == Method::Cfft ? fed::run_clustered_finetune(model, fc, clusters, r.w_init, cluster_eval)
                                          : fed::pooled_finetune_ideal(model, fc, clusters, r.w_init, cluster_eval);
      });
      for (const auto& [c, w] : res.models) b.cluster_models[c] = w;
      r.cluster_runs = std::move(res.runs);
    }

    for (const auto& [c, idx] : test_cluster) {
      if (idx.empty()) continue;
      r.heldout_loss_init[c] = mean_loss(r.w_init, idx);
      r.heldout_loss_deployed[c] = mean_loss(b.cluster_models.at(c), idx);
    }
  }
};

}  // namespace detail

// Deterministic in the config: same config, same artifacts (manifest timestamps aside).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write = true,
                                       const ExperimentInputs& given = {}) {
  validate(cfg);
  ExperimentResult r;
  r.config = cfg;
  r.cohort = load_or_generate_cohort(cfg);
  r.samples = prepare_cohort(r.cohort, cfg);
  const std::size_t m = r.samples.front().source->image.modalities();

  std::vector<radiomics::FeatureVector> fit_set;
  for (const auto& p : r.samples) {
    require(p.source->image.modalities() == m, ErrorCode::DimensionMismatch,
            "sample " + p.id() + " has a different modality count");
    if (std::find(cfg.fit_splits.begin(), cfg.fit_splits.end(), p.split()) != cfg.fit_splits.end())
      fit_set.push_back(p.features);
  }
  auto ccfg = cfg.clustering;
  ccfg.seed = stage_seed(cfg.seed, "clustering");
  if (given.pipeline) {
    require(given.pipeline->norm.size() == r.samples.front().features.values.size(), ErrorCode::DimensionMismatch,
            "clustering pipeline feature count differs from the cohort's");
    r.clustering.pipeline = *given.pipeline;
  } else {
    r.clustering =
        in_stage("fit-clusters", "", [&] { return feature_space::fit_clustering_pipeline(fit_set, ccfg); });
  }
  for (auto& w : r.clustering.pipeline.pca.warnings) log::warn("{}", w);
  for (auto& p : r.samples)
    p.assignment = in_stage("assign", p.id(), [&] { return feature_space::assign_cluster(p.features, r.clustering.pipeline); });

  auto& b = r.bundle;
  b.method = to_string(cfg.method);
  b.pipeline = r.clustering.pipeline;
  b.extraction = cfg.extraction;
  b.min_size = cfg.min_size;
  b.model = cfg.model;
  b.model.modalities = m;
  with_model(b.model, [&](const auto& model) {
    detail::Trainer<std::decay_t<decltype(model)>> t{model, cfg, r, given, {}};
    t.run();
  });

  // Test evaluation goes through the deploy path exactly as a new institution would.
  std::vector<const PreparedSample*> test;
  for (const auto& p : r.samples)
    if (p.split() == Split::Test) test.push_back(&p);
  r.report.method = b.method;
  r.report.samples.resize(test.size());
  parallel_for(test.size(), cfg.effective_jobs(), [&](std::size_t i) {
    const auto& p = *test[i];
    in_stage("evaluate", p.id(), [&] {
      const auto inf = infer(b, p.source->image, p.source->brain, p.institution());
      if (inf.cluster != p.assignment.cluster)
        log::warn("sample {} routed to cluster {} at inference, {} during training", p.id(), inf.cluster,
                  p.assignment.cluster);
      auto& e = r.report.samples[i];
      e.sample_id = p.id();
      e.institution_id = p.institution();
      e.cluster = inf.cluster;
      e.regions = metrics::evaluate(inf.prediction, p.source->labels, p.source->image.voxel_size());
    });
  });
  if (!write) return r;

  // ---- artifacts --------------------------------------------------------------
  const auto& out = cfg.output;
  std::filesystem::create_directories(out);
  std::filesystem::remove_all(out / "bundle");
  std::filesystem::remove_all(out / "logs");
  auto& files = r.files;
  {
    const auto path = out / "config.json";
    // where and how wide the run executed does not belong in the experiment record
    auto echo = to_json(cfg);
    echo.erase("output");
    echo.erase("jobs");
    write_text(path, echo.dump(2) + "\n");
    files.push_back(path);
  }
  {
    std::vector<radiomics::FeatureRow> rows;
    std::vector<feature_space::AssignmentRow> assign;
    auto os = csv::open(out / "samples.csv");
    csv::write_row(os, {"sample_id", "institution_id", "split", "regime", "cluster_id"});
    for (const auto& p : r.samples) {
      rows.push_back({p.id(), p.institution(), p.features});
      assign.push_back({p.id(), p.institution(), p.assignment.cluster, p.assignment.max_responsibility()});
      csv::write_row(os, {p.id(), p.institution(), to_string(p.split()), std::to_string(p.source->regime),
                          std::to_string(p.assignment.cluster)});
    }
    os.close();
    radiomics::write_features_csv(out / "features.csv", rows);
    feature_space::write_assignments_csv(out / "assignments.csv", assign);
    files.insert(files.end(), {out / "samples.csv", out / "features.csv", out / "assignments.csv"});
  }
  {
    const std::string pre = cfg.method == Method::Centralized ? "centralized" : "fedavg";
    if (!r.pretrain.logs.empty()) {
      fed::write_round_logs_csv(out / "logs" / ("rounds_" + pre + ".csv"), r.pretrain.logs);
      files.push_back(out / "logs" / ("rounds_" + pre + ".csv"));
    }
    for (const auto& [c, run] : r.cluster_runs) {
      const auto p = out / "logs" / ("rounds_cluster_" + std::to_string(c) + ".csv");
      fed::write_round_logs_csv(p, run.logs);
      files.push_back(p);
    }
    for (const auto& [id, run] : r.local_runs) {
      if (run.logs.empty()) continue;
      const auto p = out / "logs" / ("epochs_local_" + id + ".csv");
      fed::write_round_logs_csv(p, run.logs);
      files.push_back(p);
    }
  }
  {
    const auto written = save_bundle(out / "bundle", b);
    files.insert(files.end(), written.begin(), written.end());
    fed::save_params(out / "w_init.bin", r.w_init);
    files.push_back(out / "w_init.bin");
  }
  {
    metrics::write_eval_csv(out / "eval" / "eval.csv", r.report);
    auto summary = metrics::summary_json(r.report);
    for (const auto& [c, v] : r.heldout_loss_init) {
      summary["heldout_loss"][std::to_string(c)] = {{"w_init", v}, {"deployed", r.heldout_loss_deployed.at(c)}};
    }
    write_text(out / "eval" / "summary.json", summary.dump(2) + "\n");
    files.insert(files.end(), {out / "eval" / "eval.csv", out / "eval" / "summary.json"});
  }
  {
    std::vector<ProjectedSample> pts;
    std::vector<LabelFractions> fr;
    for (const auto& p : r.samples) {
      const auto [x, y] = feature_space::projection_2d(p.features, r.clustering.pipeline);
      pts.push_back({p.id(), p.institution(), p.assignment.cluster, x, y});
      auto f = label_fractions(p.source->labels, p.source->brain);
      f.sample_id = p.id();
      f.institution_id = p.institution();
      f.cluster = p.assignment.cluster;
      fr.push_back(f);
    }
    write_projection_csv(out / "plots" / "projection.csv", pts);
    write_text(out / "plots" / "projection_institution.svg", projection_svg(pts, ColorBy::Institution));
    write_text(out / "plots" / "projection_cluster.svg", projection_svg(pts, ColorBy::Cluster));
    write_label_distribution(out / "plots", fr);
    for (const char* f : {"projection.csv", "projection_institution.svg", "projection_cluster.svg",
                          "label_fractions.csv", "label_distribution.csv"})
      files.push_back(out / "plots" / f);
  }

  nlohmann::json man;
  man["format"] = "fedrad-run-manifest";
  man["version"] = 1;
  man["created_utc"] = detail::utc_timestamp();
  man["method"] = b.method;
  man["seed"] = cfg.seed;
  std::vector<std::filesystem::path> rel;
  for (const auto& f : files) rel.push_back(std::filesystem::relative(f, out));
  std::sort(rel.begin(), rel.end());
  man["files"] = nlohmann::json::array();
  for (const auto& f : rel)
    man["files"].push_back({{"path", f.generic_string()},
                            {"bytes", std::filesystem::file_size(out / f)},
                            {"sha256", sha256_file(out / f)}});
  write_text(out / "manifest.json", man.dump(2) + "\n");
  r.manifest = man;
  return r;
}

// Manifest without its timestamp, for determinism comparisons.
inline nlohmann::json manifest_without_timestamps(nlohmann::json m) {
  m.erase("created_utc");
  return m;
}

}  // namespace fedrad::pipeline
