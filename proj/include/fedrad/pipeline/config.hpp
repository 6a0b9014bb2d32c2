#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedrad/core/parallel.hpp"
#include "fedrad/fed/federated.hpp"
#include "fedrad/feature_space/clustering.hpp"
#include "fedrad/radiomics/features.hpp"
#include "fedrad/volume/cohort.hpp"

namespace fedrad::pipeline {

enum class Method { Centralized, FedAvg, LocalFinetune, Cfft, CfftIdeal };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Centralized: return "centralized";
    case Method::FedAvg: return "fedavg";
    case Method::LocalFinetune: return "local_finetune";
    case Method::Cfft: return "cfft";
    case Method::CfftIdeal: return "cfft_ideal";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::Centralized, Method::FedAvg, Method::LocalFinetune, Method::Cfft, Method::CfftIdeal})
    if (to_string(m) == s) return m;
  fail(ErrorCode::Config, "unknown method '" + s + "' (expected centralized, fedavg, local_finetune, cfft, cfft_ideal)");
}

enum class SelectionMetric { Loss, Dice };

struct ModelSpec {
  std::string family = "linear";  // linear | mlp
  double ridge = 1e-4;            // linear only
  std::size_t hidden = 8;         // mlp only
  std::size_t modalities = 0;     // taken from the data
  std::size_t labels = 3;
};

struct ExperimentConfig {
  std::string profile = "desk";
  std::uint64_t seed = 0;
  Method method = Method::Cfft;
  std::filesystem::path output = "fedrad_run";
  std::size_t jobs = 0;  // 0: all cores

  std::optional<std::filesystem::path> cohort_dir;
  std::optional<CohortSpec> cohort_spec;

  std::size_t min_size = 16;
  radiomics::ExtractionConfig extraction;
  feature_space::ClusteringConfig clustering;
  std::vector<Split> fit_splits{Split::Train};
  fed::FederationConfig federation;
  ModelSpec model;
  SelectionMetric selection = SelectionMetric::Loss;

  std::size_t effective_jobs() const { return jobs == 0 ? default_jobs() : jobs; }
};

// Three institutions over two acquisition regimes; "mixed" holds both.
inline CohortSpec desk_cohort_spec() {
  CohortSpec s;
  s.seed = 7;
  s.dims = Dims{20, 20, 20};
  s.modalities = 2;
  RegimeParams a;
  a.noise_sigma = 0.15;
  RegimeParams b;
  b.noise_sigma = 0.1;
  b.noise_correlation = 1.0;
  b.smoothing_sigma = 1.5;
  b.gamma = 1.8;
  s.regimes = {{"sharp", a}, {"smooth", b}};
  s.institutions = {{"inst_a", {{"sharp", 16}}}, {"inst_b", {{"smooth", 16}}}, {"inst_mixed", {{"sharp", 8}, {"smooth", 8}}}};
  return s;
}

inline ExperimentConfig profile_defaults(const std::string& name) {
  ExperimentConfig c;
  c.profile = name;
  if (name == "paper") {
    c.min_size = 128;
    c.extraction.bin_width = 0.09;
    c.clustering.pca_dims = 30;
    c.clustering.clusters = 10;
    c.federation.rounds = 300;
    c.federation.finetune_rounds = 50;
    c.federation.local_finetune_epochs = 20;
    c.federation.lr = 0.05;
    c.federation.lr_local = 0.02;
    c.federation.weight_decay = 1e-5;
    c.federation.batch_size = 1;
    return c;
  }
  require(name == "desk", ErrorCode::Config, "unknown profile '" + name + "' (expected paper or desk)");
  c.min_size = 16;
  c.cohort_spec = desk_cohort_spec();
  c.clustering.pca_dims = 6;
  c.clustering.clusters = 2;
  c.federation.rounds = 20;
  c.federation.finetune_rounds = 10;
  c.federation.local_finetune_epochs = 10;
  c.federation.lr = 0.5;
  c.federation.lr_local = 0.5;
  c.federation.weight_decay = 1e-5;
  c.federation.batch_size = 2;
  return c;
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::Config, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      fail(ErrorCode::Config, "unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void overlay(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace detail

// Profile defaults overlaid with the document; unknown keys are rejected at every level.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, std::optional<std::string> profile = {},
                                                const std::filesystem::path& base_dir = {}) {
  using detail::overlay;
  using detail::reject_unknown;
  reject_unknown(j, {"version", "profile", "seed", "method", "output", "jobs", "cohort", "preprocess", "extraction",
                     "clustering", "federation", "model", "selection"},
                 "experiment config");
  try {
    require(j.value("version", 1) == 1, ErrorCode::Config, "unsupported experiment config version");
    ExperimentConfig c = profile_defaults(profile ? *profile : j.value("profile", std::string("desk")));
    overlay(j, "seed", c.seed);
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    overlay(j, "jobs", c.jobs);
    if (j.contains("cohort")) {
      const auto& co = j.at("cohort");
      reject_unknown(co, {"directory", "synthetic"}, "cohort");
      require(co.contains("directory") != co.contains("synthetic"), ErrorCode::Config,
              "cohort needs exactly one of 'directory' or 'synthetic'");
      if (co.contains("directory")) {
        std::filesystem::path p = co.at("directory").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        require(std::filesystem::is_regular_file(p / "cohort.json"), ErrorCode::Config,
                "cohort directory has no cohort.json: " + p.string());
        c.cohort_dir = p;
        c.cohort_spec.reset();
      } else {
        c.cohort_spec = parse_cohort_spec(co.at("synthetic"));
        c.cohort_dir.reset();
      }
    }
    if (j.contains("preprocess")) {
      reject_unknown(j.at("preprocess"), {"min_size"}, "preprocess");
      overlay(j.at("preprocess"), "min_size", c.min_size);
    }
    if (j.contains("extraction")) {
      reject_unknown(j.at("extraction"), {"bin_width"}, "extraction");
      overlay(j.at("extraction"), "bin_width", c.extraction.bin_width);
    }
    if (j.contains("clustering")) {
      const auto& cl = j.at("clustering");
      reject_unknown(cl, {"percentile_lo", "percentile_hi", "pca_dims", "variance_target", "clusters", "n_init",
                          "max_iter", "tol", "ridge", "fit_splits"},
                     "clustering");
      overlay(cl, "percentile_lo", c.clustering.percentile_lo);
      overlay(cl, "percentile_hi", c.clustering.percentile_hi);
      overlay(cl, "pca_dims", c.clustering.pca_dims);
      if (cl.contains("variance_target") && !cl.at("variance_target").is_null())
        c.clustering.variance_target = cl.at("variance_target").get<double>();
      overlay(cl, "clusters", c.clustering.clusters);
      overlay(cl, "n_init", c.clustering.gmm.n_init);
      overlay(cl, "max_iter", c.clustering.gmm.max_iter);
      overlay(cl, "tol", c.clustering.gmm.tol);
      overlay(cl, "ridge", c.clustering.gmm.ridge);
      if (cl.contains("fit_splits")) {
        c.fit_splits.clear();
        for (const auto& s : cl.at("fit_splits")) c.fit_splits.push_back(parse_split(s.get<std::string>()));
      }
    }
    if (j.contains("federation")) {
      const auto& f = j.at("federation");
      reject_unknown(f, {"local_epochs", "rounds", "finetune_rounds", "local_finetune_epochs", "lr", "lr_local",
                         "weight_decay", "batch_size"},
                     "federation");
      overlay(f, "local_epochs", c.federation.local_epochs);
      overlay(f, "rounds", c.federation.rounds);
      overlay(f, "finetune_rounds", c.federation.finetune_rounds);
      overlay(f, "local_finetune_epochs", c.federation.local_finetune_epochs);
      overlay(f, "lr", c.federation.lr);
      overlay(f, "lr_local", c.federation.lr_local);
      overlay(f, "weight_decay", c.federation.weight_decay);
      overlay(f, "batch_size", c.federation.batch_size);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      reject_unknown(m, {"family", "ridge", "hidden"}, "model");
      overlay(m, "family", c.model.family);
      overlay(m, "ridge", c.model.ridge);
      overlay(m, "hidden", c.model.hidden);
    }
    if (j.contains("selection")) {
      reject_unknown(j.at("selection"), {"metric"}, "selection");
      const auto metric = j.at("selection").value("metric", std::string("loss"));
      require(metric == "loss" || metric == "dice", ErrorCode::Config, "selection metric must be loss or dice");
      c.selection = metric == "loss" ? SelectionMetric::Loss : SelectionMetric::Dice;
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, std::string("experiment config: ") + e.what());
  }
}

inline void validate(const ExperimentConfig& c) {
  require(c.cohort_dir.has_value() != c.cohort_spec.has_value(), ErrorCode::Config,
          "experiment needs exactly one cohort source");
  if (c.cohort_dir)
    require(std::filesystem::exists(*c.cohort_dir / "cohort.json"), ErrorCode::Config,
            "cohort directory has no cohort.json: " + c.cohort_dir->string());
  if (c.cohort_spec) fedrad::validate(*c.cohort_spec);
  require(c.min_size >= 1, ErrorCode::Config, "preprocess.min_size must be >= 1");
  require(c.extraction.bin_width > 0.0, ErrorCode::Config, "extraction.bin_width must be > 0");
  require(c.clustering.clusters >= 1, ErrorCode::Config, "clustering.clusters must be >= 1");
  require(c.model.family == "linear" || c.model.family == "mlp", ErrorCode::Config,
          "model.family must be linear or mlp");
  require(!c.fit_splits.empty(), ErrorCode::Config, "clustering.fit_splits is empty");
  c.federation.validate();
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = 1;
  j["profile"] = c.profile;
  j["seed"] = c.seed;
  j["method"] = to_string(c.method);
  j["output"] = c.output.string();
  j["jobs"] = c.jobs;
  if (c.cohort_dir) j["cohort"] = {{"directory", c.cohort_dir->string()}};
  if (c.cohort_spec) j["cohort"] = {{"synthetic", to_json(*c.cohort_spec)}};
  j["preprocess"] = {{"min_size", c.min_size}};
  j["extraction"] = {{"bin_width", c.extraction.bin_width}};
  std::vector<std::string> splits;
  for (auto s : c.fit_splits) splits.push_back(to_string(s));
  j["clustering"] = {{"percentile_lo", c.clustering.percentile_lo},
                     {"percentile_hi", c.clustering.percentile_hi},
                     {"pca_dims", c.clustering.pca_dims},
                     {"variance_target", c.clustering.variance_target ? nlohmann::json(*c.clustering.variance_target)
                                                                      : nlohmann::json(nullptr)},
                     {"clusters", c.clustering.clusters},
                     {"n_init", c.clustering.gmm.n_init},
                     {"max_iter", c.clustering.gmm.max_iter},
                     {"tol", c.clustering.gmm.tol},
                     {"ridge", c.clustering.gmm.ridge},
                     {"fit_splits", splits}};
  const auto& f = c.federation;
  j["federation"] = {{"local_epochs", f.local_epochs},
                     {"rounds", f.rounds},
                     {"finetune_rounds", f.finetune_rounds},
                     {"local_finetune_epochs", f.local_finetune_epochs},
                     {"lr", f.lr},
                     {"lr_local", f.lr_local},
                     {"weight_decay", f.weight_decay},
                     {"batch_size", f.batch_size}};
  j["model"] = {{"family", c.model.family}, {"ridge", c.model.ridge}, {"hidden", c.model.hidden}};
  j["selection"] = {{"metric", c.selection == SelectionMetric::Loss ? "loss" : "dice"}};
  return j;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                               std::optional<std::string> profile = {}) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Config, path.string() + ": " + e.what());
  }
  return parse_experiment_config(j, std::move(profile), path.parent_path());
}

}  // namespace fedrad::pipeline
