// fedrad: stage-by-stage and end-to-end driver.
// Exit codes: 0 ok, 1 usage, 2 runtime failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedrad/pipeline/experiment.hpp"

namespace fs = std::filesystem;
using namespace fedrad;
using namespace fedrad::pipeline;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<std::size_t> jobs;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg =
      c.config.empty() ? profile_defaults(c.profile.value_or("desk")) : load_experiment_config(c.config, c.profile);
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  return cfg;
}

std::vector<InstitutionDataset> cohort_for(const ExperimentConfig& cfg, const std::string& dir) {
  if (!dir.empty()) return load_cohort(dir);
  return load_or_generate_cohort(cfg);
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

std::vector<radiomics::FeatureVector> vectors(const std::vector<radiomics::FeatureRow>& rows) {
  std::vector<radiomics::FeatureVector> out;
  for (const auto& r : rows) out.push_back(r.features);
  return out;
}

// ---- subcommands ---------------------------------------------------------------

struct GenCohort {
  std::string out;
  void run(const Common& c) const {
    auto cfg = resolve(c);
    require(cfg.cohort_spec.has_value(), ErrorCode::Config, "gen-cohort needs a synthetic cohort spec in the config");
    auto spec = *cfg.cohort_spec;
    if (c.seed) spec.seed = *c.seed;
    const auto cohort = generate_synthetic_cohort(spec, spec.seed, cfg.effective_jobs());
    std::vector<std::string> names;
    for (const auto& [n, _] : spec.regimes) names.push_back(n);
    save_cohort(out, cohort, names);
    std::size_t n = 0;
    for (const auto& i : cohort) n += i.samples.size();
    log::info("wrote {} samples over {} institutions to {}", n, cohort.size(), out);
  }
};

struct Extract {
  std::string cohort, image, brain, sample_id = "sample", institution = "site", out;
  std::vector<std::string> splits;
  std::optional<double> bin_width;

  void run(const Common& c) const {
    auto cfg = resolve(c);
    if (bin_width) cfg.extraction.bin_width = *bin_width;
    std::vector<const Sample*> todo;
    std::vector<InstitutionDataset> data;
    Sample single;
    if (!image.empty()) {
      single.sample_id = sample_id;
      single.institution_id = institution;
      single.image = io::load_volume(image);
      single.brain = brain.empty() ? nonzero_mask(single.image) : BrainMask(io::load_mask(brain));
      todo.push_back(&single);
    } else {
      data = cohort_for(cfg, cohort);
      for (const auto& inst : data)
        for (const auto& s : inst.samples)
          if (splits.empty() || std::find(splits.begin(), splits.end(), to_string(s.split)) != splits.end())
            todo.push_back(&s);
    }
    std::vector<radiomics::FeatureRow> rows(todo.size());
    parallel_for(todo.size(), cfg.effective_jobs(), [&](std::size_t i) {
      const auto& s = *todo[i];
      rows[i] = in_stage("extract", s.sample_id, [&] {
        const auto p = prepare_volume(s.image, s.brain, cfg.min_size);
        return radiomics::FeatureRow{s.sample_id, s.institution_id,
                                     radiomics::extract_feature_vector(p.image, p.brain, cfg.extraction)};
      });
    });
    radiomics::write_features_csv(out, rows);
    log::info("wrote {} feature rows to {}", rows.size(), out);
  }
};

struct FitClusters {
  std::string features, out;
  std::optional<std::size_t> clusters, pca_dims;
  std::optional<double> variance_target;

  void run(const Common& c) const {
    const auto cfg = resolve(c);
    auto cc = cfg.clustering;
    cc.seed = stage_seed(cfg.seed, "clustering");
    if (clusters) cc.clusters = *clusters;
    if (pca_dims) cc.pca_dims = *pca_dims;
    if (variance_target) cc.variance_target = *variance_target;
    const auto rows = radiomics::read_features_csv(features);
    const auto fit = feature_space::fit_clustering_pipeline(vectors(rows), cc);
    for (const auto& w : fit.pipeline.pca.warnings) log::warn("{}", w);
    feature_space::save_pipeline(out, fit.pipeline);
    log::info("fitted {} clusters on {} samples, {} principal components", fit.pipeline.n_clusters(), rows.size(),
              fit.pipeline.pca.k());
  }
};

struct Assign {
  std::string pipeline, features, out;
  void run(const Common&) const {
    const auto p = feature_space::load_pipeline(pipeline);
    std::vector<feature_space::AssignmentRow> rows;
    for (const auto& r : radiomics::read_features_csv(features)) {
      const auto a = in_stage("assign", r.sample_id, [&] { return feature_space::assign_cluster(r.features, p); });
      rows.push_back({r.sample_id, r.institution_id, a.cluster, a.max_responsibility()});
    }
    feature_space::write_assignments_csv(out, rows);
  }
};

void report_run(const ExperimentResult& r) {
  const auto s = metrics::summary_json(r.report);
  std::cout << "method " << r.bundle.method << ": test dice " << s["overall"]["dice"]["Average"]["mean"] << ", hd95 "
            << s["overall"]["hd95"]["Average"]["mean"] << " mm over " << r.report.samples.size() << " samples\n";
  for (const auto& [c, v] : r.heldout_loss_init)
    std::cout << "cluster " << c << ": held-out loss " << v << " (w_init) -> " << r.heldout_loss_deployed.at(c)
              << "\n";
  std::cout << "artifacts in " << r.config.output.string() << "\n";
}

struct Train {
  std::optional<std::string> method;
  std::string out, cohort;
  void run(const Common& c) const {
    auto cfg = resolve(c);
    if (method) cfg.method = parse_method(*method);
    if (!out.empty()) cfg.output = out;
    if (!cohort.empty()) {
      cfg.cohort_dir = cohort;
      cfg.cohort_spec.reset();
    }
    report_run(run_experiment(cfg));
  }
};

struct FinetuneClusters {
  std::string pipeline, w_init, out, cohort;
  bool ideal = false;
  void run(const Common& c) const {
    auto cfg = resolve(c);
    cfg.method = ideal ? Method::CfftIdeal : Method::Cfft;
    if (!out.empty()) cfg.output = out;
    if (!cohort.empty()) {
      cfg.cohort_dir = cohort;
      cfg.cohort_spec.reset();
    }
    ExperimentInputs in;
    in.pipeline = feature_space::load_pipeline(pipeline);
    in.w_init = fed::load_params(w_init);
    report_run(run_experiment(cfg, true, in));
  }
};

struct Infer {
  std::string bundle, image, brain, institution, out;
  void run(const Common&) const {
    const auto b = load_bundle(bundle);
    const auto v = io::load_volume(image);
    const auto mask = brain.empty() ? nonzero_mask(v) : BrainMask(io::load_mask(brain));
    const auto r = infer(b, v, mask, institution);
    io::save_mask(out, r.prediction, v.voxel_size());
    std::cout << nlohmann::json{{"cluster", r.cluster}, {"responsibilities", r.responsibilities}, {"model", r.model_key}}
                     .dump()
              << "\n";
  }
};

struct Eval {
  std::string bundle, cohort, split = "test", out;
  void run(const Common& c) const {
    const auto cfg = resolve(c);
    const auto b = load_bundle(bundle);
    const auto data = cohort_for(cfg, cohort);
    const Split want = parse_split(split);
    std::vector<const Sample*> todo;
    for (const auto& inst : data)
      for (const auto& s : inst.samples)
        if (s.split == want) todo.push_back(&s);
    require(!todo.empty(), ErrorCode::InvalidArgument, "no samples in split '" + split + "'");
    metrics::EvalReport rep;
    rep.method = b.method;
    rep.samples.resize(todo.size());
    parallel_for(todo.size(), cfg.effective_jobs(), [&](std::size_t i) {
      const auto& s = *todo[i];
      in_stage("evaluate", s.sample_id, [&] {
        const auto r = infer(b, s.image, s.brain, s.institution_id);
        rep.samples[i] = {s.sample_id, s.institution_id, r.cluster,
                          metrics::evaluate(r.prediction, s.labels, s.image.voxel_size())};
      });
    });
    metrics::write_eval_csv(fs::path(out) / "eval.csv", rep);
    const auto summary = metrics::summary_json(rep);
    write_json(fs::path(out) / "summary.json", summary);
    std::cout << "overall dice " << summary["overall"]["dice"]["Average"]["mean"] << " (n=" << rep.samples.size()
              << ")\n";
    for (const auto& [k, g] : summary["clusters"].items())
      std::cout << "cluster " << k << " dice " << g["dice"]["Average"]["mean"] << " (n=" << g["n"] << ")\n";
  }
};

struct Plot {
  std::string features, pipeline, cohort, out;
  void run(const Common& c) const {
    const auto cfg = resolve(c);
    const auto p = feature_space::load_pipeline(pipeline);
    const auto rows = radiomics::read_features_csv(features);
    std::vector<ProjectedSample> pts;
    std::map<std::string, int> cluster_of;
    for (const auto& r : rows) {
      const auto [x, y] = feature_space::projection_2d(r.features, p);
      const int k = feature_space::assign_cluster(r.features, p).cluster;
      cluster_of[r.sample_id] = k;
      pts.push_back({r.sample_id, r.institution_id, k, x, y});
    }
    const fs::path dir = out;
    write_projection_csv(dir / "projection.csv", pts);
    write_text(dir / "projection_institution.svg", projection_svg(pts, ColorBy::Institution));
    write_text(dir / "projection_cluster.svg", projection_svg(pts, ColorBy::Cluster));
    if (cohort.empty() && !cfg.cohort_spec) return;
    std::vector<LabelFractions> fr;
    for (const auto& inst : cohort_for(cfg, cohort))
      for (const auto& s : inst.samples) {
        auto f = label_fractions(s.labels, s.brain);
        f.sample_id = s.sample_id;
        f.institution_id = s.institution_id;
        auto it = cluster_of.find(s.sample_id);
        f.cluster = it == cluster_of.end() ? 0 : it->second;
        fr.push_back(f);
      }
    write_label_distribution(dir, fr);
  }
};

struct Outliers {
  std::string features, out;
  double factor = 10.0;
  std::optional<double> lo, hi;
  void run(const Common& c) const {
    const auto cfg = resolve(c);
    const auto rows = radiomics::read_features_csv(features);
    const auto fv = vectors(rows);
    const auto p = feature_space::fit_normalization(fv, lo.value_or(cfg.clustering.percentile_lo),
                                                    hi.value_or(cfg.clustering.percentile_hi));
    const auto flags = feature_space::detect_outliers(fv, p, factor);
    std::ofstream file;
    if (!out.empty()) file = csv::open(out);
    std::ostream& os = out.empty() ? std::cout : file;
    csv::write_row(os, {"sample_id", "institution_id", "feature", "value", "excess"});
    for (const auto& f : flags)
      csv::write_row(os, {rows[f.sample].sample_id, rows[f.sample].institution_id,
                          rows[f.sample].features.names.at(f.feature), csv::format_double(f.value),
                          csv::format_double(f.excess)});
    log::info("{} outlier values in {} samples", flags.size(), rows.size());
  }
};

}  // namespace

int main(int argc, char** argv) {
  if (!std::getenv("FEDRAD_LOG")) log::get()->set_level(spdlog::level::info);

  CLI::App app{"fedrad: radiomics-clustered federated finetuning"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "seed override");
  app.add_option("--profile", common.profile, "defaults profile")->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--jobs", common.jobs, "worker threads (default: all cores)")->check(CLI::PositiveNumber);

  std::function<void()> action;
  auto bind = [&](CLI::App* sub, auto& cmd) { sub->callback([&] { action = [&] { cmd.run(common); }; }); };

  GenCohort gen;
  auto* s = app.add_subcommand("gen-cohort", "write the synthetic cohort of the active profile/config");
  s->add_option("--out", gen.out, "cohort directory")->required();
  bind(s, gen);

  Extract ex;
  s = app.add_subcommand("extract", "radiomic features per sample");
  auto* src = s->add_option("--cohort", ex.cohort, "cohort directory")->check(CLI::ExistingDirectory);
  s->add_option("--image", ex.image, "single FVOL volume")->check(CLI::ExistingFile)->excludes(src);
  s->add_option("--brain", ex.brain, "brain mask (FMSK) for --image")->check(CLI::ExistingFile);
  s->add_option("--sample-id", ex.sample_id);
  s->add_option("--institution", ex.institution);
  s->add_option("--splits", ex.splits, "restrict to splits")->check(CLI::IsMember({"train", "val", "test"}));
  s->add_option("--bin-width", ex.bin_width)->check(CLI::PositiveNumber);
  s->add_option("--out", ex.out, "features CSV")->required();
  bind(s, ex);

  FitClusters fit;
  s = app.add_subcommand("fit-clusters", "fit normalization, PCA and GMM");
  s->add_option("--features", fit.features)->required()->check(CLI::ExistingFile);
  s->add_option("--clusters", fit.clusters)->check(CLI::PositiveNumber);
  s->add_option("--pca-dims", fit.pca_dims)->check(CLI::PositiveNumber);
  s->add_option("--variance-target", fit.variance_target)->check(CLI::Range(0.0, 1.0));
  s->add_option("--out", fit.out, "pipeline JSON")->required();
  bind(s, fit);

  Assign as;
  s = app.add_subcommand("assign", "assign samples to clusters");
  s->add_option("--pipeline", as.pipeline)->required()->check(CLI::ExistingFile);
  s->add_option("--features", as.features)->required()->check(CLI::ExistingFile);
  s->add_option("--out", as.out, "assignments CSV")->required();
  bind(s, as);

  Train tr;
  s = app.add_subcommand("train", "full experiment for one method");
  s->add_option("--method", tr.method)
      ->check(CLI::IsMember({"centralized", "fedavg", "local_finetune", "cfft", "cfft_ideal"}));
  s->add_option("--cohort", tr.cohort)->check(CLI::ExistingDirectory);
  s->add_option("--out", tr.out, "output directory");
  bind(s, tr);

  FinetuneClusters ft;
  s = app.add_subcommand("finetune-clusters", "clustered finetuning from a given w_init and pipeline");
  s->add_option("--pipeline", ft.pipeline)->required()->check(CLI::ExistingFile);
  s->add_option("--w-init", ft.w_init)->required()->check(CLI::ExistingFile);
  s->add_option("--cohort", ft.cohort)->check(CLI::ExistingDirectory);
  s->add_flag("--ideal", ft.ideal, "pool each cluster's data instead of federating");
  s->add_option("--out", ft.out, "output directory");
  bind(s, ft);

  Infer in;
  s = app.add_subcommand("infer", "route one volume and segment it");
  s->add_option("--bundle", in.bundle)->required()->check(CLI::ExistingDirectory);
  s->add_option("--image", in.image)->required()->check(CLI::ExistingFile);
  s->add_option("--brain", in.brain)->check(CLI::ExistingFile);
  s->add_option("--institution", in.institution);
  s->add_option("--out", in.out, "prediction FMSK")->required();
  bind(s, in);

  Eval ev;
  s = app.add_subcommand("eval", "Dice/HD95 of a bundle on a cohort split");
  s->add_option("--bundle", ev.bundle)->required()->check(CLI::ExistingDirectory);
  s->add_option("--cohort", ev.cohort)->check(CLI::ExistingDirectory);
  s->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "test"}));
  s->add_option("--out", ev.out, "report directory")->required();
  bind(s, ev);

  Plot pl;
  s = app.add_subcommand("plot", "2-D projection and label distribution");
  s->add_option("--features", pl.features)->required()->check(CLI::ExistingFile);
  s->add_option("--pipeline", pl.pipeline)->required()->check(CLI::ExistingFile);
  s->add_option("--cohort", pl.cohort)->check(CLI::ExistingDirectory);
  s->add_option("--out", pl.out, "plot directory")->required();
  bind(s, pl);

  Outliers ol;
  s = app.add_subcommand("outliers", "flag feature values far outside the percentile range");
  s->add_option("--features", ol.features)->required()->check(CLI::ExistingFile);
  s->add_option("--factor", ol.factor)->check(CLI::Range(1.0 + 1e-12, 1e300));
  s->add_option("--lo", ol.lo);
  s->add_option("--hi", ol.hi);
  s->add_option("--out", ol.out, "CSV (default stdout)");
  bind(s, ol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    action();
  } catch (const Error& e) {
    log::error("{}", e.what());
    return e.code() == ErrorCode::Config ? 1 : 2;
  } catch (const std::exception& e) {
    log::error("{}", e.what());
    return 2;
  }
  return 0;
}
