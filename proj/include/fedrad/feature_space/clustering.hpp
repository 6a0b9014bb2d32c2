#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedrad/core/csv.hpp"
#include "fedrad/feature_space/gmm.hpp"
#include "fedrad/feature_space/normalization.hpp"
#include "fedrad/feature_space/pca.hpp"

namespace fedrad::feature_space {

struct ClusteringConfig {
  double percentile_lo = 2.0;
  double percentile_hi = 98.0;
  std::size_t pca_dims = 30;
  std::optional<double> variance_target;  // overrides pca_dims when set
  std::size_t clusters = 10;
  std::uint64_t seed = 0;
  GmmOptions gmm;
};

struct ClusteringPipeline {
  NormalizationParams norm;
  PcaModel pca;
  GmmModel gmm;
  std::vector<std::string> feature_names;

  std::size_t n_clusters() const { return gmm.n_components(); }
};

struct ClusteringFit {
  ClusteringPipeline pipeline;
  GmmFit gmm_fit;
  std::vector<Eigen::VectorXd> reduced;  // training samples in PCA space
};

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline PcaModel fit_pca(const std::vector<FeatureVector>& normed, std::size_t k) {
  std::vector<std::vector<double>> rows;
  for (const auto& f : normed) rows.push_back(f.values);
  return fit_pca(rows_to_matrix(rows), k);
}

inline Eigen::VectorXd reduce(const FeatureVector& raw, const ClusteringPipeline& p) {
  require(raw.size() == p.norm.size(), ErrorCode::DimensionMismatch,
          "feature vector has " + std::to_string(raw.size()) + " values, pipeline expects " +
              std::to_string(p.norm.size()));
  return project_pca(to_eigen(apply_normalization(raw, p.norm).values), p.pca);
}

inline ClusteringFit fit_clustering_pipeline(const std::vector<FeatureVector>& features, const ClusteringConfig& cfg) {
  ClusteringFit out;
  auto& p = out.pipeline;
  p.norm = fit_normalization(features, cfg.percentile_lo, cfg.percentile_hi);
  if (!features.front().names.empty()) p.feature_names = features.front().names;
  std::vector<std::vector<double>> rows;
  rows.reserve(features.size());
  for (const auto& f : features) rows.push_back(apply_normalization(f, p.norm).values);
  const Eigen::MatrixXd x = rows_to_matrix(rows);
  p.pca = cfg.variance_target ? fit_pca_variance(x, *cfg.variance_target) : fit_pca(x, cfg.pca_dims);
  Eigen::MatrixXd z(x.rows(), static_cast<Eigen::Index>(p.pca.k()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd zi = project_pca(x.row(i).transpose(), p.pca);
    z.row(i) = zi.transpose();
    out.reduced.push_back(std::move(zi));
  }
  out.gmm_fit = fit_gmm_em(z, cfg.clusters, cfg.seed, cfg.gmm);
  p.gmm = out.gmm_fit.model;
  return out;
}

struct ClusterAssignment {
  int cluster = 0;  // 1-based
  std::vector<double> responsibilities;

  double max_responsibility() const { return responsibilities[static_cast<std::size_t>(cluster - 1)]; }
};

inline ClusterAssignment assign_reduced(const Eigen::VectorXd& z, const GmmModel& g) {
  require(static_cast<std::size_t>(z.size()) == g.dims(), ErrorCode::DimensionMismatch, "GMM input dimension mismatch");
  const Eigen::VectorXd r = responsibilities(GmmDensity(g), z);
  ClusterAssignment a;
  a.responsibilities.assign(r.data(), r.data() + r.size());
  // first maximum wins ties
  std::size_t best = 0;
  for (std::size_t c = 1; c < a.responsibilities.size(); ++c)
    if (a.responsibilities[c] > a.responsibilities[best]) best = c;
  a.cluster = static_cast<int>(best) + 1;
  return a;
}

inline ClusterAssignment assign_cluster(const FeatureVector& f, const ClusteringPipeline& p) {
  return assign_reduced(reduce(f, p), p.gmm);
}

// Top-2 PCA coordinates, for plotting.
inline std::pair<double, double> projection_2d(const FeatureVector& f, const ClusteringPipeline& p) {
  const Eigen::VectorXd z = reduce(f, p);
  return {z.size() > 0 ? z(0) : 0.0, z.size() > 1 ? z(1) : 0.0};
}

// ---- partition -------------------------------------------------------------

struct PartitionEntry {
  std::size_t sample = 0;  // caller's index
  std::string institution_id;
  int cluster = 0;         // 1-based
};

struct ClusterPartition {
  std::size_t n_clusters = 0;
  std::vector<std::string> institutions;  // sorted
  // members[c-1][institution] -> sample indices in input order
  std::vector<std::map<std::string, std::vector<std::size_t>>> members;

  std::size_t count(int cluster, const std::string& inst) const {
    const auto& m = members.at(static_cast<std::size_t>(cluster - 1));
    const auto it = m.find(inst);
    return it == m.end() ? 0 : it->second.size();
  }
  std::size_t cluster_size(int cluster) const {
    std::size_t n = 0;
    for (const auto& [inst, v] : members.at(static_cast<std::size_t>(cluster - 1))) n += v.size();
    return n;
  }
  std::vector<int> empty_clusters() const {
    std::vector<int> out;
    for (std::size_t c = 0; c < n_clusters; ++c)
      if (cluster_size(static_cast<int>(c) + 1) == 0) out.push_back(static_cast<int>(c) + 1);
    return out;
  }
};

inline ClusterPartition partition_by_cluster(const std::vector<PartitionEntry>& entries, std::size_t n_clusters) {
  ClusterPartition p;
  p.n_clusters = n_clusters;
  p.members.resize(n_clusters);
  std::map<std::string, bool> seen;
  for (const auto& e : entries) {
    require(e.cluster >= 1 && static_cast<std::size_t>(e.cluster) <= n_clusters, ErrorCode::InvalidArgument,
            "cluster id " + std::to_string(e.cluster) + " out of range 1.." + std::to_string(n_clusters));
    p.members[static_cast<std::size_t>(e.cluster - 1)][e.institution_id].push_back(e.sample);
    seen[e.institution_id] = true;
  }
  for (const auto& [inst, _] : seen) p.institutions.push_back(inst);
  return p;
}

// ---- serialization ---------------------------------------------------------

inline constexpr const char* kPipelineFormat = "fedrad-clustering-pipeline";
inline constexpr int kPipelineVersion = 1;

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    out.push_back(row);
  }
  return out;
}

inline Eigen::VectorXd vector_from(const nlohmann::json& j) {
  return to_eigen(j.get<std::vector<double>>());
}

inline Eigen::MatrixXd matrix_from(const nlohmann::json& j, Eigen::Index cols) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(static_cast<Eigen::Index>(rows[i].size()) == cols, ErrorCode::Format, "ragged matrix in pipeline JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const ClusteringPipeline& p) {
  nlohmann::json j;
  j["format"] = kPipelineFormat;
  j["version"] = kPipelineVersion;
  j["normalization"] = {{"percentile_lo", p.norm.percentile_lo},
                        {"percentile_hi", p.norm.percentile_hi},
                        {"p_min", p.norm.p_min},
                        {"p_max", p.norm.p_max}};
  if (!p.feature_names.empty()) j["normalization"]["feature_names"] = p.feature_names;
  j["pca"] = {{"k", p.pca.k()},
              {"requested_k", p.pca.requested_k},
              {"mean", std::vector<double>(p.pca.mean.data(), p.pca.mean.data() + p.pca.mean.size())},
              {"components", detail::matrix_json(p.pca.components)},
              {"explained_variance", p.pca.explained_variance},
              {"explained_variance_ratio", p.pca.explained_variance_ratio}};
  j["gmm"] = {{"C", p.gmm.n_components()},
              {"covariance_type", "tied"},
              {"ridge", p.gmm.ridge},
              {"weights", std::vector<double>(p.gmm.weights.data(), p.gmm.weights.data() + p.gmm.weights.size())},
              {"means", detail::matrix_json(p.gmm.means)},
              {"covariance", detail::matrix_json(p.gmm.covariance)}};
  return j;
}

inline ClusteringPipeline pipeline_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == kPipelineFormat, ErrorCode::Format, "not a clustering pipeline document");
    require(j.at("version") == kPipelineVersion, ErrorCode::Format,
            "unsupported pipeline version " + j.at("version").dump());
    ClusteringPipeline p;
    const auto& n = j.at("normalization");
    p.norm.percentile_lo = n.at("percentile_lo");
    p.norm.percentile_hi = n.at("percentile_hi");
    p.norm.p_min = n.at("p_min").get<std::vector<double>>();
    p.norm.p_max = n.at("p_max").get<std::vector<double>>();
    require(p.norm.p_min.size() == p.norm.p_max.size(), ErrorCode::Format, "p_min/p_max length mismatch");
    if (n.contains("feature_names")) p.feature_names = n.at("feature_names").get<std::vector<std::string>>();
    const auto& c = j.at("pca");
    const auto r = static_cast<Eigen::Index>(p.norm.size());
    p.pca.mean = detail::vector_from(c.at("mean"));
    p.pca.components = detail::matrix_from(c.at("components"), r);
    p.pca.requested_k = c.value("requested_k", static_cast<std::size_t>(p.pca.components.rows()));
    p.pca.explained_variance = c.at("explained_variance").get<std::vector<double>>();
    p.pca.explained_variance_ratio = c.at("explained_variance_ratio").get<std::vector<double>>();
    require(p.pca.mean.size() == r && c.at("k") == p.pca.k(), ErrorCode::Format, "PCA dimensions inconsistent");
    const auto& g = j.at("gmm");
    require(g.value("covariance_type", "tied") == "tied", ErrorCode::Format, "only tied covariance is supported");
    const auto k = static_cast<Eigen::Index>(p.pca.k());
    p.gmm.ridge = g.at("ridge");
    p.gmm.weights = detail::vector_from(g.at("weights"));
    p.gmm.means = detail::matrix_from(g.at("means"), k);
    p.gmm.covariance = detail::matrix_from(g.at("covariance"), k);
    require(p.gmm.means.rows() == p.gmm.weights.size() && p.gmm.covariance.rows() == k &&
                g.at("C") == p.gmm.n_components(),
            ErrorCode::Format, "GMM dimensions inconsistent");
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("malformed pipeline JSON: ") + e.what());
  }
}

inline void save_pipeline(const std::filesystem::path& path, const ClusteringPipeline& p) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + path.string());
  os << to_json(p).dump(1) << '\n';
}

inline ClusteringPipeline load_pipeline(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot read " + path.string());
  try {
    return pipeline_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

struct AssignmentRow {
  std::string sample_id;
  std::string institution_id;
  int cluster = 0;
  double max_responsibility = 0.0;
};

inline void write_assignments_csv(const std::filesystem::path& path, const std::vector<AssignmentRow>& rows) {
  auto os = csv::open(path);
  csv::write_row(os, {"sample_id", "institution_id", "cluster_id", "max_responsibility"});
  for (const auto& r : rows)
    csv::write_row(os, {r.sample_id, r.institution_id, std::to_string(r.cluster), csv::format_double(r.max_responsibility)});
}

inline std::vector<AssignmentRow> read_assignments_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  require(t.header == std::vector<std::string>{"sample_id", "institution_id", "cluster_id", "max_responsibility"},
          ErrorCode::Format, path.string() + ": unexpected assignments header");
  std::vector<AssignmentRow> out;
  for (const auto& r : t.rows)
    out.push_back({r[0], r[1], static_cast<int>(csv::parse_double(r[2])), csv::parse_double(r[3])});
  return out;
}

}  // namespace fedrad::feature_space
