#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fedrad/pipeline/checksum.hpp"
#include "fedrad/pipeline/config.hpp"
#include "fedrad/volume/preprocess.hpp"

namespace fedrad::pipeline {

// Runs fn with the concrete model family named by the spec.
template <class Fn>
decltype(auto) with_model(const ModelSpec& s, Fn&& fn) {
  require(s.modalities >= 1, ErrorCode::Config, "model spec has no modality count");
  if (s.family == "linear") return fn(fed::LinearSegmenter(s.modalities, s.labels, s.ridge));
  require(s.family == "mlp", ErrorCode::Config, "unknown model family '" + s.family + "'");
  return fn(fed::PatchMlp(s.modalities, s.labels, s.hidden));
}

// Crop to the brain box, then standardize inside the brain.
struct Prepared {
  CropRecord crop;
  Volume image;
  BrainMask brain;
};

inline Prepared prepare_volume(const Volume& v, const BrainMask& mask, std::size_t min_size) {
  auto c = crop_to_brain_bbox(v, mask, min_size);
  Prepared p;
  p.crop = c.record;
  p.brain = std::move(c.mask);
  p.image = standardize(c.volume, p.brain);
  return p;
}

struct DeployBundle {
  std::string method;
  feature_space::ClusteringPipeline pipeline;
  std::map<int, fed::ModelParams> cluster_models;                // every cluster 1..C
  std::map<std::string, fed::ModelParams> institution_models;    // local_finetune only
  radiomics::ExtractionConfig extraction;
  std::size_t min_size = 16;
  ModelSpec model;
};

inline constexpr const char* kBundleFormat = "fedrad-deploy-bundle";
inline constexpr int kBundleVersion = 1;

inline void check_complete(const DeployBundle& b) {
  for (std::size_t c = 1; c <= b.pipeline.n_clusters(); ++c)
    require(b.cluster_models.contains(static_cast<int>(c)), ErrorCode::Format,
            "bundle has no model for cluster " + std::to_string(c));
}

// pipeline.json, model_<c>.bin, model_inst_<id>.bin, manifest.json. Returns the files
// written (manifest last).
inline std::vector<std::filesystem::path> save_bundle(const std::filesystem::path& dir, const DeployBundle& b) {
  check_complete(b);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  feature_space::save_pipeline(dir / "pipeline.json", b.pipeline);
  files.push_back(dir / "pipeline.json");
  nlohmann::json models = nlohmann::json::object(), inst = nlohmann::json::object();
  for (const auto& [c, w] : b.cluster_models) {
    const std::string name = "model_" + std::to_string(c) + ".bin";
    fed::save_params(dir / name, w);
    files.push_back(dir / name);
    models[std::to_string(c)] = name;
  }
  for (const auto& [id, w] : b.institution_models) {
    const std::string name = "model_inst_" + id + ".bin";
    fed::save_params(dir / name, w);
    files.push_back(dir / name);
    inst[id] = name;
  }
  nlohmann::json m;
  m["format"] = kBundleFormat;
  m["version"] = kBundleVersion;
  m["method"] = b.method;
  m["pipeline"] = "pipeline.json";
  m["pipeline_version"] = feature_space::kPipelineVersion;
  m["checkpoint_version"] = fed::kCheckpointVersion;
  m["cluster_models"] = models;
  m["institution_models"] = inst;
  m["extraction"] = {{"bin_width", b.extraction.bin_width}};
  m["preprocess"] = {{"min_size", b.min_size}};
  m["model"] = {{"family", b.model.family},
                {"ridge", b.model.ridge},
                {"hidden", b.model.hidden},
                {"modalities", b.model.modalities},
                {"labels", b.model.labels}};
  nlohmann::json sums = nlohmann::json::object();
  for (const auto& f : files) sums[f.filename().string()] = sha256_file(f);
  m["sha256"] = sums;
  std::ofstream os(dir / "manifest.json");
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write bundle manifest");
  os << m.dump(2) << '\n';
  os.close();
  files.push_back(dir / "manifest.json");
  return files;
}

inline DeployBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  require(static_cast<bool>(is), ErrorCode::Io, "no bundle manifest in " + dir.string());
  try {
    const auto m = nlohmann::json::parse(is);
    require(m.at("format") == kBundleFormat && m.at("version") == kBundleVersion, ErrorCode::Format,
            "unsupported bundle manifest");
    for (const auto& [name, sum] : m.at("sha256").items())
      require(sha256_file(dir / name) == sum.get<std::string>(), ErrorCode::Format, "checksum mismatch for " + name);
    DeployBundle b;
    b.method = m.at("method");
    b.pipeline = feature_space::load_pipeline(dir / m.at("pipeline").get<std::string>());
    for (const auto& [c, name] : m.at("cluster_models").items())
      b.cluster_models[std::stoi(c)] = fed::load_params(dir / name.get<std::string>());
    for (const auto& [id, name] : m.at("institution_models").items())
      b.institution_models[id] = fed::load_params(dir / name.get<std::string>());
    b.extraction.bin_width = m.at("extraction").at("bin_width");
    b.min_size = m.at("preprocess").at("min_size");
    const auto& ms = m.at("model");
    b.model.family = ms.at("family");
    b.model.ridge = ms.at("ridge");
    b.model.hidden = ms.at("hidden");
    b.model.modalities = ms.at("modalities");
    b.model.labels = ms.at("labels");
    check_complete(b);
    return b;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, "bundle manifest: " + std::string(e.what()));
  }
}

struct InferResult {
  SegMask prediction;  // on the input grid
  int cluster = 0;
  std::vector<double> responsibilities;
  std::string model_key;  // "cluster:<c>" or "institution:<id>"
};

// Extract features, normalize, project, assign, and segment with the routed model.
// An institution-specific model (local finetuning) takes precedence when present.
inline InferResult infer(const DeployBundle& b, const Volume& v, const BrainMask& mask,
                         const std::string& institution = {}) {
  require(v.modalities() == b.model.modalities, ErrorCode::DimensionMismatch,
          "bundle model expects " + std::to_string(b.model.modalities) + " modalities, volume has " +
              std::to_string(v.modalities()));
  const auto prep = prepare_volume(v, mask, b.min_size);
  const auto f = radiomics::extract_feature_vector(prep.image, prep.brain, b.extraction);
  const auto a = feature_space::assign_cluster(f, b.pipeline);
  InferResult r;
  r.cluster = a.cluster;
  r.responsibilities = a.responsibilities;
  const fed::ModelParams* w = &b.cluster_models.at(a.cluster);
  r.model_key = "cluster:" + std::to_string(a.cluster);
  if (auto it = b.institution_models.find(institution); !institution.empty() && it != b.institution_models.end()) {
    w = &it->second;
    r.model_key = "institution:" + institution;
  }
  const SegMask cropped = with_model(b.model, [&](const auto& model) { return model.predict(*w, prep.image, prep.brain); });
  r.prediction = undo_crop(cropped, prep.crop);
  return r;
}

}  // namespace fedrad::pipeline
