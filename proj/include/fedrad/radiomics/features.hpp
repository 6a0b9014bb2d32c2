#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fedrad/core/csv.hpp"
#include "fedrad/core/parallel.hpp"
#include "fedrad/radiomics/first_order.hpp"
#include "fedrad/radiomics/glcm.hpp"
#include "fedrad/radiomics/ngtdm.hpp"
#include "fedrad/radiomics/size_matrices.hpp"

namespace fedrad::radiomics {

inline constexpr std::size_t kFeaturesPerModality = 93;

struct ExtractionConfig {
  double bin_width = 0.09;

  static ExtractionConfig fets() { return {0.09}; }
  static ExtractionConfig cc359() { return {0.15}; }
};

// Per modality, in order: firstorder (18), glcm (24), glrlm (16), glszm (16),
// ngtdm (5), gldm (14). Names are "m<c>_<family>_<Feature>".
inline std::vector<std::string> feature_names(std::size_t modalities) {
  std::vector<std::string> names;
  names.reserve(modalities * kFeaturesPerModality);
  auto add = [&](std::size_t c, std::string_view family, const auto& list) {
    for (auto n : list) names.push_back("m" + std::to_string(c) + "_" + std::string(family) + "_" + std::string(n));
  };
  for (std::size_t c = 0; c < modalities; ++c) {
    add(c, "firstorder", kFirstOrderNames);
    add(c, "glcm", kGlcmNames);
    add(c, "glrlm", kGlrlmNames);
    add(c, "glszm", kGlszmNames);
    add(c, "ngtdm", kNgtdmNames);
    add(c, "gldm", kGldmNames);
  }
  return names;
}

struct FeatureVector {
  std::vector<double> values;
  std::vector<std::string> names;

  std::size_t size() const { return values.size(); }
};

inline std::vector<double> modality_features(std::span<const float> values, const BrainMask& mask,
                                             double bin_width, double voxel_volume) {
  const auto d = discretize(values, mask, bin_width);
  std::vector<double> out;
  out.reserve(kFeaturesPerModality);
  auto append = [&](const auto& arr) { out.insert(out.end(), arr.begin(), arr.end()); };
  append(first_order_features(values, d, voxel_volume));
  append(glcm_features(build_glcm(d)));
  append(glrlm_features(build_glrlm(d)));
  append(glszm_features(build_glszm(d), d.voxel_count));
  append(ngtdm_features(build_ngtdm(d)));
  append(gldm_features(build_gldm(d)));
  return out;
}

inline FeatureVector extract_feature_vector(const Volume& v, const BrainMask& mask, const ExtractionConfig& cfg,
                                            std::size_t jobs = 1) {
  require(cfg.bin_width > 0.0, ErrorCode::InvalidBinWidth, "bin width must be > 0");
  require(v.dims() == mask.dims(), ErrorCode::DimensionMismatch, "volume and mask dims differ");
  const double voxel_volume = static_cast<double>(v.voxel_size()[0]) * v.voxel_size()[1] * v.voxel_size()[2];
  std::vector<std::vector<double>> blocks(v.modalities());
  parallel_for(v.modalities(), jobs, [&](std::size_t c) {
    blocks[c] = modality_features(v.modality(c), mask, cfg.bin_width, voxel_volume);
  });
  FeatureVector f;
  f.names = feature_names(v.modalities());
  f.values.reserve(f.names.size());
  for (const auto& b : blocks) f.values.insert(f.values.end(), b.begin(), b.end());
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    require(std::isfinite(f.values[i]), ErrorCode::InvalidArgument, "non-finite feature " + f.names[i]);
  }
  return f;
}

// A feature vector tagged with its origin.
struct FeatureRow {
  std::string sample_id;
  std::string institution_id;
  FeatureVector features;
};

inline void write_features_csv(const std::filesystem::path& p, const std::vector<FeatureRow>& rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "no feature rows to write");
  auto os = csv::open(p);
  std::vector<std::string> header{"sample_id", "institution_id"};
  header.insert(header.end(), rows.front().features.names.begin(), rows.front().features.names.end());
  csv::write_row(os, header);
  for (const auto& r : rows) {
    require(r.features.names == rows.front().features.names, ErrorCode::DimensionMismatch,
            "feature rows have different name lists");
    std::vector<std::string> fields{r.sample_id, r.institution_id};
    for (double v : r.features.values) fields.push_back(csv::format_double(v));
    csv::write_row(os, fields);
  }
}

inline std::vector<FeatureRow> read_features_csv(const std::filesystem::path& p) {
  const auto t = csv::read(p);
  require(t.header.size() >= 3 && t.header[0] == "sample_id" && t.header[1] == "institution_id", ErrorCode::Format,
          p.string() + ": expected sample_id,institution_id,<features> header");
  const std::vector<std::string> names(t.header.begin() + 2, t.header.end());
  std::vector<FeatureRow> rows;
  for (const auto& r : t.rows) {
    FeatureRow fr{r[0], r[1], {{}, names}};
    for (std::size_t i = 2; i < r.size(); ++i) fr.features.values.push_back(csv::parse_double(r[i]));
    rows.push_back(std::move(fr));
  }
  return rows;
}

}  // namespace fedrad::radiomics
