#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedrad/core/csv.hpp"
#include "fedrad/core/parallel.hpp"
#include "fedrad/metrics/segmentation.hpp"

namespace fedrad::metrics {

struct RegionScore {
  double dice = 0.0;
  Hd95 hd95;
};

struct SampleEval {
  std::string sample_id;
  std::string institution_id;
  int cluster = 0;  // 0 when no routing applies
  std::array<RegionScore, 3> regions;  // ET, TC, WT
};

inline std::array<RegionScore, 3> evaluate(const SegMask& pred, const SegMask& gt, const VoxelSize& vs,
                                           const LabelMapping& map = {}) {
  require(pred.dims() == gt.dims(), ErrorCode::DimensionMismatch,
          "prediction " + to_string(pred.dims()) + " vs ground truth " + to_string(gt.dims()));
  const auto p = compose_regions(pred, map);
  const auto g = compose_regions(gt, map);
  std::array<RegionScore, 3> out;
  for (std::size_t r = 0; r < 3; ++r) {
    out[r].dice = dice(p.masks[r], g.masks[r]);
    out[r].hd95 = hd95(p.masks[r], g.masks[r], gt.dims(), vs);
  }
  return out;
}

struct RegionAggregate {
  MeanStd dice;
  MeanStd hd95;                  // over defined values only
  std::size_t hd95_undefined = 0;
};

struct GroupAggregate {
  std::size_t n = 0;
  std::array<RegionAggregate, 3> regions;
  MeanStd dice_average;  // per-sample mean over the three regions
  MeanStd hd95_average;  // samples with all three HD95 defined
};

inline GroupAggregate aggregate(const std::vector<const SampleEval*>& samples) {
  GroupAggregate g;
  g.n = samples.size();
  std::vector<double> avg_dice, avg_hd;
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> d, h;
    for (const auto* s : samples) {
      d.push_back(s->regions[r].dice);
      if (s->regions[r].hd95) h.push_back(*s->regions[r].hd95);
      else ++g.regions[r].hd95_undefined;
    }
    g.regions[r].dice = mean_std(d);
    g.regions[r].hd95 = mean_std(h);
  }
  for (const auto* s : samples) {
    avg_dice.push_back((s->regions[0].dice + s->regions[1].dice + s->regions[2].dice) / 3.0);
    if (s->regions[0].hd95 && s->regions[1].hd95 && s->regions[2].hd95)
      avg_hd.push_back((*s->regions[0].hd95 + *s->regions[1].hd95 + *s->regions[2].hd95) / 3.0);
  }
  g.dice_average = mean_std(avg_dice);
  g.hd95_average = mean_std(avg_hd);
  return g;
}

struct EvalReport {
  std::string method;
  std::vector<SampleEval> samples;

  GroupAggregate overall() const {
    std::vector<const SampleEval*> all;
    for (const auto& s : samples) all.push_back(&s);
    return aggregate(all);
  }
  std::map<std::string, GroupAggregate> by_institution() const {
    std::map<std::string, std::vector<const SampleEval*>> groups;
    for (const auto& s : samples) groups[s.institution_id].push_back(&s);
    std::map<std::string, GroupAggregate> out;
    for (const auto& [k, v] : groups) out[k] = aggregate(v);
    return out;
  }
  std::map<int, GroupAggregate> by_cluster() const {
    std::map<int, std::vector<const SampleEval*>> groups;
    for (const auto& s : samples)
      if (s.cluster > 0) groups[s.cluster].push_back(&s);
    std::map<int, GroupAggregate> out;
    for (const auto& [k, v] : groups) out[k] = aggregate(v);
    return out;
  }
};

inline constexpr const char* kUndefined = "undefined";

inline void write_eval_csv(const std::filesystem::path& path, const EvalReport& r) {
  auto os = csv::open(path);
  std::vector<std::string> header{"sample_id", "institution_id", "cluster_id"};
  for (const char* n : kRegionNames) header.push_back(std::string("dice_") + n);
  for (const char* n : kRegionNames) header.push_back(std::string("hd95_") + n);
  csv::write_row(os, header);
  for (const auto& s : r.samples) {
    std::vector<std::string> row{s.sample_id, s.institution_id, std::to_string(s.cluster)};
    for (const auto& g : s.regions) row.push_back(csv::format_double(g.dice));
    for (const auto& g : s.regions) row.push_back(g.hd95 ? csv::format_double(*g.hd95) : kUndefined);
    csv::write_row(os, row);
  }
}

inline EvalReport read_eval_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  EvalReport r;
  for (const auto& row : t.rows) {
    SampleEval s;
    s.sample_id = row[t.column("sample_id")];
    s.institution_id = row[t.column("institution_id")];
    s.cluster = static_cast<int>(csv::parse_double(row[t.column("cluster_id")]));
    for (std::size_t k = 0; k < 3; ++k) {
      s.regions[k].dice = csv::parse_double(row[t.column(std::string("dice_") + kRegionNames[k])]);
      const auto& h = row[t.column(std::string("hd95_") + kRegionNames[k])];
      if (h != kUndefined) s.regions[k].hd95 = csv::parse_double(h);
    }
    r.samples.push_back(std::move(s));
  }
  return r;
}

inline nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}, {"n", m.n}}; }

inline nlohmann::json to_json(const GroupAggregate& g) {
  nlohmann::json j;
  j["n"] = g.n;
  for (std::size_t r = 0; r < 3; ++r) {
    j["dice"][kRegionNames[r]] = to_json(g.regions[r].dice);
    j["hd95"][kRegionNames[r]] = to_json(g.regions[r].hd95);
    j["hd95_undefined"][kRegionNames[r]] = g.regions[r].hd95_undefined;
  }
  j["dice"]["Average"] = to_json(g.dice_average);
  j["hd95"]["Average"] = to_json(g.hd95_average);
  return j;
}

// Rows per institution and per cluster plus the overall row, as in the result tables.
inline nlohmann::json summary_json(const EvalReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["overall"] = to_json(r.overall());
  j["institutions"] = nlohmann::json::object();
  for (const auto& [k, g] : r.by_institution()) j["institutions"][k] = to_json(g);
  j["clusters"] = nlohmann::json::object();
  for (const auto& [k, g] : r.by_cluster()) j["clusters"][std::to_string(k)] = to_json(g);
  return j;
}

}  // namespace fedrad::metrics
