#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fedrad/core/csv.hpp"
#include "fedrad/metrics/segmentation.hpp"

namespace fedrad::pipeline {

struct ProjectedSample {
  std::string sample_id;
  std::string institution_id;
  int cluster = 0;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

enum class ColorBy { Institution, Cluster };

inline void write_projection_csv(const std::filesystem::path& path, const std::vector<ProjectedSample>& pts) {
  auto os = csv::open(path);
  csv::write_row(os, {"sample_id", "pc1", "pc2", "institution_id", "cluster_id"});
  for (const auto& p : pts)
    csv::write_row(os, {p.sample_id, csv::format_double(p.pc1), csv::format_double(p.pc2), p.institution_id,
                        std::to_string(p.cluster)});
}

// Scatter of (pc1, pc2) with one categorical color per group and a legend.
inline std::string projection_svg(const std::vector<ProjectedSample>& pts, ColorBy by) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double W = 560, H = 440, left = 50, right = 150, top = 20, bottom = 40;
  auto key = [&](const ProjectedSample& p) {
    return by == ColorBy::Institution ? p.institution_id : "cluster " + std::to_string(p.cluster);
  };
  std::map<std::string, std::size_t> color;
  for (const auto& p : pts) color.try_emplace(key(p), 0);
  std::size_t k = 0;
  for (auto& [_, c] : color) c = k++;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].pc1;
    y0 = y1 = pts[0].pc2;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.pc1), x1 = std::max(x1, p.pc1);
      y0 = std::min(y0, p.pc2), y1 = std::max(y1, p.pc2);
    }
  }
  const double dx = x1 > x0 ? x1 - x0 : 1.0, dy = y1 > y0 ? y1 - y0 : 1.0;
  auto sx = [&](double x) { return left + (x - x0 + 0.05 * dx) / (1.1 * dx) * (W - left - right); };
  auto sy = [&](double y) { return H - bottom - (y - y0 + 0.05 * dy) / (1.1 * dy) * (H - top - bottom); };
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << W - left - right << "\" height=\""
     << H - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left + (W - left - right) / 2 << "\" y=\"" << H - 8
     << "\" text-anchor=\"middle\" font-size=\"12\">PC1</text>\n";
  os << "<text x=\"14\" y=\"" << top + (H - top - bottom) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 14 " << top + (H - top - bottom) / 2 << ")\">PC2</text>\n";
  for (const auto& p : pts)
    os << "<circle cx=\"" << sx(p.pc1) << "\" cy=\"" << sy(p.pc2) << "\" r=\"4\" fill=\""
       << palette[color[key(p)] % 10] << "\" fill-opacity=\"0.8\"><title>" << p.sample_id << "</title></circle>\n";
  double ly = top + 10;
  for (const auto& [name, c] : color) {
    os << "<circle cx=\"" << W - right + 16 << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << palette[c % 10] << "\"/>";
    os << "<text x=\"" << W - right + 26 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << name << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& s) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + path.string());
  os << s;
}

// Mean silhouette coefficient of integer labels over 2-D points (0 for singletons).
inline double silhouette(const std::vector<std::pair<double, double>>& pts, const std::vector<int>& labels) {
  require(pts.size() == labels.size(), ErrorCode::DimensionMismatch, "silhouette: size mismatch");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::map<int, double> sum;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      sum[labels[j]] += std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
    }
    if (sizes[labels[i]] == 1) continue;
    const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = INFINITY;
    for (const auto& [l, n] : sizes)
      if (l != labels[i]) b = std::min(b, sum[l] / static_cast<double>(n));
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(pts.size());
}

// ---- label distribution -----------------------------------------------------

struct LabelFractions {
  std::string sample_id;
  std::string institution_id;
  int cluster = 0;
  std::array<double, 3> fraction{};  // ET, TC, WT voxels over brain voxels
};

inline LabelFractions label_fractions(const SegMask& labels, const BrainMask& brain) {
  const auto r = metrics::compose_regions(labels);
  const double nb = static_cast<double>(brain.foreground());
  require(nb > 0, ErrorCode::EmptyMask, "label fractions need a nonempty brain mask");
  LabelFractions f;
  auto b = brain.voxels();
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < b.size(); ++i) n += b[i] && r.masks[k][i];
    f.fraction[k] = static_cast<double>(n) / nb;
  }
  return f;
}

struct GroupFractions {
  std::string group_type;  // institution | cluster
  std::string group;
  std::size_t n = 0;
  std::array<double, 3> mean{};
};

inline std::vector<GroupFractions> group_label_fractions(const std::vector<LabelFractions>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<const LabelFractions*>> groups;
  for (const auto& r : rows) {
    groups[{"institution", r.institution_id}].push_back(&r);
    if (r.cluster > 0) groups[{"cluster", std::to_string(r.cluster)}].push_back(&r);
  }
  std::vector<GroupFractions> out;
  for (const auto& [k, v] : groups) {
    GroupFractions g{k.first, k.second, v.size(), {}};
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (const auto* x : v) s += x->fraction[r];
      g.mean[r] = s / static_cast<double>(v.size());
    }
    out.push_back(g);
  }
  return out;
}

inline void write_label_distribution(const std::filesystem::path& dir, const std::vector<LabelFractions>& rows) {
  {
    auto os = csv::open(dir / "label_fractions.csv");
    csv::write_row(os, {"sample_id", "institution_id", "cluster_id", "ET", "TC", "WT"});
    for (const auto& r : rows)
      csv::write_row(os, {r.sample_id, r.institution_id, std::to_string(r.cluster), csv::format_double(r.fraction[0]),
                          csv::format_double(r.fraction[1]), csv::format_double(r.fraction[2])});
  }
  auto os = csv::open(dir / "label_distribution.csv");
  csv::write_row(os, {"group_type", "group", "n", "ET", "TC", "WT"});
  for (const auto& g : group_label_fractions(rows))
    csv::write_row(os, {g.group_type, g.group, std::to_string(g.n), csv::format_double(g.mean[0]),
                        csv::format_double(g.mean[1]), csv::format_double(g.mean[2])});
}

}  // namespace fedrad::pipeline
