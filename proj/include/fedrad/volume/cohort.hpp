#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedrad/core/parallel.hpp"
#include "fedrad/core/random.hpp"
#include "fedrad/volume/io.hpp"
#include "fedrad/volume/preprocess.hpp"

namespace fedrad {

enum class Split { Train, Val, Test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail(ErrorCode::InvalidSpec, "unknown split '" + s + "'");
}

// Channel order of generated label masks (BraTS labels 1, 2, 4).
inline const std::vector<std::string>& default_label_names() {
  static const std::vector<std::string> names{"NCR", "ED", "ET"};
  return names;
}

struct Sample {
  std::string sample_id;
  std::string institution_id;
  Volume image;
  SegMask labels;
  BrainMask brain;
  Split split = Split::Train;
  // Generative texture regime; -1 when unknown. Never read by the pipeline itself.
  int regime = -1;
};

struct InstitutionDataset {
  std::string institution_id;
  std::vector<Sample> samples;
};

// Acquisition "scanner" model applied on top of the phantom.
struct RegimeParams {
  double noise_sigma = 0.1;
  double noise_correlation = 0.0;  // blur sigma applied to the white noise field
  double smoothing_sigma = 0.0;    // blur sigma applied to the noisy image
  double gamma = 1.0;              // contrast curve exponent
  double gain = 1.0;
  double offset = 0.0;
};

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct InstitutionSpec {
  std::string id;
  std::map<std::string, std::size_t> regime_counts;
};

struct CohortSpec {
  std::uint64_t seed = 0;
  Dims dims{20, 20, 20};
  std::size_t modalities = 2;
  VoxelSize voxel_size{1.0F, 1.0F, 1.0F};
  SplitFractions split;
  std::map<std::string, RegimeParams> regimes;
  std::vector<InstitutionSpec> institutions;

  // Regime id = position of the name in the (sorted) regime table.
  int regime_id(const std::string& name) const {
    auto it = regimes.find(name);
    require(it != regimes.end(), ErrorCode::InvalidSpec, "unknown regime '" + name + "'");
    return static_cast<int>(std::distance(regimes.begin(), it));
  }
};

namespace detail {

template <typename T>
T take(const nlohmann::json& j, const char* key, const T& fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      fail(ErrorCode::InvalidSpec, "unknown key '" + it.key() + "' in " + where);
    }
  }
}

}  // namespace detail

inline CohortSpec parse_cohort_spec(const nlohmann::json& j) {
  using detail::take;
  require(j.is_object(), ErrorCode::InvalidSpec, "cohort spec must be a JSON object");
  detail::reject_unknown(j, {"version", "seed", "dims", "modalities", "voxel_size_mm", "split", "regimes", "institutions"},
                         "cohort spec");
  require(take<int>(j, "version", 1) == 1, ErrorCode::InvalidSpec, "unsupported cohort spec version");
  CohortSpec s;
  try {
    s.seed = take<std::uint64_t>(j, "seed", 0);
    if (j.contains("dims")) {
      auto d = j.at("dims").get<std::vector<std::size_t>>();
      require(d.size() == 3, ErrorCode::InvalidSpec, "dims must be [h, w, d]");
      s.dims = Dims{d[0], d[1], d[2]};
    }
    s.modalities = take<std::size_t>(j, "modalities", 2);
    if (j.contains("voxel_size_mm")) {
      auto v = j.at("voxel_size_mm").get<std::vector<float>>();
      require(v.size() == 3, ErrorCode::InvalidSpec, "voxel_size_mm must have 3 entries");
      s.voxel_size = {v[0], v[1], v[2]};
    }
    if (j.contains("split")) {
      const auto& sp = j.at("split");
      detail::reject_unknown(sp, {"train", "val", "test"}, "split");
      s.split.train = take<double>(sp, "train", 0.70);
      s.split.val = take<double>(sp, "val", 0.15);
      s.split.test = take<double>(sp, "test", 0.15);
    }
    if (j.contains("regimes")) {
      for (const auto& [name, r] : j.at("regimes").items()) {
        detail::reject_unknown(r, {"noise_sigma", "noise_correlation", "smoothing_sigma", "gamma", "gain", "offset"},
                               "regime " + name);
        RegimeParams p;
        p.noise_sigma = take<double>(r, "noise_sigma", p.noise_sigma);
        p.noise_correlation = take<double>(r, "noise_correlation", p.noise_correlation);
        p.smoothing_sigma = take<double>(r, "smoothing_sigma", p.smoothing_sigma);
        p.gamma = take<double>(r, "gamma", p.gamma);
        p.gain = take<double>(r, "gain", p.gain);
        p.offset = take<double>(r, "offset", p.offset);
        s.regimes[name] = p;
      }
    }
    if (j.contains("institutions")) {
      for (const auto& inst : j.at("institutions")) {
        detail::reject_unknown(inst, {"id", "regimes"}, "institution");
        InstitutionSpec is;
        is.id = inst.at("id").get<std::string>();
        if (inst.contains("regimes")) {
          for (const auto& [name, count] : inst.at("regimes").items()) {
            is.regime_counts[name] = count.get<std::size_t>();
          }
        }
        s.institutions.push_back(std::move(is));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidSpec, e.what());
  }
  return s;
}

inline nlohmann::json to_json(const CohortSpec& s) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = s.seed;
  j["dims"] = {s.dims.h, s.dims.w, s.dims.d};
  j["modalities"] = s.modalities;
  j["voxel_size_mm"] = {s.voxel_size[0], s.voxel_size[1], s.voxel_size[2]};
  j["split"] = {{"train", s.split.train}, {"val", s.split.val}, {"test", s.split.test}};
  for (const auto& [name, p] : s.regimes) {
    j["regimes"][name] = {{"noise_sigma", p.noise_sigma},         {"noise_correlation", p.noise_correlation},
                          {"smoothing_sigma", p.smoothing_sigma}, {"gamma", p.gamma},
                          {"gain", p.gain},                       {"offset", p.offset}};
  }
  j["institutions"] = nlohmann::json::array();
  for (const auto& inst : s.institutions) {
    nlohmann::json ji{{"id", inst.id}, {"regimes", nlohmann::json::object()}};
    for (const auto& [name, n] : inst.regime_counts) ji["regimes"][name] = n;
    j["institutions"].push_back(ji);
  }
  return j;
}

inline void validate(const CohortSpec& s) {
  require(!s.institutions.empty(), ErrorCode::InvalidSpec, "cohort spec has no institutions");
  require(s.modalities >= 1, ErrorCode::InvalidSpec, "modalities must be >= 1");
  require(s.dims.h >= 4 && s.dims.w >= 4 && s.dims.d >= 4, ErrorCode::InvalidSpec, "dims must be >= 4 per axis");
  require(s.split.train > 0.0 && s.split.val >= 0.0 && s.split.test >= 0.0 &&
              std::abs(s.split.train + s.split.val + s.split.test - 1.0) < 1e-9,
          ErrorCode::InvalidSpec, "split fractions must be non-negative, train > 0, and sum to 1");
  for (const auto& inst : s.institutions) {
    require(!inst.regime_counts.empty(), ErrorCode::InvalidSpec, "institution '" + inst.id + "' has no regimes");
    std::size_t total = 0;
    for (const auto& [name, n] : inst.regime_counts) {
      require(s.regimes.count(name) == 1, ErrorCode::InvalidSpec,
              "institution '" + inst.id + "' references undefined regime '" + name + "'");
      total += n;
    }
    require(total >= 1, ErrorCode::InvalidSpec, "institution '" + inst.id + "' has no samples");
  }
}

// Per-institution split sizes; train always keeps at least one sample.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const SplitFractions& f) {
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.val));
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.test));
  while (n_val + n_test >= n && (n_val + n_test) > 0) {
    if (n_test >= n_val && n_test > 0) --n_test;
    else --n_val;
  }
  return {n - n_val - n_test, n_val, n_test};
}

namespace detail {

struct PhantomTissue {
  double tissue, edema, enhancing, necrotic;
};

inline PhantomTissue tissue_table(std::size_t modality) {
  static const PhantomTissue table[] = {
      {1.0, 1.1, 2.0, 0.5},
      {1.0, 1.8, 1.6, 1.3},
      {1.0, 1.6, 1.3, 1.8},
      {1.0, 1.3, 1.1, 0.7},
  };
  return table[modality % 4];
}

inline std::vector<double> unit_noise(const Dims& dims, double corr_sigma, Rng& rng) {
  Normal normal;
  std::vector<double> n(dims.voxels());
  for (auto& x : n) x = normal(rng);
  if (corr_sigma > 0.0) {
    n = gaussian_blur(n, dims, corr_sigma);
    double ss = 0.0;
    for (double x : n) ss += x * x;
    const double sd = std::sqrt(ss / static_cast<double>(n.size()));
    if (sd > 0.0) {
      for (auto& x : n) x /= sd;
    }
  }
  return n;
}

}  // namespace detail

// One phantom: ellipsoidal brain with a nested ellipsoidal lesion (necrotic core inside
// an enhancing rim inside edema), rendered through the regime's acquisition model.
inline Sample generate_sample(const CohortSpec& spec, const RegimeParams& regime, std::uint64_t seed) {
  Rng rng(seed);
  const Dims& dims = spec.dims;
  const std::array<double, 3> size{static_cast<double>(dims.w), static_cast<double>(dims.h),
                                   static_cast<double>(dims.d)};
  std::array<double, 3> brain_c{}, brain_r{}, lesion_c{}, wt_r{};
  for (int a = 0; a < 3; ++a) {
    brain_c[a] = (size[a] - 1.0) / 2.0 + uniform(rng, -1.0, 1.0);
    brain_r[a] = 0.42 * size[a] * uniform(rng, 0.95, 1.05);
  }
  for (int a = 0; a < 3; ++a) {
    lesion_c[a] = brain_c[a] + uniform(rng, -0.25, 0.25) * brain_r[a];
    wt_r[a] = size[a] * uniform(rng, 0.20, 0.27);
  }
  auto inside = [](const std::array<double, 3>& p, const std::array<double, 3>& c, const std::array<double, 3>& r,
                   double scale) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double t = (p[a] - c[a]) / (r[a] * scale);
      s += t * t;
    }
    return s <= 1.0;
  };

  const std::size_t nv = dims.voxels();
  std::vector<std::uint8_t> brain(nv, 0);
  std::vector<std::uint8_t> seg(3 * nv, 0);
  std::vector<int> label(nv, 0);  // 0 tissue, 1 NCR, 2 ED, 3 ET
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x) {
        const std::array<double, 3> p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        const std::size_t i = dims.index(x, y, z);
        if (!inside(p, brain_c, brain_r, 1.0)) continue;
        brain[i] = 1;
        if (inside(p, lesion_c, wt_r, 0.30)) label[i] = 1;
        else if (inside(p, lesion_c, wt_r, 0.60)) label[i] = 3;
        else if (inside(p, lesion_c, wt_r, 1.0)) label[i] = 2;
        if (label[i] > 0) seg[static_cast<std::size_t>(label[i] - 1) * nv + i] = 1;
      }
    }
  }

  std::vector<float> data(spec.modalities * nv, 0.0F);
  for (std::size_t c = 0; c < spec.modalities; ++c) {
    const auto t = detail::tissue_table(c);
    auto anatomy = detail::unit_noise(dims, 2.0, rng);
    auto noise = detail::unit_noise(dims, regime.noise_correlation, rng);
    std::vector<double> img(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      const double base = label[i] == 0 ? t.tissue : label[i] == 1 ? t.necrotic : label[i] == 2 ? t.edema : t.enhancing;
      img[i] = base + 0.15 * anatomy[i] + regime.noise_sigma * noise[i];
    }
    img = gaussian_blur(img, dims, regime.smoothing_sigma);
    for (std::size_t i = 0; i < nv; ++i) {
      if (!brain[i]) continue;
      const double v = regime.gain * std::pow(std::max(img[i], 0.0), regime.gamma) + regime.offset;
      data[c * nv + i] = static_cast<float>(v);
    }
  }

  Sample s;
  s.image = Volume(spec.modalities, dims, std::move(data), spec.voxel_size);
  s.labels = SegMask(3, dims, std::move(seg));
  s.brain = BrainMask(dims, std::move(brain));
  return s;
}

// Deterministic in (spec, seed); each sample's RNG stream depends only on its
// institution id and index, so generation order does not matter.
inline std::vector<InstitutionDataset> generate_synthetic_cohort(const CohortSpec& spec, std::uint64_t seed,
                                                                 std::size_t jobs = 1) {
  validate(spec);
  std::vector<InstitutionDataset> out;
  for (const auto& inst : spec.institutions) {
    InstitutionDataset ds;
    ds.institution_id = inst.id;
    std::vector<std::string> regime_of;
    for (const auto& [name, n] : inst.regime_counts) regime_of.insert(regime_of.end(), n, name);
    ds.samples.resize(regime_of.size());
    const std::uint64_t inst_key = hash_id(inst.id);
    parallel_for(regime_of.size(), jobs, [&](std::size_t i) {
      const auto& params = spec.regimes.at(regime_of[i]);
      Sample s = generate_sample(spec, params, derive_seed(seed, inst_key, i));
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s_s%03zu", inst.id.c_str(), i);
      s.sample_id = buf;
      s.institution_id = inst.id;
      s.regime = spec.regime_id(regime_of[i]);
      ds.samples[i] = std::move(s);
    });
    std::vector<std::size_t> order(ds.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(derive_seed(seed, inst_key, 0x5917ULL));
    shuffle(order.begin(), order.end(), split_rng);
    const auto counts = split_counts(order.size(), spec.split);
    for (std::size_t r = 0; r < order.size(); ++r) {
      ds.samples[order[r]].split = r < counts[0] ? Split::Train : (r < counts[0] + counts[1] ? Split::Val : Split::Test);
    }
    out.push_back(std::move(ds));
  }
  return out;
}

// On-disk cohort: <dir>/cohort.json indexes FVOL images and FMSK label/brain masks.
inline void save_cohort(const std::filesystem::path& dir, const std::vector<InstitutionDataset>& cohort,
                        const std::vector<std::string>& regime_names = {}) {
  nlohmann::json index;
  index["version"] = 1;
  index["label_channels"] = default_label_names();
  index["samples"] = nlohmann::json::array();
  for (const auto& inst : cohort) {
    for (const auto& s : inst.samples) {
      const std::string stem = inst.institution_id + "/" + s.sample_id;
      io::save_volume(dir / (stem + ".fvol"), s.image);
      io::save_mask(dir / (stem + "_seg.fmsk"), s.labels, s.image.voxel_size());
      io::save_mask(dir / (stem + "_brain.fmsk"), s.brain, s.image.voxel_size());
      nlohmann::json e{{"sample_id", s.sample_id},
                       {"institution_id", inst.institution_id},
                       {"split", to_string(s.split)},
                       {"image", stem + ".fvol"},
                       {"labels", stem + "_seg.fmsk"},
                       {"brain", stem + "_brain.fmsk"}};
      if (s.regime >= 0) {
        e["regime"] = s.regime;
        if (static_cast<std::size_t>(s.regime) < regime_names.size()) e["regime_name"] = regime_names[s.regime];
      }
      index["samples"].push_back(e);
    }
  }
  auto os = io::detail::open_out(dir / "cohort.json");
  os << index.dump(2) << '\n';
}

inline std::vector<InstitutionDataset> load_cohort(const std::filesystem::path& dir) {
  auto is = io::detail::open_in(dir / "cohort.json");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, (dir / "cohort.json").string() + ": " + e.what());
  }
  std::vector<InstitutionDataset> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& e : index.at("samples")) {
    Sample s;
    s.sample_id = e.at("sample_id").get<std::string>();
    s.institution_id = e.at("institution_id").get<std::string>();
    s.split = parse_split(e.value("split", std::string("train")));
    s.regime = e.value("regime", -1);
    s.image = io::load_volume(dir / e.at("image").get<std::string>());
    s.labels = SegMask(io::load_mask(dir / e.at("labels").get<std::string>()));
    if (e.contains("brain")) {
      s.brain = BrainMask(io::load_mask(dir / e.at("brain").get<std::string>()));
    } else {
      s.brain = nonzero_mask(s.image);
    }
    require(s.labels.dims() == s.image.dims() && s.brain.dims() == s.image.dims(), ErrorCode::DimensionMismatch,
            "sample " + s.sample_id + ": mask dims differ from image dims");
    auto [it, fresh] = slot.try_emplace(s.institution_id, out.size());
    if (fresh) out.push_back(InstitutionDataset{s.institution_id, {}});
    out[it->second].samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace fedrad
