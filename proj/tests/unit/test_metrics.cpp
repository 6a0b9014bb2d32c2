#include <gtest/gtest.h>

#include <filesystem>

#include "fedrad/core/random.hpp"
#include "fedrad/metrics/report.hpp"
#include "oracles/metrics_oracle.hpp"

using namespace fedrad;
using namespace fedrad::metrics;

namespace {

std::vector<std::uint8_t> random_mask(const Dims& d, double p, Rng& rng) {
  std::vector<std::uint8_t> m(d.voxels());
  for (auto& x : m) x = uniform(rng, 0, 1) < p ? 1 : 0;
  return m;
}

// Blobby mask: union of a few random boxes.
std::vector<std::uint8_t> box_mask(const Dims& d, Rng& rng) {
  std::vector<std::uint8_t> m(d.voxels(), 0);
  const std::size_t boxes = 1 + uniform_index(rng, 3);
  for (std::size_t b = 0; b < boxes; ++b) {
    const std::size_t x0 = uniform_index(rng, d.w), y0 = uniform_index(rng, d.h), z0 = uniform_index(rng, d.d);
    const std::size_t x1 = x0 + 1 + uniform_index(rng, d.w - x0), y1 = y0 + 1 + uniform_index(rng, d.h - y0),
                      z1 = z0 + 1 + uniform_index(rng, d.d - z0);
    for (std::size_t z = z0; z < z1; ++z)
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) m[d.index(x, y, z)] = 1;
  }
  return m;
}

}  // namespace

TEST(Dice, HandCases) {
  const std::vector<std::uint8_t> a{1, 1, 1, 1, 0, 0, 0, 0}, b{0, 0, 1, 1, 1, 1, 0, 0}, e(8, 0);
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(a, b), 0.5);
  EXPECT_EQ(dice(e, e), 1.0);
  const std::vector<std::uint8_t> c{0, 0, 0, 0, 1, 1, 1, 1};
  EXPECT_EQ(dice(a, c), 0.0);
  EXPECT_EQ(dice(a, e), 0.0);
  EXPECT_THROW(dice(a, std::vector<std::uint8_t>(3)), Error);
}

TEST(Hd95, HandCases) {
  const Dims d{5, 9, 4};
  std::vector<std::uint8_t> a(d.voxels(), 0), b(d.voxels(), 0);
  a[d.index(1, 2, 1)] = 1;
  b[d.index(4, 2, 1)] = 1;
  EXPECT_EQ(hd95(a, b, d, {1, 1, 1}), 3.0);
  EXPECT_EQ(hd95(a, a, d, {1, 1, 1}), 0.0);
  EXPECT_EQ(hd95(b, a, d, {1, 1, 1}), 3.0);
  // spacing order is (h, w, d): x spacing is the second entry
  EXPECT_EQ(hd95(a, b, d, {1.0F, 2.0F, 1.0F}), 6.0);
  const std::vector<std::uint8_t> e(d.voxels(), 0);
  EXPECT_FALSE(hd95(a, e, d, {1, 1, 1}).has_value());
  EXPECT_EQ(hd95(e, e, d, {1, 1, 1}), 0.0);
}

TEST(Hd95, InteriorVoxelsAreNotSurface) {
  const Dims d{5, 5, 5};
  std::vector<std::uint8_t> m(d.voxels(), 1);
  const auto s = surface(m, d);
  std::size_t n = 0;
  for (auto v : s) n += v;
  EXPECT_EQ(n, 125u - 27u);
  EXPECT_EQ(s[d.index(2, 2, 2)], 0);
}

TEST(Edt, MatchesBruteForce) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const Dims d{1 + uniform_index(rng, 9), 1 + uniform_index(rng, 9), 1 + uniform_index(rng, 9)};
    const VoxelSize vs{static_cast<float>(uniform(rng, 0.5, 2)), static_cast<float>(uniform(rng, 0.5, 2)),
                       static_cast<float>(uniform(rng, 0.5, 2))};
    const auto sites = random_mask(d, 0.1, rng);
    const auto g = squared_edt(sites, d, vs);
    for (std::size_t z = 0; z < d.d; ++z)
      for (std::size_t y = 0; y < d.h; ++y)
        for (std::size_t x = 0; x < d.w; ++x) {
          double best = INFINITY;
          for (std::size_t zz = 0; zz < d.d; ++zz)
            for (std::size_t yy = 0; yy < d.h; ++yy)
              for (std::size_t xx = 0; xx < d.w; ++xx) {
                if (!sites[d.index(xx, yy, zz)]) continue;
                const double dx = (double(x) - double(xx)) * vs[1], dy = (double(y) - double(yy)) * vs[0],
                             dz = (double(z) - double(zz)) * vs[2];
                best = std::min(best, dx * dx + dy * dy + dz * dz);
              }
          const double got = g[d.index(x, y, z)];
          if (std::isinf(best)) EXPECT_TRUE(std::isinf(got));
          else EXPECT_NEAR(got, best, 1e-9 * std::max(1.0, best));
        }
  }
}

TEST(Metrics, RandomPairsMatchOracle) {
  Rng rng(2026);
  for (int t = 0; t < 200; ++t) {
    const Dims d{2 + uniform_index(rng, 11), 2 + uniform_index(rng, 11), 2 + uniform_index(rng, 11)};
    const VoxelSize vs = t % 2 ? VoxelSize{1, 1, 1}
                               : VoxelSize{static_cast<float>(uniform(rng, 0.5, 2)), static_cast<float>(uniform(rng, 0.5, 2)),
                                           static_cast<float>(uniform(rng, 0.5, 2))};
    const auto a = t % 3 ? box_mask(d, rng) : random_mask(d, 0.3, rng);
    const auto b = t % 5 ? box_mask(d, rng) : random_mask(d, 0.2, rng);
    EXPECT_DOUBLE_EQ(dice(a, b), oracle::dice(a, b));
    EXPECT_EQ(dice(a, b), dice(b, a));
    const auto got = hd95(a, b, d, vs), want = oracle::hd95(a, b, d, vs);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(*got, *want, 1e-9);
      EXPECT_EQ(*got, *hd95(b, a, d, vs));
    }
  }
}

TEST(Regions, Composition) {
  const Dims d{2, 2, 2};
  const std::size_t nv = 8;
  std::vector<std::uint8_t> only_ed(3 * nv, 0);
  only_ed[nv + 3] = 1;
  const auto r = compose_regions(SegMask(3, d, only_ed));
  EXPECT_EQ(r.masks[2][3], 1);
  EXPECT_EQ(std::count(r.masks[0].begin(), r.masks[0].end(), 1), 0);
  EXPECT_EQ(std::count(r.masks[1].begin(), r.masks[1].end(), 1), 0);

  std::vector<std::uint8_t> same(3 * nv, 0);
  for (std::size_t c = 0; c < 3; ++c) same[c * nv + 5] = 1;
  const auto s = compose_regions(SegMask(3, d, same));
  EXPECT_EQ(s.masks[0], s.masks[1]);
  EXPECT_EQ(s.masks[1], s.masks[2]);

  Rng rng(1);
  std::vector<std::uint8_t> rand(3 * nv);
  for (auto& x : rand) x = uniform_index(rng, 2);
  const auto q = compose_regions(SegMask(3, d, rand));
  for (std::size_t i = 0; i < nv; ++i) {
    EXPECT_LE(q.masks[0][i], q.masks[1][i]);
    EXPECT_LE(q.masks[1][i], q.masks[2][i]);
  }
  EXPECT_THROW(compose_regions(SegMask(2, d)), Error);
  try {
    compose_regions(SegMask(3, d), LabelMapping{0, 0, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownLabelMapping);
  }
}

TEST(Report, AggregatesRecomputeFromCsv) {
  Rng rng(8);
  const Dims d{6, 6, 6};
  EvalReport rep;
  rep.method = "cfft";
  for (int i = 0; i < 12; ++i) {
    std::vector<std::uint8_t> g(3 * d.voxels()), p(3 * d.voxels());
    for (std::size_t c = 0; c < 3; ++c) {
      const auto a = box_mask(d, rng);
      const auto b = i % 4 == 0 && c == 2 ? std::vector<std::uint8_t>(d.voxels(), 0) : box_mask(d, rng);
      std::copy(a.begin(), a.end(), g.begin() + static_cast<long>(c * d.voxels()));
      std::copy(b.begin(), b.end(), p.begin() + static_cast<long>(c * d.voxels()));
    }
    SampleEval s{"s" + std::to_string(i), i % 3 ? "A" : "B", 1 + i % 2, {}};
    s.regions = evaluate(SegMask(3, d, p), SegMask(3, d, g), {1, 1, 1});
    rep.samples.push_back(s);
  }
  const auto dir = std::filesystem::temp_directory_path() / "fedrad_eval_test";
  write_eval_csv(dir / "eval.csv", rep);
  const auto back = read_eval_csv(dir / "eval.csv");
  ASSERT_EQ(back.samples.size(), rep.samples.size());
  const auto j1 = summary_json(rep);
  auto b2 = back;
  b2.method = rep.method;
  const auto j2 = summary_json(b2);
  for (const char* group : {"overall"}) {
    for (const char* r : {"ET", "TC", "WT", "Average"}) {
      EXPECT_NEAR(j1[group]["dice"][r]["mean"].get<double>(), j2[group]["dice"][r]["mean"].get<double>(), 1e-9);
      EXPECT_NEAR(j1[group]["hd95"][r]["mean"].get<double>(), j2[group]["hd95"][r]["mean"].get<double>(), 1e-9);
    }
  }
  // direct recount of the overall ET dice mean and the undefined HD95 count
  double sum = 0;
  std::size_t undefined = 0;
  for (const auto& s : rep.samples) {
    sum += s.regions[0].dice;
    undefined += !s.regions[0].hd95.has_value();
  }
  EXPECT_NEAR(j1["overall"]["dice"]["ET"]["mean"].get<double>(), sum / 12.0, 1e-12);
  EXPECT_EQ(j1["overall"]["hd95_undefined"]["ET"].get<std::size_t>(), undefined);
  EXPECT_GT(undefined, 0u);
  EXPECT_EQ(j1["institutions"].size(), 2u);
  EXPECT_EQ(j1["clusters"].size(), 2u);
  EXPECT_EQ(j1["overall"]["n"].get<std::size_t>(), 12u);
  std::filesystem::remove_all(dir);
}
