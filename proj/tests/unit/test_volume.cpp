#include <gtest/gtest.h>

#include <sstream>

#include "fedrad/volume/cohort.hpp"
#include "fedrad/volume/io.hpp"
#include "fedrad/volume/preprocess.hpp"

using namespace fedrad;

namespace {

Volume random_volume(std::size_t m, Dims dims, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> data(m * dims.voxels());
  for (auto& x : data) x = static_cast<float>(uniform(rng, -3.0, 5.0));
  return Volume(m, dims, std::move(data), {1.0F, 1.5F, 2.0F});
}

BrainMask box_mask(Dims dims, std::array<std::size_t, 3> lo, std::array<std::size_t, 3> hi) {
  std::vector<std::uint8_t> m(dims.voxels(), 0);
  for (std::size_t z = lo[2]; z < hi[2]; ++z)
    for (std::size_t y = lo[1]; y < hi[1]; ++y)
      for (std::size_t x = lo[0]; x < hi[0]; ++x) m[dims.index(x, y, z)] = 1;
  return BrainMask(dims, std::move(m));
}

CohortSpec small_spec() {
  CohortSpec s;
  s.dims = {12, 12, 12};
  s.modalities = 1;
  s.regimes["A"] = RegimeParams{};
  s.institutions.push_back({"inst1", {{"A", 4}}});
  return s;
}

}  // namespace

TEST(Volume, RejectsWrongPayloadLength) {
  EXPECT_THROW(Volume(2, Dims{2, 2, 2}, std::vector<float>(15)), Error);
  EXPECT_THROW(BrainMask(Dims{2, 2, 2}, std::vector<std::uint8_t>(8, 2)), Error);
}

TEST(Crop, FullMaskIsIdentity) {
  const Dims dims{16, 16, 16};
  auto v = random_volume(2, dims, 1);
  auto mask = box_mask(dims, {0, 0, 0}, {16, 16, 16});
  auto r = crop_to_brain_bbox(v, mask, 16);
  EXPECT_EQ(r.volume.dims(), dims);
  EXPECT_TRUE(std::equal(r.volume.data().begin(), r.volume.data().end(), v.data().begin()));
}

TEST(Crop, SingleVoxelPadsToMinSizeCentered) {
  const Dims dims{32, 32, 32};
  auto v = random_volume(1, dims, 2);
  auto mask = box_mask(dims, {16, 16, 16}, {17, 17, 17});
  auto r = crop_to_brain_bbox(v, mask, 8);
  EXPECT_EQ(r.volume.dims(), (Dims{8, 8, 8}));
  // 7 padding voxels per axis: 3 low, 4 high.
  EXPECT_EQ(r.record.pad_lo, (std::array<std::size_t, 3>{3, 3, 3}));
  EXPECT_EQ(r.volume.at(0, 3, 3, 3), v.at(0, 16, 16, 16));
  EXPECT_EQ(r.mask.foreground(), 1u);
  double others = 0.0;
  for (float x : r.volume.data()) others += std::abs(x);
  EXPECT_EQ(others, std::abs(v.at(0, 16, 16, 16)));
}

TEST(Crop, SubArrayMatchesDirectSlicing) {
  const Dims dims{32, 32, 32};
  auto v = random_volume(2, dims, 3);
  auto mask = box_mask(dims, {4, 4, 4}, {20, 20, 20});
  auto r = crop_to_brain_bbox(v, mask, 8);
  ASSERT_EQ(r.volume.dims(), (Dims{16, 16, 16}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t z = 0; z < 16; ++z)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) ASSERT_EQ(r.volume.at(c, x, y, z), v.at(c, x + 4, y + 4, z + 4));
}

TEST(Crop, IsIdempotentAndSegMaskFollows) {
  const Dims dims{20, 18, 22};
  auto v = random_volume(1, dims, 4);
  auto mask = box_mask(dims, {3, 5, 2}, {9, 11, 6});
  auto first = crop_to_brain_bbox(v, mask, 8);
  auto second = crop_to_brain_bbox(first.volume, first.mask, 8);
  EXPECT_EQ(first.volume.dims(), second.volume.dims());
  EXPECT_TRUE(std::equal(first.volume.data().begin(), first.volume.data().end(), second.volume.data().begin()));

  SegMask seg(2, dims);
  std::vector<std::uint8_t> sd(2 * dims.voxels(), 0);
  sd[dims.index(4, 6, 3)] = 1;
  seg = SegMask(2, dims, sd);
  auto cropped = apply_crop(seg, first.record);
  EXPECT_EQ(cropped.count(0), 1u);
  auto back = undo_crop(cropped, first.record);
  EXPECT_TRUE(std::equal(back.data().begin(), back.data().end(), seg.data().begin()));
}

TEST(Crop, EmptyMaskThrows) {
  const Dims dims{4, 4, 4};
  auto v = random_volume(1, dims, 5);
  try {
    crop_to_brain_bbox(v, BrainMask(dims), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
}

TEST(Standardize, TwoPointSymmetry) {
  const Dims dims{1, 3, 1};
  Volume v(1, dims, std::vector<float>{1.0F, 3.0F, 7.0F});
  BrainMask mask(dims, {1, 1, 0});
  auto s = standardize(v, mask);
  EXPECT_EQ(s.data()[0], -1.0F);
  EXPECT_EQ(s.data()[1], 1.0F);
  EXPECT_EQ(s.data()[2], 0.0F);
}

TEST(Standardize, MatchesTwoPassOracleAndIsIdempotent) {
  const Dims dims{10, 10, 10};
  auto v = random_volume(3, dims, 6);
  auto mask = box_mask(dims, {1, 2, 0}, {9, 10, 7});
  auto s = standardize(v, mask);
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < dims.voxels(); ++i) {
      if (mask.voxels()[i]) {
        sum += s.modality(c)[i];
        ++n;
      } else {
        EXPECT_EQ(s.modality(c)[i], 0.0F);
      }
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < dims.voxels(); ++i)
      if (mask.voxels()[i]) ss += (s.modality(c)[i] - mean) * (s.modality(c)[i] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(ss / static_cast<double>(n), 1.0, 1e-4);
  }
  auto again = standardize(s, mask);
  for (std::size_t i = 0; i < s.data().size(); ++i) EXPECT_NEAR(again.data()[i], s.data()[i], 1e-6);
}

TEST(Standardize, ConstantModalityIsDegenerate) {
  const Dims dims{2, 2, 2};
  Volume v(1, dims, std::vector<float>(8, 4.0F));
  try {
    standardize(v, BrainMask(dims, std::vector<std::uint8_t>(8, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateIntensity);
  }
}

TEST(VolumeIo, RoundTripIsBitExact) {
  auto v = random_volume(2, Dims{3, 4, 5}, 7);
  std::stringstream ss;
  io::write_volume(ss, v);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "FVOL");
  EXPECT_EQ(bytes.size(), 4 + 4 * 5 + 12 + 4 * v.data().size());
  auto back = io::read_volume(ss);
  EXPECT_EQ(back.dims(), v.dims());
  EXPECT_EQ(back.voxel_size(), v.voxel_size());
  EXPECT_EQ(std::memcmp(back.data().data(), v.data().data(), v.data().size() * sizeof(float)), 0);
  std::stringstream again;
  io::write_volume(again, back);
  EXPECT_EQ(again.str(), bytes);
}

TEST(VolumeIo, HeaderLayoutIsLittleEndian) {
  Volume v(1, Dims{2, 3, 4}, std::vector<float>(24, 1.0F));
  std::stringstream ss;
  io::write_volume(ss, v);
  const std::string b = ss.str();
  const unsigned char expected[] = {'F', 'V', 'O', 'L', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0};
  ASSERT_GE(b.size(), sizeof expected);
  EXPECT_EQ(std::memcmp(b.data(), expected, sizeof expected), 0);
}

TEST(VolumeIo, MaskRoundTripAndBadMagic) {
  SegMask m(3, Dims{2, 2, 2}, std::vector<std::uint8_t>{1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 0, 0, 0, 0, 0, 0,
                                                         1, 1, 1, 1, 0, 0, 0, 1});
  std::stringstream ss;
  io::write_mask(ss, m);
  EXPECT_EQ(ss.str().substr(0, 4), "FMSK");
  auto back = io::read_mask(ss);
  EXPECT_TRUE(std::equal(back.data().begin(), back.data().end(), m.data().begin()));
  std::stringstream bad("FVOX0000");
  EXPECT_THROW(io::read_volume(bad), Error);
}

TEST(Cohort, DeterministicForFixedSeed) {
  auto spec = small_spec();
  auto a = generate_synthetic_cohort(spec, 7);
  auto b = generate_synthetic_cohort(spec, 7, 4);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(a[0].samples.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& x = a[0].samples[i];
    const auto& y = b[0].samples[i];
    EXPECT_EQ(x.sample_id, y.sample_id);
    EXPECT_EQ(x.split, y.split);
    EXPECT_EQ(std::memcmp(x.image.data().data(), y.image.data().data(), x.image.data().size() * 4), 0);
    EXPECT_TRUE(std::equal(x.labels.data().begin(), x.labels.data().end(), y.labels.data().begin()));
    EXPECT_EQ(x.regime, 0);
  }
  auto c = generate_synthetic_cohort(spec, 8);
  EXPECT_NE(std::memcmp(a[0].samples[0].image.data().data(), c[0].samples[0].image.data().data(),
                        a[0].samples[0].image.data().size() * 4),
            0);
}

TEST(Cohort, LesionInsideBrainAndLabelsExclusive) {
  auto spec = small_spec();
  auto cohort = generate_synthetic_cohort(spec, 11);
  for (const auto& s : cohort[0].samples) {
    const std::size_t nv = s.brain.dims().voxels();
    for (std::size_t i = 0; i < nv; ++i) {
      int labels = 0;
      for (std::size_t c = 0; c < 3; ++c) labels += s.labels.channel(c)[i];
      EXPECT_LE(labels, 1);
      if (labels) {
        EXPECT_EQ(s.brain.voxels()[i], 1);
      }
    }
    EXPECT_GT(s.labels.count(2), 0u);
  }
}

TEST(Cohort, InvalidSpecs) {
  auto spec = small_spec();
  spec.institutions[0].regime_counts.clear();
  EXPECT_THROW(generate_synthetic_cohort(spec, 1), Error);
  spec = small_spec();
  spec.institutions[0].regime_counts = {{"B", 2}};
  EXPECT_THROW(generate_synthetic_cohort(spec, 1), Error);
  EXPECT_THROW(parse_cohort_spec(nlohmann::json{{"version", 1}, {"dimz", {1, 2, 3}}}), Error);
}

TEST(Cohort, SplitCountsKeepTraining) {
  EXPECT_EQ(split_counts(12, {}), (std::array<std::size_t, 3>{8, 2, 2}));
  EXPECT_EQ(split_counts(1, {}), (std::array<std::size_t, 3>{1, 0, 0}));
  EXPECT_EQ(split_counts(2, {}), (std::array<std::size_t, 3>{2, 0, 0}));
  EXPECT_EQ(split_counts(20, {}), (std::array<std::size_t, 3>{14, 3, 3}));
}

TEST(Cohort, SpecJsonRoundTrip) {
  auto spec = small_spec();
  spec.regimes["B"] = RegimeParams{0.2, 1.0, 2.0, 1.5, 3.0, 0.5};
  auto back = parse_cohort_spec(to_json(spec));
  EXPECT_EQ(back.dims, spec.dims);
  EXPECT_EQ(back.regimes.at("B").gamma, 1.5);
  EXPECT_EQ(back.institutions[0].regime_counts.at("A"), 4u);
}

TEST(Cohort, SaveLoadRoundTrip) {
  auto spec = small_spec();
  auto cohort = generate_synthetic_cohort(spec, 3);
  auto dir = std::filesystem::temp_directory_path() / "fedrad_cohort_rt";
  std::filesystem::remove_all(dir);
  save_cohort(dir, cohort);
  auto back = load_cohort(dir);
  ASSERT_EQ(back.size(), 1u);
  ASSERT_EQ(back[0].samples.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back[0].samples[i].sample_id, cohort[0].samples[i].sample_id);
    EXPECT_EQ(back[0].samples[i].split, cohort[0].samples[i].split);
    EXPECT_EQ(back[0].samples[i].regime, 0);
    EXPECT_EQ(std::memcmp(back[0].samples[i].image.data().data(), cohort[0].samples[i].image.data().data(),
                          cohort[0].samples[i].image.data().size() * 4),
              0);
  }
  std::filesystem::remove_all(dir);
}

TEST(NonzeroMask, AnyModality) {
  Volume v(2, Dims{1, 3, 1}, std::vector<float>{0, 1, 0, 0, 0, 2});
  auto m = nonzero_mask(v);
  EXPECT_EQ(m.voxels()[0], 0);
  EXPECT_EQ(m.voxels()[1], 1);
  EXPECT_EQ(m.voxels()[2], 1);
}
