#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "p2p/error.hpp"
#include "p2p/pressure/pressure.hpp"
#include "test_util.hpp"

namespace p2p::pressure {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

RawPressureFrame raw_with(std::initializer_list<std::pair<std::size_t, double>> cells) {
  RawPressureFrame r;
  std::fill(r.values.begin(), r.values.end(), kNaN);
  for (auto [i, v] : cells) r.values[i] = v;
  return r;
}

TEST(CleanAndMask, ClipsNaNAndPassThrough) {
  const auto g = clean_and_mask(raw_with({{0, 1500.0}, {2, 3.0}}));
  EXPECT_DOUBLE_EQ(g.kpa[0], 1000.0);
  EXPECT_TRUE(g.mask.valid[0]);
  EXPECT_DOUBLE_EQ(g.kpa[1], 0.0);
  EXPECT_FALSE(g.mask.valid[1]);
  EXPECT_DOUBLE_EQ(g.kpa[2], 3.0);
  EXPECT_EQ(g.mask.count(), 2u);
}

TEST(CleanAndMask, FootmaskZeroesOutsideCells) {
  FootMask fm;
  fm.valid[2] = 1;
  const auto g = clean_and_mask(raw_with({{0, 10.0}, {2, 3.0}}), fm);
  EXPECT_EQ(g.kpa[0], 0.0);
  EXPECT_FALSE(g.mask.valid[0]);
  EXPECT_TRUE(g.mask.valid[2]);
}

TEST(Normalize, WeightFactorExample) {
  PressureNormConfig cfg;
  cfg.subject_weight_kg = 52.0;
  EXPECT_NEAR(100.0 * cfg.weight_factor(), 0.010875, 1e-12);
}

TEST(Normalize, TrainingMaximumMapsToOne) {
  PressureGrid g;
  g.kpa[10] = 400.0;
  g.kpa[11] = 250.0;
  g.mask.valid[10] = g.mask.valid[11] = 1;
  PressureNormConfig cfg;
  cfg.subject_weight_kg = 60.0;
  cfg.global_max = weight_normalized_max(g, 60.0);
  const auto n = normalize_pressure(g, cfg);
  EXPECT_DOUBLE_EQ(n.values[10], 1.0);
  EXPECT_NEAR(n.values[11], 0.625, 1e-15);
}

TEST(Normalize, DenormalizedOneIsGlobalMaxTimesWeightOverConstants) {
  PressureNormConfig cfg;
  cfg.subject_weight_kg = 70.0;
  cfg.global_max = 0.05;
  NormalizedPressure n;
  n.values[0] = 1.0;
  n.mask.valid[0] = 1;
  EXPECT_NEAR(denormalize_pressure(n, cfg).kpa[0], 0.05 * 70.0 / (0.145 * 0.039), 1e-9);
}

TEST(Normalize, RoundTripOnRandomMaskedGrids) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> kpa(0.0, 1000.0), weight(40.0, 110.0);
  std::bernoulli_distribution on(0.6);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    PressureGrid g;
    for (std::size_t i = 0; i < kCells; ++i) {
      if (!on(rng)) continue;
      g.mask.valid[i] = 1;
      g.kpa[i] = kpa(rng);
    }
    PressureNormConfig cfg;
    cfg.subject_weight_kg = weight(rng);
    cfg.global_max = 1000.0 * 0.145 * 0.039 / 40.0;
    const auto back = denormalize_pressure(normalize_pressure(g, cfg), cfg);
    for (std::size_t i = 0; i < kCells; ++i) worst = std::max(worst, std::abs(back.kpa[i] - g.kpa[i]));
    ASSERT_EQ(back.mask, g.mask);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Normalize, MonotoneInPressure) {
  PressureNormConfig cfg;
  cfg.subject_weight_kg = 65.0;
  cfg.global_max = 0.1;
  PressureGrid g;
  for (std::size_t i = 0; i < 100; ++i) {
    g.kpa[i] = 10.0 * i;
    g.mask.valid[i] = 1;
  }
  const auto n = normalize_pressure(g, cfg);
  for (std::size_t i = 1; i < 100; ++i) EXPECT_GE(n.values[i], n.values[i - 1]);
}

TEST(Normalize, OffMaskIsZeroAndErrorsAreConfigErrors) {
  PressureNormConfig cfg;
  cfg.subject_weight_kg = 65.0;
  PressureGrid g;
  g.kpa[3] = 5.0;  // not in mask
  EXPECT_THROW(normalize_pressure(g, cfg), ConfigError);
  cfg.global_max = 0.1;
  EXPECT_EQ(normalize_pressure(g, cfg).values[3], 0.0);
  cfg.subject_weight_kg = 0.0;
  EXPECT_THROW(normalize_pressure(g, cfg), ConfigError);
}

TEST(Layout, ChannelsLastRoundTrip) {
  std::mt19937_64 rng(2);
  const auto v = test::random_values(kCells, rng);
  const auto cl = to_channels_last<double>(v);
  EXPECT_EQ(cl[channels_last_index(1, 5, 7)], v[cell_index(1, 5, 7)]);
  EXPECT_EQ(from_channels_last(std::span<const double>(cl)), v);
}

TEST(PressureFile, RoundTripKeepsNaN) {
  test::TempDir dir("press");
  std::vector<RawPressureFrame> frames{raw_with({{0, 12.5}, {2519, 0.01}}), raw_with({{7, 999.0}})};
  frames[1].frame_id = 4;
  save_pressure_file(dir.path() / "p.csv", frames);
  const auto back = load_pressure_file(dir.path() / "p.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].frame_id, 4);
  EXPECT_DOUBLE_EQ(back[0].values[0], 12.5);
  EXPECT_DOUBLE_EQ(back[0].values[2519], 0.01);
  EXPECT_TRUE(std::isnan(back[0].values[1]));
}

TEST(PressureFile, NegativeValueIsRejected) {
  test::TempDir dir("press");
  save_pressure_file(dir.path() / "p.csv", std::vector<RawPressureFrame>{raw_with({{0, -1.0}})});
  EXPECT_THROW(load_pressure_file(dir.path() / "p.csv"), DataError);
}

TEST(FootMaskFile, CanonicalMaskRoundTrips) {
  test::TempDir dir("mask");
  const auto m = canonical_footmask();
  EXPECT_GT(m.count(Foot::left), 600u);
  EXPECT_EQ(m.count(Foot::left), m.count(Foot::right));
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t c = 0; c < kCols; ++c)
      EXPECT_EQ(m.valid[cell_index(0, r, c)], m.valid[cell_index(1, r, kCols - 1 - c)]);
  save_mask_file(dir.path() / "m.csv", m);
  EXPECT_EQ(load_mask_file(dir.path() / "m.csv"), m);
}

}  // namespace
}  // namespace p2p::pressure
