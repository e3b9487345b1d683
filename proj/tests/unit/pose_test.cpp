#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "p2p/error.hpp"
#include "p2p/pose/pose.hpp"
#include "test_util.hpp"

namespace p2p::pose {
namespace {

PoseFrame all_at(double x, double y, double c = 0.9) {
  PoseFrame f;
  for (auto& k : f.joints) k = {x, y, c};
  return f;
}

PoseFrame random_frame(std::mt19937_64& rng, std::int64_t id) {
  std::uniform_real_distribution<double> pos(0.0, 1000.0), conf(0.05, 1.0);
  PoseFrame f;
  f.frame_id = id;
  for (auto& k : f.joints) k = {pos(rng), pos(rng), conf(rng)};
  return f;
}

std::size_t idx(Joint j) { return static_cast<std::size_t>(j); }

TEST(PoseFile, RoundTripIsBitExact) {
  test::TempDir dir("pose");
  std::mt19937_64 rng(1);
  std::vector<PoseFrame> frames;
  for (int i = 0; i < 100; ++i) frames.push_back(random_frame(rng, i));
  frames[5].joints[3] = {0.0, 0.0, 0.0};
  save_pose_file(dir.path() / "p.csv", frames);
  EXPECT_EQ(load_pose_file(dir.path() / "p.csv"), frames);
}

TEST(PoseFile, ShortRowNamesTheLine) {
  test::TempDir dir("pose");
  std::ofstream out(dir.path() / "bad.csv");
  out << pose_csv_header() << "\n0";
  for (int i = 0; i < 75; ++i) out << ",0.5";
  out << "\n1";
  for (int i = 0; i < 74; ++i) out << ",0.5";
  out << "\n";
  out.close();
  try {
    load_pose_file(dir.path() / "bad.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("75"), std::string::npos) << msg;
  }
}

TEST(PoseFile, ConfidenceOutsideUnitIntervalIsRejected) {
  test::TempDir dir("pose");
  std::ofstream out(dir.path() / "bad.csv");
  out << pose_csv_header() << "\n0";
  for (int i = 0; i < 75; ++i) out << (i == 2 ? ",1.5" : ",0.5");
  out << "\n";
  out.close();
  EXPECT_THROW(load_pose_file(dir.path() / "bad.csv"), DataError);
}

TEST(PoseFile, HeaderHas76Columns) {
  const auto h = pose_csv_header();
  EXPECT_EQ(std::count(h.begin(), h.end(), ','), 75);
  EXPECT_EQ(h.rfind("frame_id,j0_x,j0_y,j0_c", 0), 0u);
}

TEST(CenterOnHip, AllJointsAtOneSpotGoToOrigin) {
  const auto c = center_on_hip(all_at(5, 7));
  for (const auto& k : c.joints) {
    EXPECT_DOUBLE_EQ(k.x, 0.0);
    EXPECT_DOUBLE_EQ(k.y, 0.0);
  }
}

TEST(CenterOnHip, NoseRelativeToHip) {
  auto f = all_at(3, 4);
  f.joints[idx(Joint::Nose)] = {3, 10, 0.8};
  const auto c = center_on_hip(f);
  EXPECT_DOUBLE_EQ(c.joints[idx(Joint::Nose)].x, 0.0);
  EXPECT_DOUBLE_EQ(c.joints[idx(Joint::Nose)].y, 6.0);
  EXPECT_DOUBLE_EQ(c.joints[idx(Joint::Nose)].confidence, 0.8);
}

TEST(CenterOnHip, UndetectedHipIsRejected) {
  auto f = all_at(3, 4);
  f.joints[kMidHip].confidence = 0.0;
  EXPECT_THROW(center_on_hip(f), DataError);
}

TEST(CenterOnHip, TranslationInvariant) {
  std::mt19937_64 rng(2);
  const auto f = random_frame(rng, 0);
  auto g = f;
  for (auto& k : g.joints) {
    k.x += 123.25;
    k.y -= 47.5;
  }
  const auto a = center_on_hip(f);
  const auto b = center_on_hip(g);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    EXPECT_NEAR(a.joints[j].x, b.joints[j].x, 1e-9);
    EXPECT_NEAR(a.joints[j].y, b.joints[j].y, 1e-9);
  }
}

TEST(FeatureOrder, SkipsMidHip) {
  EXPECT_EQ(feature_joint(0), 0u);
  EXPECT_EQ(feature_joint(7), 7u);
  EXPECT_EQ(feature_joint(8), 9u);
  EXPECT_EQ(feature_joint(23), 24u);
  EXPECT_EQ(kFeatureCount, 48u);
  EXPECT_EQ(joint_name(kMidHip), "MidHip");
}

TEST(NormStats, TwoValuedCoordinateHasUnitSpread) {
  std::vector<PoseFrame> frames;
  for (double x : {-1.0, 1.0}) {
    auto f = all_at(0, 0);
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (j == kMidHip) continue;
      f.joints[j].x = x;
      f.joints[j].y = 2.0 * x + 5.0;
    }
    frames.push_back(f);
  }
  const auto s = fit_norm_stats(frames, "loso:S01");
  EXPECT_EQ(s.frame_count, 2u);
  EXPECT_EQ(s.split_id, "loso:S01");
  EXPECT_DOUBLE_EQ(s.mean[0], 0.0);
  EXPECT_DOUBLE_EQ(s.std[0], 1.0);
  EXPECT_DOUBLE_EQ(s.mean[1], 5.0);
  EXPECT_DOUBLE_EQ(s.std[1], 2.0);
}

TEST(NormStats, ConstantCoordinateIsNumericalError) {
  std::vector<PoseFrame> frames{all_at(1, 1), all_at(1, 1)};
  for (auto& f : frames) f = center_on_hip(f);
  EXPECT_THROW(fit_norm_stats(frames), NumericalError);
}

TEST(NormStats, UndetectedJointsAreIgnored) {
  std::mt19937_64 rng(3);
  std::vector<PoseFrame> frames;
  for (int i = 0; i < 50; ++i) frames.push_back(center_on_hip(random_frame(rng, i)));
  const auto base = fit_norm_stats(frames);
  auto extra = frames;
  auto ghost = center_on_hip(random_frame(rng, 99));
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (j != kMidHip) ghost.joints[j] = {1e6, -1e6, 0.0};
  }
  extra.push_back(ghost);
  const auto with_ghost = fit_norm_stats(extra);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    EXPECT_DOUBLE_EQ(with_ghost.mean[i], base.mean[i]);
    EXPECT_DOUBLE_EQ(with_ghost.std[i], base.std[i]);
  }
}

TEST(NormalizePose, TrainingSetHasZeroMeanUnitVariance) {
  std::mt19937_64 rng(4);
  std::vector<PoseFrame> frames;
  for (int i = 0; i < 300; ++i) frames.push_back(center_on_hip(random_frame(rng, i)));
  const auto s = fit_norm_stats(frames);
  std::array<double, kFeatureCount> mean{}, sq{};
  for (const auto& f : frames) {
    const auto n = normalize_pose(f, s);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      mean[i] += n.values[i];
      sq[i] += n.values[i] * n.values[i];
    }
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double m = mean[i] / frames.size();
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(sq[i] / frames.size() - m * m, 1.0, 1e-6);
  }
}

TEST(NormalizePose, UndetectedFaceJointsGiveZeroSlots) {
  std::mt19937_64 rng(5);
  std::vector<PoseFrame> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(center_on_hip(random_frame(rng, i)));
  const auto s = fit_norm_stats(frames);
  auto f = random_frame(rng, 50);
  for (Joint j : {Joint::REye, Joint::LEye, Joint::REar, Joint::LEar}) f.joints[idx(j)].confidence = 0.0;
  const auto n = normalize_pose(center_on_hip(f), s);
  std::size_t zeros = 0;
  for (double v : n.values) zeros += v == 0.0;
  EXPECT_EQ(zeros, 8u);
  // REye is Body25 index 15, feature index 14.
  EXPECT_EQ(n.values[28], 0.0);
  EXPECT_EQ(n.values[29], 0.0);
}

TEST(NormalizePose, FeatureConfidencesSkipHip) {
  auto f = all_at(0, 0, 0.5);
  f.joints[kMidHip].confidence = 1.0;
  f.joints[idx(Joint::RHip)].confidence = 0.25;
  const auto c = feature_confidences(f);
  EXPECT_DOUBLE_EQ(c[8], 0.25);
  for (double v : c) EXPECT_NE(v, 1.0);
}

TEST(NormStatsFile, RoundTrip) {
  test::TempDir dir("stats");
  std::mt19937_64 rng(6);
  std::vector<PoseFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(center_on_hip(random_frame(rng, i)));
  const auto s = fit_norm_stats(frames, "loso:S02");
  save_norm_stats(dir.path() / "s.json", s);
  const auto b = load_norm_stats(dir.path() / "s.json");
  EXPECT_EQ(b.mean, s.mean);
  EXPECT_EQ(b.std, s.std);
  EXPECT_EQ(b.split_id, "loso:S02");
  EXPECT_EQ(b.frame_count, 10u);
}

}  // namespace
}  // namespace p2p::pose
