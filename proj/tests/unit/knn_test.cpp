#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "p2p/error.hpp"
#include "p2p/knn/knn.hpp"
#include "test_util.hpp"

namespace p2p::knn {
namespace {

PoseFeatures random_features(std::mt19937_64& rng, double drop = 0.1) {
  std::uniform_real_distribution<double> v(-2.0, 2.0), c(0.1, 1.0);
  std::bernoulli_distribution missing(drop);
  PoseFeatures f;
  for (auto& x : f.values) x = v(rng);
  for (std::size_t j = 0; j < pose::kFeatureJoints; ++j) {
    if (missing(rng)) {
      f.confidence[j] = 0.0;
      f.values[2 * j] = f.values[2 * j + 1] = 0.0;
    } else {
      f.confidence[j] = c(rng);
    }
  }
  return f;
}

Sample sample(std::int64_t id, PoseFeatures f) {
  Sample s;
  s.ref = {"S01", "sess1", "take1", id};
  s.features = f;
  s.target.frame_id = id;
  s.target.values[0] = static_cast<double>(id);
  s.target.mask.valid[0] = 1;
  return s;
}

TEST(PoseDistance, TwoJointExample) {
  const std::vector<double> a{0, 0, 3, 4}, b{0, 0, 0, 0}, ca{1, 1}, cb{1, 1};
  EXPECT_NEAR(pose_distance(a, ca, b, cb), 25.0 / (2.0 + kDistanceEpsilon), 1e-12);
  EXPECT_NEAR(pose_distance(a, ca, b, cb), 12.5, 1e-6);
  const std::vector<double> cb_missing{1, 0};
  EXPECT_DOUBLE_EQ(pose_distance(a, ca, b, cb_missing), 0.0);
}

TEST(PoseDistance, IdentityAndSymmetry) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_features(rng);
    const auto b = random_features(rng);
    EXPECT_EQ(pose_distance(a, a), 0.0);
    EXPECT_EQ(pose_distance(a, b), pose_distance(b, a));
  }
}

TEST(PoseDistance, MaskingRemovesExactlyThatJoint) {
  std::mt19937_64 rng(2);
  auto a = random_features(rng, 0.0);
  auto b = random_features(rng, 0.0);
  const std::size_t j = 5;
  auto b_masked = b;
  b_masked.confidence[j] = 0.0;
  double num = 0.0;
  for (std::size_t k = 0; k < pose::kFeatureJoints; ++k) {
    if (k == j) continue;
    num += std::pow(a.values[2 * k] - b.values[2 * k], 2) + std::pow(a.values[2 * k + 1] - b.values[2 * k + 1], 2);
  }
  EXPECT_NEAR(pose_distance(a, b_masked), num / (pose::kFeatureJoints - 1 + kDistanceEpsilon), 1e-12);
}

TEST(PoseDistance, NoSharedJointIsInfinite) {
  PoseFeatures a, b;
  a.confidence[0] = 1.0;
  b.confidence[1] = 1.0;
  EXPECT_TRUE(std::isinf(pose_distance(a, b)));
}

TEST(BuildIndex, SubsamplesByFactor) {
  std::mt19937_64 rng(3);
  std::vector<Sample> train;
  for (int i = 0; i < 100; ++i) train.push_back(sample(i, random_features(rng)));
  const auto every5 = build_index(train, 5);
  ASSERT_EQ(every5.entries.size(), 20u);
  EXPECT_EQ(every5.entries[1].ref.frame_id, 5);
  EXPECT_EQ(every5.subsample_factor, 5u);
  EXPECT_EQ(build_index(train, 1).entries.size(), 100u);
  EXPECT_THROW(build_index(train, 0), ConfigError);
}

TEST(BuildIndex, EmptyInputGivesEmptyIndexThatCannotBeQueried) {
  const auto idx = build_index(std::vector<Sample>{}, 5);
  EXPECT_TRUE(idx.entries.empty());
  std::mt19937_64 rng(4);
  EXPECT_THROW(nearest_entry(idx, random_features(rng)), DataError);
}

TEST(NearestEntry, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  std::vector<Sample> train;
  for (int i = 0; i < 1000; ++i) train.push_back(sample(i, random_features(rng)));
  const auto idx = build_index(train, 1);
  for (int q = 0; q < 200; ++q) {
    const auto query = random_features(rng);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double d = pose_distance(query, train[i].features);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    ASSERT_EQ(nearest_entry(idx, query), best) << "query " << q;
  }
}

TEST(NearestEntry, QueryEqualToEntryReturnsItsGrid) {
  std::mt19937_64 rng(6);
  std::vector<Sample> train;
  for (int i = 0; i < 30; ++i) train.push_back(sample(i, random_features(rng)));
  const auto idx = build_index(train, 1);
  EXPECT_DOUBLE_EQ(knn_predict(idx, train[17].features).values[0], 17.0);
}

TEST(NearestEntry, TiesGoToLowerFrameId) {
  std::mt19937_64 rng(7);
  const auto f = random_features(rng);
  std::vector<Sample> train{sample(9, f), sample(3, f), sample(6, f)};
  const auto idx = build_index(train, 1);
  EXPECT_EQ(idx.entries[nearest_entry(idx, f)].ref.frame_id, 3);
}

TEST(MakeFeatures, UsesNormalizedCoordinatesAndConfidences) {
  pose::PoseNormStats stats;
  stats.mean.fill(1.0);
  stats.std.fill(2.0);
  pose::PoseFrame f;
  for (auto& k : f.joints) k = {5.0, -3.0, 0.7};
  f.joints[0].confidence = 0.0;
  const auto feat = make_features(f, stats);
  EXPECT_DOUBLE_EQ(feat.values[0], 0.0);
  EXPECT_DOUBLE_EQ(feat.values[2], 2.0);
  EXPECT_DOUBLE_EQ(feat.values[3], -2.0);
  EXPECT_DOUBLE_EQ(feat.confidence[0], 0.0);
  EXPECT_DOUBLE_EQ(feat.confidence[1], 0.7);
}

}  // namespace
}  // namespace p2p::knn
