// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>

#include "openvoxel/metrics.hpp"
#include "support.hpp"

using namespace openvoxel;

namespace {

BinaryMask rect(int w, int h, int u0, int v0, int u1, int v1) {
  BinaryMask m(w, h);
  for (int v = v0; v < v1; ++v)
    for (int u = u0; u < u1; ++u) m(u, v) = 1;
  return m;
}

}  // namespace

TEST(Iou, BasicCases) {
  const BinaryMask empty(4, 4);
  EXPECT_EQ(iou(empty, empty), 1.0);
  const auto a = rect(4, 4, 0, 0, 2, 4);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, empty), 0.0);
  EXPECT_EQ(iou(a, rect(4, 4, 2, 0, 4, 4)), 0.0);
  // 4 shared of 12 in the union.
  EXPECT_DOUBLE_EQ(iou(a, rect(4, 4, 1, 0, 3, 4)), 1.0 / 3.0);
  EXPECT_THROW(iou(a, BinaryMask(3, 4)), ValidationError);
}

TEST(BoundaryIou, BandWidth) {
  EXPECT_EQ(boundary_width(64, 64), 2);  // ceil(0.02 * 90.5)
  EXPECT_EQ(boundary_width(640, 480), 16);
  EXPECT_EQ(boundary_width(1, 1), 1);
}

TEST(BoundaryIou, IdenticalMasksScoreOne) {
  Stream rng(31, "biou");
  for (int k = 0; k < 20; ++k) {
    const auto m = ovtest::random_mask(rng, 32, 32);
    EXPECT_EQ(boundary_iou(m, m), 1.0);
  }
}

TEST(BoundaryIou, BandOfFilledSquare) {
  // A 6x6 square with d = 1 keeps its outer ring of 20 pixels.
  const auto m = rect(10, 10, 2, 2, 8, 8);
  EXPECT_EQ(count_nonzero(boundary_band(m, 1)), 20u);
  // The image border counts as background.
  EXPECT_EQ(count_nonzero(boundary_band(BinaryMask(5, 5, 1, 1), 1)), 16u);
}

TEST(BoundaryIou, MatchesBruteForceOracle) {
  Stream rng(32, "biou");
  for (int k = 0; k < 200; ++k) {
    const auto a = ovtest::random_mask(rng, 32, 32), b = ovtest::random_mask(rng, 32, 32);
    const int d = 1 + static_cast<int>(rng.below(4));
    EXPECT_EQ(boundary_iou(a, b, d), ovtest::ref_boundary_iou(a, b, d)) << "case " << k;
  }
}

TEST(BoundaryIou, WideBandEqualsIou) {
  Stream rng(33, "biou");
  for (int k = 0; k < 20; ++k) {
    const auto a = ovtest::random_mask(rng, 24, 16), b = ovtest::random_mask(rng, 24, 16);
    EXPECT_DOUBLE_EQ(boundary_iou(a, b, 29), iou(a, b));
  }
}

TEST(Ari, IdenticalAndPermuted) {
  const std::vector<std::int32_t> a = {1, 1, 2, 2, 3, 3, 3};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
  const std::vector<std::int32_t> p = {9, 9, 4, 4, 7, 7, 7};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(p, a), 1.0);
}

TEST(Ari, OneClusterAgainstSingletons) {
  const std::vector<std::int32_t> one = {1, 1, 1, 1}, singles = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(one, singles), 0.0);
}

TEST(Ari, IgnoresUnlabeledEntries) {
  const std::vector<std::int32_t> a = {1, 1, 2, 2, 0, 5}, b = {3, 3, 4, 4, 6, 0};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, b), 1.0);
}

TEST(Ari, MatchesPairCountingDefinition) {
  // Independent oracle: Hubert-Arabie index from explicit pair counts.
  Stream rng(34, "ari");
  for (int k = 0; k < 20; ++k) {
    const int n = 30 + static_cast<int>(rng.below(40));
    std::vector<std::int32_t> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = 1 + static_cast<std::int32_t>(rng.below(4));
      b[i] = rng.bernoulli(0.7) ? a[i] : 1 + static_cast<std::int32_t>(rng.below(5));
    }
    double both = 0, in_a = 0, in_b = 0, pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const bool sa = a[i] == a[j], sb = b[i] == b[j];
        both += sa && sb;
        in_a += sa;
        in_b += sb;
        ++pairs;
      }
    const double expected = in_a * in_b / pairs;
    const double ref = (both - expected) / (0.5 * (in_a + in_b) - expected);
    EXPECT_NEAR(adjusted_rand_index(a, b), ref, 1e-12);
  }
}

TEST(Ari, Errors) {
  const std::vector<std::int32_t> z = {0, 0}, a = {1, 2}, s = {1};
  EXPECT_THROW(adjusted_rand_index(z, a), ValidationError);
  EXPECT_THROW(adjusted_rand_index(a, s), ValidationError);
}

TEST(KdTree, MatchesExhaustiveSort) {
  Stream rng(35, "knn");
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) {
    // Coarse grid so distance ties are common.
    pts.emplace_back(std::round(rng.uniform(0, 8)), std::round(rng.uniform(0, 8)), std::round(rng.uniform(0, 4)));
  }
  const KdTree tree(pts);
  for (int q = 0; q < 50; ++q) {
    const Vec3 x(std::round(rng.uniform(0, 8)), rng.uniform(0, 8), std::round(rng.uniform(0, 4)));
    std::vector<std::size_t> all(pts.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
      const double da = (pts[a] - x).squaredNorm(), db = (pts[b] - x).squaredNorm();
      return da != db ? da < db : a < b;
    });
    for (std::size_t k : {1u, 25u, 50u})
      EXPECT_EQ(tree.nearest(x, k), std::vector<std::size_t>(all.begin(), all.begin() + k));
  }
  EXPECT_EQ(tree.nearest(Vec3::Zero(), 1000).size(), pts.size());
}

TEST(SemsegTransfer, NearestAndMajority) {
  const std::vector<Vec3> voxels = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(10, 0, 0)};
  const std::vector<std::int32_t> labels = {2, 2, 5, 7};
  const std::vector<Vec3> q = {Vec3(0.1, 0, 0), Vec3(9, 0, 0)};
  EXPECT_EQ(semseg_transfer(q, voxels, labels, TransferProtocol::nearest), (std::vector<std::int32_t>{2, 7}));
  EXPECT_EQ(semseg_transfer(q, voxels, labels, TransferProtocol::majority_knn, 3),
            (std::vector<std::int32_t>{2, 2}));
  // k = 1 agrees with the nearest protocol.
  EXPECT_EQ(semseg_transfer(q, voxels, labels, TransferProtocol::majority_knn, 1),
            semseg_transfer(q, voxels, labels, TransferProtocol::nearest));
}

TEST(SemsegTransfer, TiesAndCoincidentPoints) {
  // Two votes each for 4 and 3: the smaller class wins.
  const std::vector<Vec3> voxels = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0)};
  const std::vector<std::int32_t> labels = {4, 3, 4, 3};
  const std::vector<Vec3> q = {Vec3::Zero()};
  EXPECT_EQ(semseg_transfer(q, voxels, labels, TransferProtocol::majority_knn, 4)[0], 3);
  // A query on top of a voxel takes its label.
  const std::vector<Vec3> on = {Vec3(0, 1, 0)};
  EXPECT_EQ(semseg_transfer(on, voxels, labels, TransferProtocol::nearest)[0], 4);
  const std::vector<Vec3> none;
  const std::vector<std::int32_t> no_labels;
  EXPECT_THROW(semseg_transfer(q, none, no_labels, TransferProtocol::nearest), ValidationError);
}
