// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <numeric>

#include "openvoxel/ovx_io.hpp"
#include "openvoxel/render.hpp"
#include "openvoxel/synth.hpp"
#include "support.hpp"

using namespace openvoxel;
using ovtest::axis_camera;

namespace {

/// Unit cubes on the x axis with the given densities.
VoxelScene x_row(const std::vector<double>& densities, double spacing = 2.0) {
  VoxelScene s;
  for (std::size_t i = 0; i < densities.size(); ++i)
    s.push_back(Vec3f(static_cast<float>(spacing * i), 0, 0), 1.0f, static_cast<float>(densities[i]),
                Vec3f(1, 0, 0));
  return s;
}

const Vec3 kFromLeft(-5, 0, 0);
const Vec3 kPlusX(1, 0, 0);

}  // namespace

TEST(Traverse, MissGivesNoHits) {
  const auto s = x_row({3.0});
  const auto r = traverse_ray(s, Vec3(-5, 3, 0), kPlusX);
  EXPECT_TRUE(r.hits.empty());
  EXPECT_EQ(r.total_weight, 0.0);
}

TEST(Traverse, SingleVoxelWeightIsAlpha) {
  // Densities are stored as f32.
  const double sigma = static_cast<float>(1.7);
  const auto r = traverse_ray(x_row({sigma}), kFromLeft, kPlusX);
  ASSERT_EQ(r.hits.size(), 1u);
  EXPECT_NEAR(r.hits[0].segment_length, 1.0, 1e-12);
  EXPECT_NEAR(r.hits[0].alpha, 1.0 - std::exp(-sigma), 1e-12);
  EXPECT_EQ(r.hits[0].weight, r.hits[0].alpha);
}

TEST(Traverse, TwoHalfAlphas) {
  const auto r = traverse_ray(x_row({std::log(2.0), std::log(2.0)}), kFromLeft, kPlusX);
  ASSERT_EQ(r.hits.size(), 2u);
  // ln 2 rounded to f32 moves alpha by about 1e-9.
  EXPECT_NEAR(r.hits[0].weight, 0.5, 1e-8);
  EXPECT_NEAR(r.hits[1].weight, 0.25, 1e-8);
  EXPECT_NEAR(r.total_weight, 0.75, 1e-8);
}

TEST(Traverse, ZeroDirectionRejected) { EXPECT_THROW(traverse_ray(x_row({1.0}), kFromLeft, Vec3::Zero()), ValidationError); }

TEST(Traverse, EarlyTermination) {
  // Three opaque voxels: transmittance drops below 1e-4 after the first.
  const auto r = traverse_ray(x_row({50.0, 50.0, 50.0}), kFromLeft, kPlusX);
  EXPECT_EQ(r.hits.size(), 1u);
}

TEST(Traverse, WeightRecurrenceAndBoundOnRandomRays) {
  const auto s = ovtest::random_scene(11, 200);
  Stream rng(11, "rays");
  for (int k = 0; k < 100; ++k) {
    const auto [o, d] = ovtest::random_ray(rng);
    const auto r = traverse_ray(s, o, d);
    double T = 1.0, sum = 0.0;
    for (std::size_t i = 0; i < r.hits.size(); ++i) {
      EXPECT_EQ(r.hits[i].weight, r.hits[i].alpha * T);
      EXPECT_GE(r.hits[i].weight, 0.0);
      if (i) {
        EXPECT_LE(r.hits[i - 1].t_entry, r.hits[i].t_entry);
      }
      T *= 1.0 - r.hits[i].alpha;
      sum += r.hits[i].weight;
    }
    EXPECT_DOUBLE_EQ(sum, r.total_weight);
    EXPECT_LE(r.total_weight, 1.0 + 1e-6);
  }
}

TEST(Traverse, MatchesScalarReference) {
  const auto s = ovtest::random_scene(12, 200);
  Stream rng(12, "rays");
  for (int k = 0; k < 100; ++k) {
    const auto [o, d] = ovtest::random_ray(rng);
    const auto r = traverse_ray(s, o, d);
    const auto ref = ovtest::ref_ray(s, o, d);
    ASSERT_EQ(r.hits.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(r.hits[i].voxel, ref[i].voxel);
      EXPECT_NEAR(r.hits[i].weight, ref[i].weight, 1e-12);
    }
  }
}

TEST(Traverse, GridTracerEqualsBruteForce) {
  const auto s = ovtest::random_scene(13, 300);
  const RayTracer tracer(s);
  Stream rng(13, "rays");
  for (int k = 0; k < 200; ++k) {
    const auto [o, d] = ovtest::random_ray(rng);
    const auto a = traverse_ray(s, o, d);
    const auto b = tracer.trace(o, d);
    ASSERT_EQ(a.hits.size(), b.hits.size());
    for (std::size_t i = 0; i < a.hits.size(); ++i) {
      EXPECT_EQ(a.hits[i].voxel, b.hits[i].voxel);
      EXPECT_EQ(a.hits[i].weight, b.hits[i].weight);
    }
    EXPECT_EQ(a.total_weight, b.total_weight);
  }
}

TEST(Traverse, GridTracerEqualsBruteForceOnLattice) {
  // Exact entry-depth ties everywhere; both paths must order by voxel index.
  SceneSpec spec;
  spec.seed = 3;
  spec.n_objects = 3;
  const auto synth = generate_scene(spec);
  const auto view = generate_orbit(synth.scene, OrbitParams{4, 6.0, 45.0, 24, 24, 18.0}).at(1);
  const RayTracer tracer(synth.scene);
  for (int v = 0; v < view.height; v += 3)
    for (int u = 0; u < view.width; u += 3) {
      const auto ray = view.pixel_ray(u, v);
      const auto a = traverse_ray(synth.scene, ray.origin, ray.direction);
      const auto b = tracer.trace(ray.origin, ray.direction);
      ASSERT_EQ(a.hits.size(), b.hits.size());
      for (std::size_t i = 0; i < a.hits.size(); ++i) EXPECT_EQ(a.hits[i].voxel, b.hits[i].voxel);
    }
}

TEST(Traverse, SubsetTracerEqualsBruteForceOnSubScene) {
  const auto s = ovtest::random_scene(14, 200);
  std::vector<std::uint32_t> subset;
  VoxelScene sub;
  for (std::uint32_t i = 0; i < s.size(); i += 3) {
    subset.push_back(i);
    sub.push_back(s.centers[i], s.sizes[i], s.densities[i], s.colors[i]);
  }
  const RayTracer tracer(s, subset);
  Stream rng(14, "rays");
  for (int k = 0; k < 100; ++k) {
    const auto [o, d] = ovtest::random_ray(rng);
    const auto a = traverse_ray(sub, o, d);
    const auto b = tracer.trace(o, d);
    ASSERT_EQ(a.hits.size(), b.hits.size());
    for (std::size_t i = 0; i < a.hits.size(); ++i) {
      EXPECT_EQ(subset[a.hits[i].voxel], b.hits[i].voxel);
      EXPECT_EQ(a.hits[i].weight, b.hits[i].weight);
    }
  }
}

TEST(Traverse, DoublingDensityNeverLowersAlpha) {
  auto s = ovtest::random_scene(15, 100);
  auto s2 = s;
  for (auto& d : s2.densities) d *= 2.0f;
  Stream rng(15, "rays");
  for (int k = 0; k < 50; ++k) {
    const auto [o, d] = ovtest::random_ray(rng);
    for (std::uint32_t i = 0; i < s.size(); ++i) {
      double t0, t1;
      if (!detail::voxel_chord(s, i, o, d, t0, t1)) continue;
      const double len = t1 - t0;
      EXPECT_GE(1.0 - std::exp(-double(s2.densities[i]) * len), 1.0 - std::exp(-double(s.densities[i]) * len));
    }
  }
}

TEST(RenderColor, ZeroDensityIsBlack) {
  auto s = ovtest::random_scene(16, 30);
  for (auto& d : s.densities) d = 0.0f;
  const auto img = render_color(s, look_at(Vec3(4, 0, 1), Vec3::Zero(), 16, 16, 40.0));
  for (float x : img.data()) EXPECT_EQ(x, 0.0f);
}

TEST(RenderColor, OpaqueRedVoxel) {
  const auto img = render_color(x_row({100.0}), axis_camera());
  EXPECT_NEAR(img(0, 0, 0), 1.0, 1e-3);
  EXPECT_NEAR(img(0, 0, 1), 0.0, 1e-3);
  EXPECT_NEAR(img(0, 0, 2), 0.0, 1e-3);
}

TEST(RenderColor, MatchesScalarReferencePerPixel) {
  const auto s = ovtest::random_scene(17, 20, 0.5);
  const auto view = look_at(Vec3(3, 1, 1), Vec3::Zero(), 24, 24, 30.0);
  const auto img = render_color(s, view);
  for (int v = 0; v < view.height; ++v)
    for (int u = 0; u < view.width; ++u) {
      const auto r = view.pixel_ray(u, v);
      const Vec3 c = ovtest::ref_color(s, ovtest::ref_ray(s, r.origin, r.direction));
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(img(u, v, k), c[k], 1e-5);
    }
}

TEST(PointMap, OpaqueVoxelCenter) {
  VoxelScene s;
  s.push_back(Vec3f(1, 2, 3), 1.0f, 100.0f, Vec3f(1, 1, 1));
  const auto view = look_at(Vec3(-4, 2, 3), Vec3(1, 2, 3), 1, 1, 5.0);
  const auto pm = render_point_map(s, view, 0.5);
  ASSERT_TRUE(pm.validity[0]);
  EXPECT_NEAR((pm.positions[0] - Vec3(1, 2, 3)).norm(), 0.0, 1e-5);
}

TEST(PointMap, WeightedMeanOfTwoHits) {
  const auto pm = render_point_map(x_row({std::log(2.0), std::log(2.0)}), axis_camera(), 0.5);
  ASSERT_TRUE(pm.validity[0]);
  EXPECT_NEAR(pm.positions[0].x(), 2.0 / 3.0, 1e-8);
}

TEST(PointMap, BelowTauInvalid) {
  const auto pm = render_point_map(x_row({0.1}), axis_camera(), 0.5);
  EXPECT_FALSE(pm.validity[0]);
  EXPECT_THROW(render_point_map(x_row({0.1}), axis_camera(), 0.0), ValidationError);
}

TEST(GroupIds, SharedIdCoverage) {
  const auto s = ovtest::random_scene(18, 40, 0.4);
  const std::vector<std::int32_t> ids(s.size(), 7);
  const auto view = look_at(Vec3(3, 0, 0), Vec3::Zero(), 16, 16, 60.0);
  const auto m = render_group_ids(s, view, ids, 0.5);
  const auto trace = trace_view(s, view);
  for (std::size_t p = 0; p < m.pixel_count(); ++p)
    EXPECT_EQ(m.at(p), trace.rays[p].total_weight >= 0.5 ? 7 : 0);
}

TEST(GroupIds, FrontArgmax) {
  // Front alpha 0.6 (w 0.6), back alpha 0.5 (w 0.2).
  const auto s = x_row({-std::log(0.4), std::log(2.0)});
  const auto m = render_group_ids(s, axis_camera(), std::vector<std::int32_t>{1, 2}, 0.5);
  EXPECT_EQ(m(0, 0), 1);
}

TEST(GroupIds, TieGoesToSmallerId) {
  ViewTrace t{1, 1, {}};
  t.rays.push_back(RayHits{{{0, 1.0, 1.0, 0.5, 0.25}, {1, 3.0, 1.0, 1.0, 0.25}}, 0.5});
  const auto m = render_group_ids(t, std::vector<std::int32_t>{5, 3}, 0.5);
  EXPECT_EQ(m(0, 0), 3);
}

TEST(GroupIds, UnassignedVoxelsNeverWin) {
  ViewTrace t{2, 1, {}};
  t.rays.push_back(RayHits{{{0, 1.0, 1.0, 0.9, 0.9}, {1, 3.0, 1.0, 0.9, 0.09}}, 0.99});
  t.rays.push_back(RayHits{{{0, 1.0, 1.0, 0.9, 0.9}}, 0.9});
  const auto m = render_group_ids(t, std::vector<std::int32_t>{0, 3}, 0.5);
  EXPECT_EQ(m(0, 0), 3);
  EXPECT_EQ(m(1, 0), 0);
}

TEST(GroupIds, MatchesPerRayOracle) {
  auto s = ovtest::random_scene(19, 200, 1.0, true);
  // Some voxels unassigned.
  auto ids = *s.gt_labels;
  for (std::size_t i = 0; i < ids.size(); i += 4) ids[i] = 0;
  const auto view = look_at(Vec3(4, 1, 2), Vec3::Zero(), 32, 32, 40.0);
  const auto m = render_group_ids(s, view, ids, 0.5);
  for (int v = 0; v < view.height; ++v)
    for (int u = 0; u < view.width; ++u) {
      const auto r = view.pixel_ray(u, v);
      EXPECT_EQ(m(u, v), ovtest::ref_group_label(ovtest::ref_ray(s, r.origin, r.direction), ids, 0.5));
    }
}

TEST(GroupIds, InvariantUnderStoragePermutation) {
  const auto s = ovtest::random_scene(20, 150, 1.0, true);
  std::vector<std::uint32_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0u);
  Stream rng(20, "perm");
  rng.shuffle(perm.begin(), perm.end());
  VoxelScene p;
  std::vector<std::int32_t> pids;
  for (auto i : perm) {
    p.push_back(s.centers[i], s.sizes[i], s.densities[i], s.colors[i]);
    pids.push_back((*s.gt_labels)[i]);
  }
  const auto view = look_at(Vec3(4, -1, 2), Vec3::Zero(), 32, 32, 40.0);
  EXPECT_EQ(render_group_ids(s, view, *s.gt_labels, 0.5), render_group_ids(p, view, pids, 0.5));
}

TEST(GroupMask, AllIdsEqualsNonzeroProjection) {
  const auto s = ovtest::random_scene(21, 150, 1.0, true);
  const auto& ids = *s.gt_labels;
  const auto view = look_at(Vec3(4, 1, -2), Vec3::Zero(), 32, 32, 40.0);
  const std::set<std::int32_t> all(ids.begin(), ids.end());
  EXPECT_EQ(render_group_mask(s, view, all, ids, 0.5), nonzero_of(render_group_ids(s, view, ids, 0.5)));
}

TEST(GroupMask, EmptyAndUnknownSelectionsRejected) {
  const auto s = ovtest::random_scene(22, 20, 1.0, true);
  const auto view = axis_camera(5.0, 4, 4);
  EXPECT_THROW(render_group_mask(s, view, {}, *s.gt_labels, 0.5), ValidationError);
  try {
    render_group_mask(s, view, {1, 42, 99}, *s.gt_labels, 0.5);
    FAIL() << "unknown ids accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("42, 99"), std::string::npos) << e.what();
  }
}

TEST(GroupMask, SingleObjectMatchesGroundTruth) {
  SceneSpec spec;
  spec.seed = 5;
  spec.n_objects = 1;
  const auto synth = generate_scene(spec);
  const auto views = generate_orbit(synth.scene, OrbitParams{4, 6.0, 45.0, 32, 32, 18.0});
  // Group ids equal to the gt labels; select the object alone.
  const auto& ids = *synth.scene.gt_labels;
  for (const auto& v : views) {
    const auto mask = render_group_mask(synth.scene, v, {2}, ids, 0.5);
    // Oracle: the object's cubes rendered with nothing else in the scene.
    VoxelScene alone;
    for (std::size_t i = 0; i < synth.scene.size(); ++i)
      if (ids[i] == 2)
        alone.push_back(synth.scene.centers[i], synth.scene.sizes[i], synth.scene.densities[i], synth.scene.colors[i]);
    BinaryMask oracle(v.width, v.height);
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x) {
        const auto r = v.pixel_ray(x, y);
        double w = 0.0;
        for (const auto& h : ovtest::ref_ray(alone, r.origin, r.direction)) w += h.weight;
        oracle(x, y) = w >= 0.5;
      }
    EXPECT_EQ(mask, oracle) << v.name;
    EXPECT_GT(count_nonzero(mask), 0u);
  }
}

TEST(Camera, LookAtIsOrthonormalAndRoundTrips) {
  const auto v = look_at(Vec3(3, -2, 5), Vec3(0.1, 0.2, 0.3), 40, 30, 50.0, "cam");
  EXPECT_NO_THROW(v.validate());
  const auto views = cameras_from_json(cameras_to_json({v, look_at(Vec3(0, 0, 9), Vec3::Zero(), 40, 30, 50.0, "top")}));
  ASSERT_EQ(views.size(), 2u);
  EXPECT_EQ(views[0].name, "cam");
  EXPECT_NEAR((views[0].rotation - v.rotation).norm(), 0.0, 1e-12);
  EXPECT_NEAR((views[0].translation - v.translation).norm(), 0.0, 1e-12);
  EXPECT_EQ(find_view(views, "top"), 1u);
  EXPECT_THROW(find_view(views, "nope"), ValidationError);
}

TEST(Camera, PixelRayConvention) {
  CameraView c;
  c.width = c.height = 3;
  c.fx = c.fy = 2.0;
  c.cx = c.cy = 1.5;
  const auto r = c.pixel_ray(2, 1);
  EXPECT_NEAR((r.direction - Vec3(0.5, 0, 1).normalized()).norm(), 0.0, 1e-12);
  c.rotation(0, 0) = 2.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

// OVX file format.

namespace {

nlohmann::json ovx_header(const std::vector<char>& bytes) {
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 4, 8);
  return nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(len));
}

}  // namespace

TEST(Ovx, HandAuthoredOneVoxelFile) {
  const auto c = decode_ovx(ovtest::one_voxel_file(3.5f));
  ASSERT_EQ(c.scene.size(), 1u);
  EXPECT_EQ(c.scene.centers[0], Vec3f(0.5f, -1.25f, 2.0f));
  EXPECT_EQ(c.scene.sizes[0], 0.1f);
  EXPECT_EQ(c.scene.densities[0], 3.5f);
  EXPECT_EQ(c.scene.colors[0], Vec3f(0.25f, 0.5f, 0.75f));
  EXPECT_FALSE(c.scene.gt_labels);
  EXPECT_FALSE(c.grouping);
  EXPECT_EQ(c.meta.at("note"), "hand");
}

TEST(Ovx, NegativeDensityRejected) {
  try {
    decode_ovx(ovtest::one_voxel_file(-1.0f));
    FAIL() << "negative density accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("densities must be non-negative"), std::string::npos);
  }
}

TEST(Ovx, MalformedFilesNameTheSection) {
  auto bytes = ovtest::one_voxel_file(1.0f);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 4);
  try {
    decode_ovx(truncated);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.section(), "colors");
  }
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_ovx(bad);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.section(), "magic");
  }
  auto bad_header = bytes;
  bad_header[12] = '[';
  try {
    decode_ovx(bad_header);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.section(), "header");
  }
}

TEST(Ovx, RoundTripAndDeterministicBytes) {
  ovtest::TempDir dir("ovx");
  auto s = ovtest::random_scene(23, 64, 1.0, true);
  StoredGrouping g;
  Stream rng(23, "grouping");
  for (std::size_t i = 0; i < s.size(); ++i) {
    g.F.push_back(Vec3f::Random());
    g.W.push_back(static_cast<float>(rng.uniform()));
    g.ids.push_back(static_cast<std::int32_t>(rng.below(4)));
  }
  const auto p1 = dir.file("a.ovx"), p2 = dir.file("b.ovx"), p3 = dir.file("c.ovx");
  save_scene(s, p1, g, {{"k", 1}});
  save_scene(s, p2, g, {{"k", 1}});
  EXPECT_EQ(read_bytes(p1), read_bytes(p2));
  const auto c = load_scene_file(p1);
  EXPECT_EQ(c.scene, s);
  ASSERT_TRUE(c.grouping);
  EXPECT_EQ(*c.grouping, g);
  save_scene(c.scene, p3, c.grouping, c.meta);
  EXPECT_EQ(read_bytes(p1), read_bytes(p3));
}

TEST(Ovx, GtLabelsSectionPresentOnlyWhenSet) {
  auto s = ovtest::random_scene(24, 8, 1.0, true);
  auto names = [](const std::vector<char>& b) {
    std::set<std::string> n;
    const auto header = ovx_header(b);
    for (const auto& sec : header.at("sections")) n.insert(sec.at("name").get<std::string>());
    return n;
  };
  EXPECT_TRUE(names(encode_ovx(s)).count("gt_labels"));
  s.gt_labels.reset();
  EXPECT_FALSE(names(encode_ovx(s)).count("gt_labels"));
  EXPECT_EQ(names(encode_ovx(s)), (std::set<std::string>{"centers", "colors", "densities", "sizes"}));
}

TEST(SceneValidate, Invariants) {
  VoxelScene s;
  EXPECT_THROW(s.validate(), ValidationError);
  s.push_back(Vec3f(0, 0, 0), 0.0f, 1.0f, Vec3f(0, 0, 0));
  EXPECT_THROW(s.validate(), ValidationError);
  s.sizes[0] = 1.0f;
  EXPECT_NO_THROW(s.validate());
  s.gt_labels = std::vector<std::int32_t>{1, 2};
  EXPECT_THROW(s.validate(), ValidationError);
}
