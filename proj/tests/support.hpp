// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared test fixtures and independent scalar oracles.

#include <algorithm>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "openvoxel/camera.hpp"
#include "openvoxel/image.hpp"
#include "openvoxel/rng.hpp"
#include "openvoxel/scene.hpp"

namespace ovtest {

using openvoxel::Vec3;
using openvoxel::Vec3f;

/// Random cubes inside [-extent, extent]^3.
inline openvoxel::VoxelScene random_scene(std::uint64_t seed, int n, double extent = 1.0, bool labels = false) {
  openvoxel::Stream rng(seed, "test-scene");
  openvoxel::VoxelScene s;
  for (int i = 0; i < n; ++i) {
    const Vec3f c(static_cast<float>(rng.uniform(-extent, extent)), static_cast<float>(rng.uniform(-extent, extent)),
                  static_cast<float>(rng.uniform(-extent, extent)));
    const Vec3f col(static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                    static_cast<float>(rng.uniform()));
    s.push_back(c, static_cast<float>(rng.uniform(0.05, 0.4)), static_cast<float>(rng.uniform(0.0, 12.0)), col);
  }
  if (labels) {
    s.gt_labels.emplace();
    for (int i = 0; i < n; ++i) s.gt_labels->push_back(1 + static_cast<std::int32_t>(rng.below(5)));
  }
  return s;
}

/// Unit direction from a random point on a sphere of radius r towards a
/// random point near the origin.
inline std::pair<Vec3, Vec3> random_ray(openvoxel::Stream& rng, double r = 4.0) {
  Vec3 o(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  o = o.normalized() * r;
  const Vec3 t(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
  return {o, (t - o).normalized()};
}

// Scalar reference renderer: plain loops, no shared code with the library.

struct RefHit {
  std::uint32_t voxel;
  double t0;
  double alpha;
  double weight;
};

inline bool ref_chord(const openvoxel::VoxelScene& s, std::uint32_t i, const Vec3& o, const Vec3& d, double& t0,
                      double& t1) {
  double lo_t = 0.0, hi_t = std::numeric_limits<double>::infinity();
  const double h = 0.5 * static_cast<double>(s.sizes[i]);
  for (int k = 0; k < 3; ++k) {
    const double lo = static_cast<double>(s.centers[i][k]) - h, hi = static_cast<double>(s.centers[i][k]) + h;
    if (d[k] == 0.0) {
      if (o[k] < lo || o[k] > hi) return false;
      continue;
    }
    const double a = (lo - o[k]) / d[k], b = (hi - o[k]) / d[k];
    lo_t = std::max(lo_t, std::min(a, b));
    hi_t = std::min(hi_t, std::max(a, b));
  }
  t0 = lo_t;
  t1 = hi_t;
  return hi_t > lo_t;
}

inline std::vector<RefHit> ref_ray(const openvoxel::VoxelScene& s, const Vec3& o, const Vec3& d) {
  std::vector<std::tuple<double, std::uint32_t, double>> c;
  for (std::uint32_t i = 0; i < s.size(); ++i) {
    double t0, t1;
    if (ref_chord(s, i, o, d, t0, t1)) c.emplace_back(t0, i, t1 - t0);
  }
  std::sort(c.begin(), c.end());
  std::vector<RefHit> out;
  double T = 1.0;
  for (const auto& [t0, i, len] : c) {
    const double a = 1.0 - std::exp(-static_cast<double>(s.densities[i]) * len);
    out.push_back({i, t0, a, a * T});
    T *= 1.0 - a;
    if (T < 1e-4) break;
  }
  return out;
}

inline Vec3 ref_color(const openvoxel::VoxelScene& s, const std::vector<RefHit>& hits) {
  Vec3 c = Vec3::Zero();
  for (const auto& h : hits)
    for (int k = 0; k < 3; ++k) c[k] += h.weight * static_cast<double>(s.colors[h.voxel][k]);
  return c;
}

/// Accumulated-weight argmax with ties to the smaller id; 0 below tau.
inline std::int32_t ref_group_label(const std::vector<RefHit>& hits, const std::vector<std::int32_t>& ids,
                                    double tau) {
  double total = 0.0;
  std::map<std::int32_t, double> acc;
  for (const auto& h : hits) {
    total += h.weight;
    if (ids[h.voxel] != 0) acc[ids[h.voxel]] += h.weight;
  }
  if (total < tau) return 0;
  std::int32_t best = 0;
  double bw = -1.0;
  for (const auto& [id, w] : acc)  // ascending ids, so strict > keeps the smaller on ties
    if (w > bw) {
      bw = w;
      best = id;
    }
  return best;
}

/// Camera on the +x axis at distance r looking at the origin.
inline openvoxel::CameraView axis_camera(double r = 5.0, int w = 1, int h = 1, double fov = 10.0) {
  return openvoxel::look_at(Vec3(-r, 0, 0), Vec3::Zero(), w, h, fov, "axis");
}

inline openvoxel::BinaryMask random_mask(openvoxel::Stream& rng, int w, int h) {
  // Union of a few random rectangles plus sprinkled noise.
  openvoxel::BinaryMask m(w, h);
  const int rects = 1 + static_cast<int>(rng.below(3));
  for (int r = 0; r < rects; ++r) {
    const int u0 = static_cast<int>(rng.below(w)), v0 = static_cast<int>(rng.below(h));
    const int u1 = std::min(w, u0 + 1 + static_cast<int>(rng.below(w / 2))),
              v1 = std::min(h, v0 + 1 + static_cast<int>(rng.below(h / 2)));
    for (int v = v0; v < v1; ++v)
      for (int u = u0; u < u1; ++u) m(u, v) = 1;
  }
  for (std::size_t p = 0; p < m.pixel_count(); ++p)
    if (rng.bernoulli(0.05)) m.at(p) = 1 - m.at(p);
  return m;
}

/// Boundary-IoU oracle: per-pixel brute-force distance to the nearest
/// outside pixel (the image border counts as outside).
inline double ref_boundary_iou(const openvoxel::BinaryMask& a, const openvoxel::BinaryMask& b, int d) {
  auto band = [d](const openvoxel::BinaryMask& m) {
    const int w = m.width(), h = m.height();
    openvoxel::BinaryMask out(w, h);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!m(u, v)) continue;
        long best = std::numeric_limits<long>::max();
        for (int y = -1; y <= h; ++y)
          for (int x = -1; x <= w; ++x) {
            const bool outside = x < 0 || y < 0 || x >= w || y >= h || !m(x, y);
            if (!outside) continue;
            const long dx = x - u, dy = y - v;
            best = std::min(best, dx * dx + dy * dy);
          }
        out(u, v) = best <= static_cast<long>(d) * d ? 1 : 0;
      }
    return out;
  };
  const auto ba = band(a), bb = band(b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < ba.pixel_count(); ++p) {
    inter += ba.at(p) && bb.at(p);
    uni += ba.at(p) || bb.at(p);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Co-membership equality: the two labelings induce the same partition of
/// pixels (background treated as its own fixed class).
template <typename A, typename B>
bool same_partition(const A& a, const B& b) {
  if (a.size() != b.size()) return false;
  std::map<std::int64_t, std::int64_t> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::int64_t x = a[i], y = b[i];
    if ((x == 0) != (y == 0)) return false;
    auto [f, fi] = fwd.emplace(x, y);
    auto [r, ri] = bwd.emplace(y, x);
    if (f->second != y || r->second != x) return false;
  }
  return true;
}

inline void put_f32(std::vector<char>& out, float x) {
  char b[4];
  std::memcpy(b, &x, 4);
  out.insert(out.end(), b, b + 4);
}

/// Hand-authored OVX file holding one voxel: center (0.5, -1.25, 2), size
/// 0.1, the given density, color (0.25, 0.5, 0.75) and meta {"note": "hand"}.
inline std::vector<char> one_voxel_file(float density) {
  const std::string header =
      R"({"n_voxels":1,"sections":[)"
      R"({"name":"centers","dtype":"f32","shape":[1,3],"offset":0,"byte_len":12},)"
      R"({"name":"sizes","dtype":"f32","shape":[1],"offset":12,"byte_len":4},)"
      R"({"name":"densities","dtype":"f32","shape":[1],"offset":16,"byte_len":4},)"
      R"({"name":"colors","dtype":"f32","shape":[1,3],"offset":20,"byte_len":12}],"meta":{"note":"hand"}})";
  std::vector<char> out = {'O', 'V', 'X', '1'};
  std::uint64_t len = header.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  out.insert(out.end(), header.begin(), header.end());
  for (float x : {0.5f, -1.25f, 2.0f, 0.1f, density, 0.25f, 0.5f, 0.75f}) put_f32(out, x);
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("openvoxel_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace ovtest
