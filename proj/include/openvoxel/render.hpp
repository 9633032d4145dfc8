// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <span>
#include <vector>

#include "openvoxel/camera.hpp"
#include "openvoxel/image.hpp"
#include "openvoxel/scene.hpp"

namespace openvoxel {

/// Compositing stops once transmittance falls below this.
inline constexpr double kTerminationTransmittance = 1e-4;

struct Hit {
  std::uint32_t voxel;
  double t_entry;
  double segment_length;
  double alpha;
  double weight;
};

/// Front-to-back hits of one ray with their volume-rendering weights.
struct RayHits {
  std::vector<Hit> hits;
  double total_weight = 0.0;
};

namespace detail {

/// Ray / cube intersection. On success `t0 < t1` bound the chord, with t0
/// clamped to the ray origin.
inline bool slab_intersect(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi,
                           double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < lo[k] || o[k] > hi[k]) return false;
      continue;
    }
    double ta = (lo[k] - o[k]) / d[k];
    double tb = (hi[k] - o[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0;
}

inline bool voxel_chord(const VoxelScene& s, std::uint32_t i, const Vec3& o, const Vec3& d,
                        double& t0, double& t1) {
  const Vec3 c = s.centers[i].cast<double>();
  const double h = 0.5 * static_cast<double>(s.sizes[i]);
  return slab_intersect(o, d, c - Vec3::Constant(h), c + Vec3::Constant(h), t0, t1);
}

struct Candidate {
  double t_entry;
  double t_exit;
  std::uint32_t voxel;
  bool operator<(const Candidate& o) const {
    return t_entry != o.t_entry ? t_entry < o.t_entry : voxel < o.voxel;
  }
  bool operator>(const Candidate& o) const { return o < *this; }
};

/// Appends one candidate to the composite. Returns false once the ray is saturated.
inline bool composite_step(const VoxelScene& s, const Candidate& c, double& transmittance,
                           RayHits& out) {
  const double len = c.t_exit - c.t_entry;
  const double alpha = 1.0 - std::exp(-static_cast<double>(s.densities[c.voxel]) * len);
  const double w = alpha * transmittance;
  out.hits.push_back({c.voxel, c.t_entry, len, alpha, w});
  out.total_weight += w;
  transmittance *= (1.0 - alpha);
  return transmittance >= kTerminationTransmittance;
}

}  // namespace detail

/// Exhaustive traversal: intersects every voxel, sorts by entry depth (ties by
/// index) and composites front to back.
inline RayHits traverse_ray(const VoxelScene& scene, const Vec3& origin, const Vec3& direction) {
  if (direction.squaredNorm() == 0.0) throw ValidationError("ray direction must be non-zero");
  const Vec3 d = direction.normalized();
  std::vector<detail::Candidate> cands;
  for (std::uint32_t i = 0; i < scene.size(); ++i) {
    double t0, t1;
    if (detail::voxel_chord(scene, i, origin, d, t0, t1)) cands.push_back({t0, t1, i});
  }
  std::sort(cands.begin(), cands.end());
  RayHits out;
  double T = 1.0;
  for (const auto& c : cands)
    if (!detail::composite_step(scene, c, T, out)) break;
  return out;
}

/// Per-call scratch for `RayTracer::trace`.
struct TraceScratch {
  std::vector<std::uint32_t> stamp;
  std::uint32_t epoch = 0;
};

/// Uniform-grid accelerated traversal over the whole scene or a voxel subset.
/// Produces exactly the hit list of `traverse_ray` restricted to the subset.
class RayTracer {
 public:
  explicit RayTracer(const VoxelScene& scene) : scene_(&scene) {
    std::vector<std::uint32_t> all(scene.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    build(all);
  }

  RayTracer(const VoxelScene& scene, std::vector<std::uint32_t> subset) : scene_(&scene) {
    build(subset);
  }

  const VoxelScene& scene() const { return *scene_; }

  TraceScratch make_scratch() const {
    TraceScratch s;
    s.stamp.assign(scene_->size(), 0);
    return s;
  }

  RayHits trace(const Vec3& origin, const Vec3& direction) const {
    auto scratch = make_scratch();
    return trace(origin, direction, scratch);
  }

  RayHits trace(const Vec3& origin, const Vec3& direction, TraceScratch& scratch) const {
    RayHits out;
    if (cell_ids_.empty()) return out;
    const Vec3 d = direction.normalized();
    double tg0, tg1;
    if (!detail::slab_intersect(origin, d, lo_, hi_, tg0, tg1)) return out;
    if (++scratch.epoch == 0) {
      std::fill(scratch.stamp.begin(), scratch.stamp.end(), 0);
      scratch.epoch = 1;
    }

    const Vec3 p = origin + d * tg0;
    int cell[3], step[3];
    double t_max[3], t_delta[3];
    for (int k = 0; k < 3; ++k) {
      cell[k] = std::clamp(static_cast<int>(std::floor((p[k] - lo_[k]) / cell_size_)), 0,
                           dims_[k] - 1);
      if (d[k] > 0.0) {
        step[k] = 1;
        t_max[k] = (lo_[k] + (cell[k] + 1) * cell_size_ - origin[k]) / d[k];
        t_delta[k] = cell_size_ / d[k];
      } else if (d[k] < 0.0) {
        step[k] = -1;
        t_max[k] = (lo_[k] + cell[k] * cell_size_ - origin[k]) / d[k];
        t_delta[k] = -cell_size_ / d[k];
      } else {
        step[k] = 0;
        t_max[k] = std::numeric_limits<double>::infinity();
        t_delta[k] = std::numeric_limits<double>::infinity();
      }
    }

    const double tol = 1e-6 * cell_size_;
    std::priority_queue<detail::Candidate, std::vector<detail::Candidate>,
                        std::greater<detail::Candidate>>
        pending;
    double T = 1.0;
    while (true) {
      const std::size_t c = (static_cast<std::size_t>(cell[2]) * dims_[1] + cell[1]) * dims_[0] + cell[0];
      for (std::uint32_t k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
        const std::uint32_t v = cell_ids_[k];
        if (scratch.stamp[v] == scratch.epoch) continue;
        scratch.stamp[v] = scratch.epoch;
        double t0, t1;
        if (detail::voxel_chord(*scene_, v, origin, d, t0, t1)) pending.push({t0, t1, v});
      }
      const int axis = t_max[0] < t_max[1] ? (t_max[0] < t_max[2] ? 0 : 2)
                                           : (t_max[1] < t_max[2] ? 1 : 2);
      const double cell_exit = t_max[axis];
      while (!pending.empty() && pending.top().t_entry < cell_exit - tol) {
        const auto cand = pending.top();
        pending.pop();
        if (!detail::composite_step(*scene_, cand, T, out)) return out;
      }
      if (cell_exit > tg1 + tol) break;
      cell[axis] += step[axis];
      if (cell[axis] < 0 || cell[axis] >= dims_[axis]) break;
      t_max[axis] += t_delta[axis];
    }
    while (!pending.empty()) {
      const auto cand = pending.top();
      pending.pop();
      if (!detail::composite_step(*scene_, cand, T, out)) break;
    }
    return out;
  }

 private:
  void build(const std::vector<std::uint32_t>& subset) {
    if (subset.empty()) return;
    double max_size = 0.0;
    Aabb box;
    for (auto i : subset) {
      const Vec3 c = scene_->centers[i].cast<double>();
      const double h = 0.5 * scene_->sizes[i];
      box.extend(c - Vec3::Constant(h));
      box.extend(c + Vec3::Constant(h));
      max_size = std::max(max_size, static_cast<double>(scene_->sizes[i]));
    }
    const Vec3 pad = Vec3::Constant(1e-6 * max_size);
    lo_ = box.lo - pad;
    hi_ = box.hi + pad;
    const Vec3 extent = hi_ - lo_;
    cell_size_ = max_size;
    constexpr double kMaxCells = 4.0e6;
    while ((extent / cell_size_).array().ceil().prod() > kMaxCells) cell_size_ *= 1.5;
    for (int k = 0; k < 3; ++k)
      dims_[k] = std::max(1, static_cast<int>(std::ceil(extent[k] / cell_size_)));
    const std::size_t n_cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];

    auto cell_range = [&](std::uint32_t i, int lo_idx[3], int hi_idx[3]) {
      const Vec3 c = scene_->centers[i].cast<double>();
      const double h = 0.5 * scene_->sizes[i] + 1e-6 * cell_size_;
      for (int k = 0; k < 3; ++k) {
        lo_idx[k] = std::clamp(static_cast<int>(std::floor((c[k] - h - lo_[k]) / cell_size_)), 0, dims_[k] - 1);
        hi_idx[k] = std::clamp(static_cast<int>(std::floor((c[k] + h - lo_[k]) / cell_size_)), 0, dims_[k] - 1);
      }
    };
    std::vector<std::uint32_t> counts(n_cells + 1, 0);
    auto for_cells = [&](std::uint32_t i, auto&& fn) {
      int a[3], b[3];
      cell_range(i, a, b);
      for (int z = a[2]; z <= b[2]; ++z)
        for (int y = a[1]; y <= b[1]; ++y)
          for (int x = a[0]; x <= b[0]; ++x)
            fn((static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x);
    };
    std::vector<std::uint32_t> sorted = subset;
    std::sort(sorted.begin(), sorted.end());
    for (auto i : sorted) for_cells(i, [&](std::size_t c) { ++counts[c + 1]; });
    for (std::size_t c = 0; c < n_cells; ++c) counts[c + 1] += counts[c];
    cell_start_ = counts;
    cell_ids_.resize(counts.back());
    for (auto i : sorted) for_cells(i, [&](std::size_t c) { cell_ids_[counts[c]++] = i; });
  }

  const VoxelScene* scene_;
  Vec3 lo_ = Vec3::Zero(), hi_ = Vec3::Zero();
  double cell_size_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::uint32_t> cell_ids_;
};

/// Hits for every pixel of a view, row-major.
struct ViewTrace {
  int width = 0;
  int height = 0;
  std::vector<RayHits> rays;
};

inline ViewTrace trace_view(const RayTracer& tracer, const CameraView& view) {
  view.validate();
  ViewTrace out{view.width, view.height, {}};
  out.rays.resize(view.pixel_count());
  auto scratch = tracer.make_scratch();
  for (int v = 0; v < view.height; ++v)
    for (int u = 0; u < view.width; ++u) {
      const Ray r = view.pixel_ray(u, v);
      out.rays[static_cast<std::size_t>(v) * view.width + u] = tracer.trace(r.origin, r.direction, scratch);
    }
  return out;
}

inline ViewTrace trace_view(const VoxelScene& scene, const CameraView& view) {
  return trace_view(RayTracer(scene), view);
}

inline ColorImage render_color(const VoxelScene& scene, const ViewTrace& trace) {
  ColorImage img = make_color_image(trace.width, trace.height);
  for (std::size_t p = 0; p < trace.rays.size(); ++p) {
    Vec3 c = Vec3::Zero();
    for (const auto& h : trace.rays[p].hits) c += h.weight * scene.colors[h.voxel].cast<double>();
    for (int k = 0; k < 3; ++k) img.at(p, k) = static_cast<float>(c[k]);
  }
  return img;
}

inline ColorImage render_color(const VoxelScene& scene, const CameraView& view) {
  return render_color(scene, trace_view(scene, view));
}

/// Per-pixel expected ray-hit position, normalized by accumulated weight.
struct PointMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> positions;
  std::vector<std::uint8_t> validity;

  std::size_t pixel_count() const { return positions.size(); }
};

inline PointMap render_point_map(const VoxelScene& scene, const ViewTrace& trace, double tau_bg) {
  if (!(tau_bg > 0.0 && tau_bg <= 1.0)) throw ValidationError("tau_bg must lie in (0, 1]");
  PointMap pm{trace.width, trace.height, {}, {}};
  pm.positions.assign(trace.rays.size(), Vec3::Zero());
  pm.validity.assign(trace.rays.size(), 0);
  for (std::size_t p = 0; p < trace.rays.size(); ++p) {
    const auto& r = trace.rays[p];
    if (r.total_weight <= 0.0) continue;
    Vec3 acc = Vec3::Zero();
    for (const auto& h : r.hits) acc += h.weight * scene.centers[h.voxel].cast<double>();
    pm.positions[p] = acc / r.total_weight;
    pm.validity[p] = r.total_weight >= tau_bg ? 1 : 0;
  }
  return pm;
}

inline PointMap render_point_map(const VoxelScene& scene, const CameraView& view, double tau_bg) {
  return render_point_map(scene, trace_view(scene, view), tau_bg);
}

/// Label = id with the largest accumulated weight along the ray (ties -> smaller
/// id); 0 when the ray's total weight is below tau_bg. Unassigned voxels (id 0)
/// count towards the total but never win the vote.
inline InstanceMask render_group_ids(const ViewTrace& trace, std::span<const std::int32_t> voxel_ids,
                                     double tau_bg) {
  InstanceMask mask(trace.width, trace.height);
  std::vector<std::pair<std::int32_t, double>> acc;
  for (std::size_t p = 0; p < trace.rays.size(); ++p) {
    const auto& r = trace.rays[p];
    if (r.total_weight < tau_bg) continue;
    acc.clear();
    for (const auto& h : r.hits) {
      const std::int32_t id = voxel_ids[h.voxel];
      if (id == 0) continue;
      auto it = std::find_if(acc.begin(), acc.end(), [&](const auto& e) { return e.first == id; });
      if (it == acc.end())
        acc.emplace_back(id, h.weight);
      else
        it->second += h.weight;
    }
    std::int32_t best = 0;
    double best_w = -1.0;
    for (const auto& [id, w] : acc)
      if (w > best_w || (w == best_w && id < best)) {
        best = id;
        best_w = w;
      }
    mask.at(p) = best;
  }
  return mask;
}

inline InstanceMask render_group_ids(const VoxelScene& scene, const CameraView& view,
                                     std::span<const std::int32_t> voxel_ids, double tau_bg) {
  if (voxel_ids.size() != scene.size()) throw ValidationError("voxel_ids must have one entry per voxel");
  return render_group_ids(trace_view(scene, view), voxel_ids, tau_bg);
}

/// Voxels carrying any of the selected ids. Throws on an empty selection or on
/// ids that no voxel carries.
inline std::vector<std::uint32_t> select_voxels(std::span<const std::int32_t> voxel_ids,
                                                const std::set<std::int32_t>& selected) {
  if (selected.empty()) throw ValidationError("selected_ids must not be empty");
  std::set<std::int32_t> present(voxel_ids.begin(), voxel_ids.end());
  std::vector<int> unknown;
  for (auto id : selected)
    if (!present.count(id)) unknown.push_back(id);
  if (!unknown.empty()) throw ValidationError("unknown group ids: " + join_ints(unknown));
  std::vector<std::uint32_t> subset;
  for (std::uint32_t i = 0; i < voxel_ids.size(); ++i)
    if (selected.count(voxel_ids[i])) subset.push_back(i);
  return subset;
}

inline BinaryMask threshold_mask(const ViewTrace& trace, double tau_mask) {
  BinaryMask out(trace.width, trace.height);
  for (std::size_t p = 0; p < trace.rays.size(); ++p)
    out.at(p) = trace.rays[p].total_weight >= tau_mask ? 1 : 0;
  return out;
}

/// Renders only the selected groups (other voxels are absent from the
/// traversal); pixel is set when their composited weight reaches tau_mask.
inline BinaryMask render_group_mask(const VoxelScene& scene, const CameraView& view,
                                    const std::set<std::int32_t>& selected_ids,
                                    std::span<const std::int32_t> voxel_ids, double tau_mask) {
  if (!(tau_mask > 0.0 && tau_mask <= 1.0)) throw ValidationError("tau_mask must lie in (0, 1]");
  if (voxel_ids.size() != scene.size()) throw ValidationError("voxel_ids must have one entry per voxel");
  RayTracer tracer(scene, select_voxels(voxel_ids, selected_ids));
  return threshold_mask(trace_view(tracer, view), tau_mask);
}

}  // namespace openvoxel
