// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "openvoxel/common.hpp"

namespace openvoxel {

/// Sparse set of axis-aligned cube voxels. Positions and sizes in meters,
/// densities in 1/meter, colors in [0, 1].
struct VoxelScene {
  std::vector<Vec3f> centers;
  std::vector<float> sizes;
  std::vector<float> densities;
  std::vector<Vec3f> colors;
  /// Ground-truth instance id per voxel (synthetic scenes), 0 = unlabeled.
  std::optional<std::vector<std::int32_t>> gt_labels;

  std::size_t size() const { return centers.size(); }

  void validate() const {
    const std::size_t n = centers.size();
    if (n == 0) throw ValidationError("scene must contain at least one voxel");
    if (sizes.size() != n) throw ValidationError("sizes must have one entry per voxel");
    if (densities.size() != n) throw ValidationError("densities must have one entry per voxel");
    if (colors.size() != n) throw ValidationError("colors must have one entry per voxel");
    if (gt_labels && gt_labels->size() != n)
      throw ValidationError("gt_labels must have one entry per voxel");
    for (std::size_t i = 0; i < n; ++i) {
      if (!centers[i].allFinite()) throw ValidationError("centers must be finite");
      if (!std::isfinite(sizes[i]) || !(sizes[i] > 0.0f))
        throw ValidationError("sizes must be positive");
      if (!std::isfinite(densities[i])) throw ValidationError("densities must be finite");
      if (densities[i] < 0.0f) throw ValidationError("densities must be non-negative");
      if (!colors[i].allFinite()) throw ValidationError("colors must be finite");
    }
  }

  void push_back(const Vec3f& center, float size, float density, const Vec3f& color) {
    centers.push_back(center);
    sizes.push_back(size);
    densities.push_back(density);
    colors.push_back(color);
  }

  bool operator==(const VoxelScene& o) const {
    return centers == o.centers && sizes == o.sizes && densities == o.densities &&
           colors == o.colors && gt_labels == o.gt_labels;
  }
};

/// Scene bounds over voxel cubes.
struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool empty() const { return (hi.array() < lo.array()).any(); }
};

inline Aabb scene_bounds(const VoxelScene& s) {
  Aabb box;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3 c = s.centers[i].cast<double>();
    const double h = 0.5 * s.sizes[i];
    box.extend(c - Vec3::Constant(h));
    box.extend(c + Vec3::Constant(h));
  }
  return box;
}

inline Vec3 scene_centroid(const VoxelScene& s) {
  Vec3 acc = Vec3::Zero();
  for (const auto& c : s.centers) acc += c.cast<double>();
  return acc / static_cast<double>(s.size());
}

}  // namespace openvoxel
