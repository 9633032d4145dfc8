// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "openvoxel/common.hpp"
#include "openvoxel/image.hpp"

namespace openvoxel {

/// |a & b| / |a | b|; two empty masks score 1.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ValidationError("iou: mask shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    const bool x = a.at(p) != 0, y = b.at(p) != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// ceil(fraction * image diagonal).
inline int boundary_width(int width, int height, double fraction = 0.02) {
  return static_cast<int>(std::ceil(fraction * std::hypot(static_cast<double>(width), height)));
}

namespace detail {

// 1D squared distance transform (lower envelope of parabolas). Inputs are
// integers, with "far" encoded as a large finite value so the arithmetic stays exact.
inline void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace detail

/// Squared Euclidean distance from every pixel to the nearest pixel outside
/// the mask, where everything beyond the image border counts as outside.
inline std::vector<double> squared_distance_to_background(const BinaryMask& m) {
  const int w = m.width() + 2, h = m.height() + 2;
  const double far = 4.0 * (double(w) * w + double(h) * h);
  std::vector<double> g(static_cast<std::size_t>(w) * h, 0.0);
  for (int v = 0; v < m.height(); ++v)
    for (int u = 0; u < m.width(); ++u)
      g[static_cast<std::size_t>(v + 1) * w + u + 1] = m(u, v) ? far : 0.0;
  std::vector<int> vs;
  std::vector<double> zs, in(std::max(w, h)), out(std::max(w, h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) in[y] = g[static_cast<std::size_t>(y) * w + x];
    detail::edt_1d(in.data(), out.data(), h, vs, zs);
    for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = out[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = &g[static_cast<std::size_t>(y) * w];
    std::copy(row, row + w, in.begin());
    detail::edt_1d(in.data(), row, w, vs, zs);
  }
  std::vector<double> dist(m.pixel_count());
  for (int v = 0; v < m.height(); ++v)
    for (int u = 0; u < m.width(); ++u)
      dist[static_cast<std::size_t>(v) * m.width() + u] = g[static_cast<std::size_t>(v + 1) * w + u + 1];
  return dist;
}

/// Mask pixels within distance d of the mask's contour.
inline BinaryMask boundary_band(const BinaryMask& m, int d) {
  const auto dist = squared_distance_to_background(m);
  BinaryMask band(m.width(), m.height());
  const double d2 = static_cast<double>(d) * d;
  for (std::size_t p = 0; p < m.pixel_count(); ++p) band.at(p) = m.at(p) && dist[p] <= d2 ? 1 : 0;
  return band;
}

/// IoU of the two masks' boundary bands; d < 0 selects ceil(2% of the diagonal).
inline double boundary_iou(const BinaryMask& a, const BinaryMask& b, int d = -1) {
  if (!a.same_shape(b)) throw ValidationError("boundary_iou: mask shapes differ");
  if (d < 0) d = boundary_width(a.width(), a.height());
  return iou(boundary_band(a, d), boundary_band(b, d));
}

/// Adjusted Rand index over entries where both labels are non-zero.
inline double adjusted_rand_index(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt) {
  if (pred.size() != gt.size()) throw ValidationError("adjusted_rand_index: label lengths differ");
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> table;
  std::map<std::int32_t, std::int64_t> rows, cols;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 0 || gt[i] == 0) continue;
    ++table[{pred[i], gt[i]}];
    ++rows[pred[i]];
    ++cols[gt[i]];
    ++n;
  }
  if (n == 0) throw ValidationError("adjusted_rand_index: empty evaluation set");
  auto c2 = [](std::int64_t x) { return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0; };
  double index = 0.0, a = 0.0, b = 0.0;
  for (const auto& [k, c] : table) index += c2(c);
  for (const auto& [k, c] : rows) a += c2(c);
  for (const auto& [k, c] : cols) b += c2(c);
  if (n < 2) return 1.0;
  const double expected = a * b / c2(n);
  const double max_index = 0.5 * (a + b);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

/// Static 3D KD-tree with exact k-nearest queries ordered by (squared
/// distance, point index).
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)), order_(pts_.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(pts_.size());
    if (!pts_.empty()) build(0, pts_.size(), 0);
  }

  std::size_t size() const { return pts_.size(); }

  /// Up to k neighbours, nearest first.
  std::vector<std::size_t> nearest(const Vec3& q, std::size_t k) const {
    std::priority_queue<Entry> heap;  // max-heap: worst on top
    if (k > 0 && !nodes_.empty()) search(0, q, k, heap);
    std::vector<std::size_t> out(heap.size());
    for (auto i = out.size(); i-- > 0; heap.pop()) out[i] = heap.top().index;
    return out;
  }

 private:
  struct Node {
    std::size_t point;
    int axis;
    std::int64_t left = -1, right = -1;
  };
  struct Entry {
    double d2;
    std::size_t index;
    bool operator<(const Entry& o) const { return d2 != o.d2 ? d2 < o.d2 : index < o.index; }
  };

  std::int64_t build(std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) { return pts_[a][axis] < pts_[b][axis]; });
    const auto id = static_cast<std::int64_t>(nodes_.size());
    nodes_.push_back({order_[mid], axis});
    const auto l = build(lo, mid, depth + 1);
    const auto r = build(mid + 1, hi, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(std::int64_t id, const Vec3& q, std::size_t k, std::priority_queue<Entry>& heap) const {
    const Node& n = nodes_[id];
    const Entry e{(pts_[n.point] - q).squaredNorm(), n.point};
    if (heap.size() < k) {
      heap.push(e);
    } else if (e < heap.top()) {
      heap.pop();
      heap.push(e);
    }
    const double diff = q[n.axis] - pts_[n.point][n.axis];
    const auto near = diff < 0 ? n.left : n.right;
    const auto far = diff < 0 ? n.right : n.left;
    if (near >= 0) search(near, q, k, heap);
    // Equal plane distance may still hide a smaller-index tie, so only prune strictly.
    if (far >= 0 && (heap.size() < k || diff * diff <= heap.top().d2)) search(far, q, k, heap);
  }

  std::vector<Vec3> pts_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

enum class TransferProtocol { nearest, majority_knn };

/// Labels each query point from its nearest voxel, or by the modal class of
/// its k nearest voxels (ties -> smallest class id).
inline std::vector<std::int32_t> semseg_transfer(std::span<const Vec3> points, std::span<const Vec3> voxels,
                                                 std::span<const std::int32_t> voxel_labels,
                                                 TransferProtocol protocol, int k = 25) {
  if (voxels.empty()) throw ValidationError("semseg_transfer: empty voxel set");
  if (voxels.size() != voxel_labels.size()) throw ValidationError("semseg_transfer: label count mismatch");
  if (protocol == TransferProtocol::majority_knn && k < 1) throw ValidationError("semseg_transfer: k must be >= 1");
  const std::size_t kk = protocol == TransferProtocol::nearest ? 1 : static_cast<std::size_t>(k);
  const KdTree tree(std::vector<Vec3>(voxels.begin(), voxels.end()));
  std::vector<std::int32_t> out;
  out.reserve(points.size());
  std::map<std::int32_t, int> votes;
  for (const auto& p : points) {
    votes.clear();
    for (auto i : tree.nearest(p, kk)) ++votes[voxel_labels[i]];
    std::int32_t best = 0;
    int best_n = -1;
    for (const auto& [c, n] : votes)
      if (n > best_n) {
        best = c;
        best_n = n;
      }
    out.push_back(best);
  }
  return out;
}

}  // namespace openvoxel
