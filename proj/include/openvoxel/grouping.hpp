// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training-free voxel grouping. Every voxel accumulates blending-weighted votes
// for the 3D centroids of the 2D instances it renders into (F, W); a voxel's
// group is the dictionary centroid nearest to F / W. Views are processed
// progressively: the current grouping is projected into the next view, matched
// to its segmentation by IoU, occasionally merged by re-prompting the
// segmenter, and lifted.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "openvoxel/log.hpp"
#include "openvoxel/render.hpp"
#include "openvoxel/segmenter.hpp"

namespace openvoxel {

struct GroupField {
  std::vector<Vec3> F;
  std::vector<double> W;

  GroupField() = default;
  explicit GroupField(std::size_t n) : F(n, Vec3::Zero()), W(n, 0.0) {}

  std::size_t size() const { return W.size(); }
  /// Normalized vote; only meaningful when W[i] > 0.
  Vec3 embedding(std::size_t i) const { return F[i] / W[i]; }
};

struct GroupEntry {
  Vec3 centroid = Vec3::Zero();
  /// Accumulated pixel count.
  double support = 0.0;
};

struct GroupDictionary {
  std::map<std::int32_t, GroupEntry> entries;
  std::int32_t next_id = 1;

  std::int32_t allocate() { return next_id++; }
  bool contains(std::int32_t id) const { return entries.count(id) != 0; }

  /// Support-weighted running mean.
  void observe(std::int32_t id, const Vec3& centroid, double support) {
    auto [it, inserted] = entries.try_emplace(id, GroupEntry{centroid, support});
    if (inserted) return;
    auto& e = it->second;
    const double total = e.support + support;
    e.centroid = (e.centroid * e.support + centroid * support) / total;
    e.support = total;
  }
};

struct GroupingConfig {
  double iou_match_threshold = 0.3;
  double containment_merge_threshold = 0.9;
  int merge_every = 3;
  int max_views = 150;
  double tau_bg = 0.5;
  int min_instance_pixels = 16;
  bool enable_merge = true;
  int positive_prompts = 5;
  int max_negative_prompts = 8;
  std::uint64_t seed = 0;

  void validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(iou_match_threshold)) throw ValidationError("iou_match_threshold must lie in [0, 1]");
    if (!unit(containment_merge_threshold))
      throw ValidationError("containment_merge_threshold must lie in [0, 1]");
    if (merge_every < 1) throw ValidationError("merge_every must be >= 1");
    if (max_views < 1) throw ValidationError("max_views must be >= 1");
    if (!(tau_bg > 0.0 && tau_bg <= 1.0)) throw ValidationError("tau_bg must lie in (0, 1]");
    if (min_instance_pixels < 1) throw ValidationError("min_instance_pixels must be >= 1");
    if (positive_prompts < 1) throw ValidationError("positive_prompts must be >= 1");
    if (max_negative_prompts < 0) throw ValidationError("max_negative_prompts must be >= 0");
  }
};

struct InstanceCentroid {
  Vec3 position = Vec3::Zero();
  std::size_t pixels = 0;
};

using CentroidMap = std::map<std::int32_t, InstanceCentroid>;

/// Masked mean of the point map per instance over valid pixels. Instances with
/// fewer than `min_pixels` valid pixels are omitted.
inline CentroidMap compute_instance_centroids(const InstanceMask& mask, const PointMap& pmap,
                                              int min_pixels = 1) {
  if (mask.pixel_count() != pmap.pixel_count() || mask.width() != pmap.width)
    throw ValidationError("mask and point map dimensions differ");
  CentroidMap out;
  for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
    const auto k = mask.at(p);
    if (k < 1 || !pmap.validity[p]) continue;
    auto& c = out[k];
    c.position += pmap.positions[p];
    ++c.pixels;
  }
  for (auto it = out.begin(); it != out.end();) {
    if (it->second.pixels < static_cast<std::size_t>(std::max(1, min_pixels))) {
      it = out.erase(it);
    } else {
      it->second.position /= static_cast<double>(it->second.pixels);
      ++it;
    }
  }
  return out;
}

/// F[i] += sum_j w_ij * centroid(mask_j), W[i] += sum_j w_ij over labeled pixels
/// with a centroid, in one pass over the view's rays (pixel order).
inline void lift_masks(const ViewTrace& trace, const InstanceMask& mask, const CentroidMap& centroids,
                       GroupField& field) {
  if (mask.width() != trace.width || mask.height() != trace.height)
    throw ValidationError("mask does not match the view");
  for (std::size_t p = 0; p < trace.rays.size(); ++p) {
    const auto k = mask.at(p);
    if (k < 1) continue;
    auto it = centroids.find(k);
    if (it == centroids.end()) continue;
    const Vec3& c = it->second.position;
    for (const auto& h : trace.rays[p].hits) {
      field.F[h.voxel] += h.weight * c;
      field.W[h.voxel] += h.weight;
    }
  }
}

inline GroupField lift_masks(const VoxelScene& scene, const CameraView& view, const InstanceMask& mask,
                             const CentroidMap& centroids, GroupField field) {
  if (field.size() != scene.size()) throw ValidationError("group field size does not match the scene");
  lift_masks(trace_view(scene, view), mask, centroids, field);
  return field;
}

/// Nearest dictionary centroid to F/W (ties -> smaller id); 0 when W = 0.
inline std::vector<std::int32_t> assign_voxel_ids(const GroupField& field, const GroupDictionary& dict) {
  if (dict.entries.empty()) throw ValidationError("group dictionary is empty");
  std::vector<std::pair<std::int32_t, Vec3>> cents;
  for (const auto& [id, e] : dict.entries) cents.emplace_back(id, e.centroid);
  std::vector<std::int32_t> ids(field.size(), 0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!(field.W[i] > 0.0)) continue;
    const Vec3 x = field.embedding(i);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, c] : cents) {
      const double d = (x - c).squaredNorm();
      if (d < best) {
        best = d;
        ids[i] = id;
      }
    }
  }
  return ids;
}

struct MatchResult {
  /// New (per-view) label -> group id; covers matched and fresh labels.
  std::map<std::int32_t, std::int32_t> new_to_group;
  std::vector<std::int32_t> fresh_ids;
  InstanceMask relabeled;
};

namespace detail {

inline std::map<std::int32_t, std::size_t> label_areas(const InstanceMask& m) {
  std::map<std::int32_t, std::size_t> a;
  for (auto l : m.data())
    if (l != 0) ++a[l];
  return a;
}

}  // namespace detail

/// Greedy IoU matching: existing ids in descending projected area each claim
/// the unclaimed new label of highest IoU if it reaches the threshold.
/// Unmatched labels with at least `min_pixels` pixels get fresh ids from
/// `next_id`; smaller ones are dropped.
inline MatchResult match_masks(const InstanceMask& m_proj, const InstanceMask& m_new,
                               double iou_match_threshold, std::int32_t& next_id,
                               int min_pixels = 1) {
  if (!m_proj.same_shape(m_new)) throw ValidationError("masks to match differ in shape");
  const auto area_e = detail::label_areas(m_proj);
  const auto area_n = detail::label_areas(m_new);
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> inter;
  for (std::size_t p = 0; p < m_new.pixel_count(); ++p)
    if (m_proj.at(p) != 0 && m_new.at(p) != 0) ++inter[{m_proj.at(p), m_new.at(p)}];

  std::vector<std::pair<std::int32_t, std::size_t>> existing(area_e.begin(), area_e.end());
  std::stable_sort(existing.begin(), existing.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  MatchResult out;
  std::set<std::int32_t> claimed;
  for (const auto& [e, ae] : existing) {
    std::int32_t best = 0;
    double best_iou = -1.0;
    for (auto it = inter.lower_bound({e, std::numeric_limits<std::int32_t>::min()});
         it != inter.end() && it->first.first == e; ++it) {
      const auto n = it->first.second;
      if (claimed.count(n)) continue;
      const double iou = static_cast<double>(it->second) /
                         static_cast<double>(ae + area_n.at(n) - it->second);
      if (iou > best_iou) {
        best_iou = iou;
        best = n;
      }
    }
    if (best != 0 && best_iou >= iou_match_threshold) {
      claimed.insert(best);
      out.new_to_group[best] = e;
    }
  }
  for (const auto& [n, an] : area_n) {
    if (claimed.count(n) || an < static_cast<std::size_t>(std::max(1, min_pixels))) continue;
    out.new_to_group[n] = next_id;
    out.fresh_ids.push_back(next_id++);
  }
  out.relabeled = InstanceMask(m_new.width(), m_new.height());
  for (std::size_t p = 0; p < m_new.pixel_count(); ++p) {
    auto it = out.new_to_group.find(m_new.at(p));
    out.relabeled.at(p) = it == out.new_to_group.end() ? 0 : it->second;
  }
  return out;
}

/// Merged id -> surviving id.
using AliasTable = std::map<std::int32_t, std::int32_t>;

struct MergeSet {
  /// (from, to) with `to` a surviving root; sorted by `from`.
  std::vector<std::pair<std::int32_t, std::int32_t>> merges;
  bool empty() const { return merges.empty(); }
};

struct MergePrompts {
  std::vector<PointPrompt> points;
  MaskPrompt mask;
};

/// Positive points sampled inside the group's projection, negatives at the
/// center pixels of other visible groups; mask prompt +20 on the group, -20 on
/// other groups, 0 elsewhere.
inline MergePrompts build_merge_prompts(const InstanceMask& m_proj, std::int32_t group,
                                        const std::vector<std::int32_t>& others_by_area,
                                        const GroupingConfig& config, Stream& rng) {
  MergePrompts out{{}, MaskPrompt(m_proj.width(), m_proj.height())};
  std::vector<std::size_t> pix;
  std::set<std::int32_t> others(others_by_area.begin(), others_by_area.end());
  for (std::size_t p = 0; p < m_proj.pixel_count(); ++p) {
    const auto l = m_proj.at(p);
    if (l == group) {
      pix.push_back(p);
      out.mask.values[p] = MaskPrompt::kPositive;
    } else if (others.count(l)) {
      out.mask.values[p] = MaskPrompt::kNegative;
    }
  }
  const int w = m_proj.width();
  const std::size_t n_pos = std::min<std::size_t>(config.positive_prompts, pix.size());
  std::vector<std::size_t> chosen = pix;
  // Partial Fisher-Yates: first n_pos entries are a uniform sample without replacement.
  for (std::size_t k = 0; k < n_pos; ++k)
    std::swap(chosen[k], chosen[k + rng.below(chosen.size() - k)]);
  for (std::size_t k = 0; k < n_pos; ++k)
    out.points.push_back({static_cast<int>(chosen[k] % w), static_cast<int>(chosen[k] / w),
                          PromptLabel::positive});

  int n_neg = 0;
  for (auto o : others_by_area) {
    if (n_neg >= config.max_negative_prompts) break;
    double cu = 0.0, cv = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < m_proj.pixel_count(); ++p)
      if (m_proj.at(p) == o) {
        cu += static_cast<double>(p % w);
        cv += static_cast<double>(p / w);
        ++n;
      }
    if (n == 0) continue;
    cu /= n;
    cv /= n;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < m_proj.pixel_count(); ++p)
      if (m_proj.at(p) == o) {
        const double du = static_cast<double>(p % w) - cu, dv = static_cast<double>(p / w) - cv;
        if (du * du + dv * dv < best_d) {
          best_d = du * du + dv * dv;
          best = p;
        }
      }
    out.points.push_back({static_cast<int>(best % w), static_cast<int>(best / w), PromptLabel::negative});
    ++n_neg;
  }
  return out;
}

/// Re-prompts the segmenter once per visible group of `m_proj`. Group a is
/// merged with b when a's prompted mask lies at least
/// `containment_merge_threshold` inside b's projection united with b's own
/// prompted mask; the smaller projection merges into the larger.
inline MergeSet merge_step(const InstanceMask& m_proj, const ColorImage& image, std::size_t view_index,
                           const Segmenter& segmenter, const GroupingConfig& config) {
  auto areas = detail::label_areas(m_proj);
  std::vector<std::pair<std::int32_t, std::size_t>> visible;
  for (const auto& [id, a] : areas)
    if (a >= static_cast<std::size_t>(config.min_instance_pixels)) visible.emplace_back(id, a);
  std::stable_sort(visible.begin(), visible.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  MergeSet out;
  if (visible.size() < 2) return out;

  std::map<std::int32_t, BinaryMask> prompted;
  for (const auto& [g, area] : visible) {
    std::vector<std::int32_t> others;
    for (const auto& [o, a] : visible)
      if (o != g) others.push_back(o);
    Stream rng(config.seed, "merge-prompts", (static_cast<std::uint64_t>(view_index) << 32) ^
                                                 static_cast<std::uint32_t>(g));
    const auto prompts = build_merge_prompts(m_proj, g, others, config, rng);
    auto res = segmenter.segment_prompted(image, view_index, prompts.points, prompts.mask);
    if (!res.no_object && count_nonzero(res.mask) > 0) prompted.emplace(g, std::move(res.mask));
  }

  // Union-find; each root is its component's member with the largest projection.
  std::map<std::int32_t, std::int32_t> parent;
  for (const auto& [g, a] : visible) parent[g] = g;
  std::function<std::int32_t(std::int32_t)> find = [&](std::int32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto larger = [&](std::int32_t a, std::int32_t b) {
    return areas.at(a) != areas.at(b) ? areas.at(a) > areas.at(b) : a < b;
  };

  for (const auto& [a, area_a] : visible) {
    auto ra = prompted.find(a);
    if (ra == prompted.end()) continue;
    const std::size_t n_a = count_nonzero(ra->second);
    for (const auto& [b, area_b] : visible) {
      if (a == b) continue;
      auto rb = prompted.find(b);
      std::size_t inside = 0;
      for (std::size_t p = 0; p < m_proj.pixel_count(); ++p)
        if (ra->second.at(p) && (m_proj.at(p) == b || (rb != prompted.end() && rb->second.at(p))))
          ++inside;
      if (static_cast<double>(inside) < config.containment_merge_threshold * static_cast<double>(n_a))
        continue;
      const auto x = find(a), y = find(b);
      if (x == y) continue;
      if (larger(x, y))
        parent[y] = x;
      else
        parent[x] = y;
    }
  }
  for (const auto& [g, a] : visible)
    if (find(g) != g) out.merges.emplace_back(g, find(g));
  std::sort(out.merges.begin(), out.merges.end());
  return out;
}

inline MergeSet merge_step(const VoxelScene& scene, const CameraView& view, std::size_t view_index,
                           std::span<const std::int32_t> voxel_ids, const Segmenter& segmenter,
                           const GroupingConfig& config) {
  const auto trace = trace_view(scene, view);
  return merge_step(render_group_ids(trace, voxel_ids, config.tau_bg), render_color(scene, trace),
                    view_index, segmenter, config);
}

inline std::int32_t resolve_alias(const AliasTable& aliases, std::int32_t id) {
  for (auto it = aliases.find(id); it != aliases.end(); it = aliases.find(id)) id = it->second;
  return id;
}

/// Folds merged entries into their survivors (support-weighted centroid) and
/// records the aliases.
inline void apply_merges(const MergeSet& merges, GroupDictionary& dict, AliasTable& aliases) {
  for (const auto& [from, to] : merges.merges) {
    auto it = dict.entries.find(from);
    if (it != dict.entries.end()) {
      const GroupEntry e = it->second;
      dict.entries.erase(it);
      dict.observe(to, e.centroid, e.support);
    }
    aliases[from] = to;
  }
  for (auto& [from, to] : aliases) to = resolve_alias(aliases, to);
}

struct GroupingResult {
  GroupField field;
  GroupDictionary dictionary;
  std::vector<std::int32_t> voxel_ids;
  AliasTable aliases;
  /// Indices (into the input views) that were processed.
  std::vector<std::size_t> processed_views;
  /// Relabeled (group-id) masks per processed view, when requested.
  std::vector<InstanceMask> view_masks;
  std::size_t merges_applied = 0;
};

/// Uniform subsampling with stride ceil(K / max_views).
inline std::vector<std::size_t> subsample_views(std::size_t n_views, int max_views) {
  const std::size_t stride = (n_views + max_views - 1) / static_cast<std::size_t>(max_views);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_views; i += std::max<std::size_t>(1, stride)) out.push_back(i);
  return out;
}

inline GroupingResult run_grouping(const VoxelScene& scene, const std::vector<CameraView>& views,
                                   const Segmenter& segmenter, const GroupingConfig& config,
                                   bool keep_view_masks = false) {
  config.validate();
  scene.validate();
  if (views.empty()) throw ValidationError("run_grouping needs at least one view");
  GroupingResult out;
  out.field = GroupField(scene.size());
  out.processed_views = subsample_views(views.size(), config.max_views);
  const RayTracer tracer(scene);

  for (std::size_t t = 0; t < out.processed_views.size(); ++t) {
    const std::size_t vi = out.processed_views[t];
    const ViewTrace trace = trace_view(tracer, views[vi]);
    const ColorImage image = render_color(scene, trace);
    const InstanceMask m_new = segmenter.segment(image, vi);
    if (m_new.width() != trace.width || m_new.height() != trace.height)
      throw ValidationError("segmenter returned a mask of the wrong size");
    const PointMap pmap = render_point_map(scene, trace, config.tau_bg);

    InstanceMask relabeled;
    if (t == 0) {
      const auto first = compute_instance_centroids(m_new, pmap, config.min_instance_pixels);
      if (first.empty()) throw ValidationError("no instances in first view");
      std::map<std::int32_t, std::int32_t> remap;
      for (const auto& [k, c] : first) remap[k] = out.dictionary.allocate();
      relabeled = InstanceMask(m_new.width(), m_new.height());
      for (std::size_t p = 0; p < m_new.pixel_count(); ++p) {
        auto it = remap.find(m_new.at(p));
        relabeled.at(p) = it == remap.end() ? 0 : it->second;
      }
    } else {
      const auto ids = assign_voxel_ids(out.field, out.dictionary);
      const InstanceMask m_proj = render_group_ids(trace, ids, config.tau_bg);
      auto match = match_masks(m_proj, m_new, config.iou_match_threshold, out.dictionary.next_id,
                               config.min_instance_pixels);
      relabeled = std::move(match.relabeled);
      if (config.enable_merge && t % static_cast<std::size_t>(config.merge_every) == 0) {
        try {
          const auto merges = merge_step(m_proj, image, vi, segmenter, config);
          apply_merges(merges, out.dictionary, out.aliases);
          out.merges_applied += merges.merges.size();
          if (!merges.empty())
            for (auto& l : relabeled.data()) l = resolve_alias(out.aliases, l);
        } catch (const Error& e) {
          warn(std::string("merge step skipped at view ") + views[vi].name + ": " + e.what());
        }
      }
    }

    const auto centroids = compute_instance_centroids(relabeled, pmap, config.min_instance_pixels);
    for (const auto& [id, c] : centroids)
      out.dictionary.observe(id, c.position, static_cast<double>(c.pixels));
    lift_masks(trace, relabeled, centroids, out.field);
    if (keep_view_masks) out.view_masks.push_back(std::move(relabeled));
  }
  out.voxel_ids = assign_voxel_ids(out.field, out.dictionary);
  return out;
}

// Dictionary persistence (OVX header meta).

inline nlohmann::json dictionary_to_json(const GroupDictionary& dict, const AliasTable& aliases) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& [id, e] : dict.entries)
    groups.push_back({{"id", id},
                      {"centroid", {e.centroid.x(), e.centroid.y(), e.centroid.z()}},
                      {"support", e.support}});
  nlohmann::json al = nlohmann::json::array();
  for (const auto& [from, to] : aliases) al.push_back({from, to});
  return {{"groups", groups}, {"next_id", dict.next_id}, {"aliases", al}};
}

inline GroupDictionary dictionary_from_json(const nlohmann::json& j, AliasTable* aliases = nullptr) {
  GroupDictionary dict;
  try {
    for (const auto& g : j.at("groups")) {
      const auto c = g.at("centroid").get<std::vector<double>>();
      if (c.size() != 3) throw LoadError("group_dictionary", "centroid must have 3 entries");
      const Vec3 centroid(c[0], c[1], c[2]);
      const double support = g.at("support").get<double>();
      if (!centroid.allFinite() || !(support > 0.0))
        throw LoadError("group_dictionary", "centroids must be finite and support positive");
      const auto id = g.at("id").get<std::int32_t>();
      if (id < 1 || !dict.entries.emplace(id, GroupEntry{centroid, support}).second)
        throw LoadError("group_dictionary", "group ids must be >= 1 and unique");
    }
    dict.next_id = j.at("next_id").get<std::int32_t>();
    if (aliases)
      for (const auto& a : j.value("aliases", nlohmann::json::array()))
        (*aliases)[a.at(0).get<std::int32_t>()] = a.at(1).get<std::int32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("group_dictionary", e.what());
  }
  return dict;
}

}  // namespace openvoxel
