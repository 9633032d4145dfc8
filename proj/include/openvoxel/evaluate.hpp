// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Query benchmark: query-set files, per-item scoring, and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "openvoxel/codec.hpp"
#include "openvoxel/metrics.hpp"
#include "openvoxel/query.hpp"
#include "openvoxel/rng.hpp"
#include "openvoxel/synth.hpp"

namespace openvoxel {

struct QueryItem {
  std::string query;
  std::string view;
  BinaryMask gt_mask;
  /// File name of the mask when the item came from or goes to disk.
  std::string gt_mask_path;
};

struct QueryScore {
  std::size_t index = 0;
  std::string query;
  std::string view;
  double iou = 0.0;
  double biou = 0.0;
  std::string canonical_query;
  std::vector<std::int32_t> ids;
  std::string note;
};

struct EvalReport {
  std::vector<QueryScore> per_query;
  double miou = 0.0;
  double mbiou = 0.0;
};

struct EvalConfig {
  double tau_mask = 0.5;
  /// Fraction of the image diagonal used as the boundary band width.
  double boundary_fraction = 0.02;
  bool query_image = true;
};

inline EvalReport evaluate_queries(const VoxelScene& scene, std::span<const std::int32_t> voxel_ids,
                                   const SceneMap& map, const std::vector<CameraView>& views,
                                   const std::vector<QueryItem>& items, const ChatClient& chat,
                                   const EvalConfig& config = {}) {
  if (items.empty()) throw ValidationError("query set is empty");
  EvalReport rep;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    QueryScore s{i, it.query, it.view, 0.0, 0.0, "", {}, ""};
    try {
      const auto& view = views.at(find_view(views, it.view));
      if (it.gt_mask.width() != view.width || it.gt_mask.height() != view.height)
        throw ValidationError("gt mask size does not match view " + view.name);
      const auto ans =
          answer_query(scene, voxel_ids, map, make_query_request(scene, view, it.query, config.query_image), chat,
                       config.tau_mask);
      s.canonical_query = ans.canonical_query;
      s.ids = ans.ids;
      s.iou = iou(ans.mask, it.gt_mask);
      s.biou = boundary_iou(ans.mask, it.gt_mask, boundary_width(view.width, view.height, config.boundary_fraction));
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      s.iou = s.biou = 0.0;
      s.note = e.what();
      warn("query " + std::to_string(i) + " failed: " + e.what());
    }
    rep.miou += s.iou;
    rep.mbiou += s.biou;
    rep.per_query.push_back(std::move(s));
  }
  rep.miou /= static_cast<double>(rep.per_query.size());
  rep.mbiou /= static_cast<double>(rep.per_query.size());
  return rep;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["miou"] = r.miou;
  j["mbiou"] = r.mbiou;
  j["per_query"] = nlohmann::ordered_json::array();
  for (const auto& s : r.per_query) {
    nlohmann::ordered_json q;
    q["index"] = s.index;
    q["query"] = s.query;
    q["view"] = s.view;
    q["iou"] = s.iou;
    q["biou"] = s.biou;
    q["canonical_query"] = s.canonical_query;
    q["ids"] = s.ids;
    if (!s.note.empty()) q["note"] = s.note;
    j["per_query"].push_back(std::move(q));
  }
  return j;
}

inline std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %-8s %7s %7s  %s\n", "#", "view", "IoU", "BIoU", "query");
  os << buf;
  for (const auto& s : r.per_query) {
    std::snprintf(buf, sizeof buf, "%-4zu %-8s %7.4f %7.4f  ", s.index, s.view.c_str(), s.iou, s.biou);
    os << buf << s.query;
    if (!s.note.empty()) os << "  [" << s.note << "]";
    os << '\n';
  }
  std::snprintf(buf, sizeof buf, "mean %-8s %7.4f %7.4f  (%zu queries)\n", "", r.miou, r.mbiou, r.per_query.size());
  os << buf;
  return os.str();
}

inline void save_report(const EvalReport& r, const std::filesystem::path& json_path,
                        const std::filesystem::path& text_path) {
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw ValidationError("cannot write " + json_path.string());
  js << report_to_json(r).dump(2) << '\n';
  std::ofstream ts(text_path, std::ios::binary);
  if (!ts) throw ValidationError("cannot write " + text_path.string());
  ts << report_table(r);
}

/// Query-set file: [{"query", "view", "gt_mask"}] with mask paths relative to
/// the file's directory.
inline std::vector<QueryItem> load_query_set(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("queries", "cannot open " + path.string());
  std::vector<QueryItem> out;
  try {
    const auto j = nlohmann::json::parse(is);
    if (!j.is_array()) throw LoadError("queries", "query set must be a JSON array");
    for (const auto& e : j) {
      QueryItem it;
      it.query = e.at("query").get<std::string>();
      it.view = e.at("view").get<std::string>();
      it.gt_mask_path = e.at("gt_mask").get<std::string>();
      const auto m = decode_mask_png(read_file((path.parent_path() / it.gt_mask_path).string()));
      it.gt_mask = BinaryMask(m.width(), m.height());
      for (std::size_t p = 0; p < m.pixel_count(); ++p) it.gt_mask.at(p) = m.at(p) != 0;
      out.push_back(std::move(it));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("queries", e.what());
  }
  return out;
}

/// Writes the masks next to `path` (names from gt_mask_path, or q<i>.png).
inline void save_query_set(std::vector<QueryItem> items, const std::filesystem::path& path) {
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& it = items[i];
    if (it.gt_mask_path.empty()) it.gt_mask_path = "gt_q" + std::to_string(i) + ".png";
    write_file((dir / it.gt_mask_path).string(), encode_binary_png8(it.gt_mask));
    nlohmann::ordered_json e;
    e["query"] = it.query;
    e["view"] = it.view;
    e["gt_mask"] = it.gt_mask_path;
    j.push_back(std::move(e));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

struct QuerySetConfig {
  int n_queries = 10;
  /// Minimum visible (modal) pixels for a view to host a query.
  int min_visible_pixels = 16;
  /// Probability that the query text carries the object's placement.
  double placement_prob = 0.5;
  double tau = 0.5;
  std::uint64_t seed = 0;
};

/// Category queries over the non-ground objects in round-robin order, each
/// posed in a random view where the object is visible. Ground truth is the
/// object's full (amodal) rendered mask, the same quantity the query layer
/// rasterizes.
inline std::vector<QueryItem> generate_query_set(const VoxelScene& scene, const std::vector<ObjectRecord>& objects,
                                                 const std::vector<CameraView>& views,
                                                 const QuerySetConfig& config = {}) {
  if (!scene.gt_labels) throw ValidationError("query generation needs gt_labels");
  std::vector<const ObjectRecord*> targets;
  for (const auto& o : objects)
    if (o.gt_id != kGroundGtId) targets.push_back(&o);
  if (targets.empty() || config.n_queries < 1) throw ValidationError("no objects to query");
  const auto modal = render_gt_masks(scene, views, config.tau);
  Stream rng(config.seed, "queries");
  std::vector<QueryItem> out;
  for (int q = 0; q < config.n_queries; ++q) {
    const auto& o = *targets[static_cast<std::size_t>(q) % targets.size()];
    std::vector<std::size_t> ok;
    for (std::size_t v = 0; v < views.size(); ++v)
      if (std::count(modal[v].data().begin(), modal[v].data().end(), o.gt_id) >= config.min_visible_pixels)
        ok.push_back(v);
    const bool with_place = rng.bernoulli(config.placement_prob);
    if (ok.empty()) continue;
    const auto vi = ok[rng.below(ok.size())];
    QueryItem it;
    it.query = o.color_name + " " + o.category + (with_place ? " " + o.placement : std::string());
    it.view = views[vi].name;
    it.gt_mask = render_group_mask(scene, views[vi], {o.gt_id}, *scene.gt_labels, config.tau);
    out.push_back(std::move(it));
  }
  if (out.empty()) throw ValidationError("no object is visible enough to query");
  return out;
}

}  // namespace openvoxel
