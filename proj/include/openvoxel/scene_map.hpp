// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scene map construction: per-group frame sampling, visual prompting, caption
// canonicalization, and the persisted JSON map.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "openvoxel/clients.hpp"
#include "openvoxel/contracts.hpp"
#include "openvoxel/grouping.hpp"
#include "openvoxel/log.hpp"
#include "openvoxel/render.hpp"

namespace openvoxel {

class InvisibleGroup : public ValidationError {
 public:
  explicit InvisibleGroup(std::int32_t id)
      : ValidationError("InvisibleGroup: group " + std::to_string(id) + " is not visible in any view"), id_(id) {}
  std::int32_t id() const { return id_; }

 private:
  std::int32_t id_;
};

/// Per-view renders shared by every group of a scene.
struct ViewRenders {
  std::vector<ColorImage> colors;
  std::vector<InstanceMask> id_maps;

  ViewRenders(const VoxelScene& scene, const std::vector<CameraView>& views,
              std::span<const std::int32_t> voxel_ids, double tau_bg) {
    const RayTracer tracer(scene);
    for (const auto& v : views) {
      const auto trace = trace_view(tracer, v);
      colors.push_back(render_color(scene, trace));
      id_maps.push_back(render_group_ids(trace, voxel_ids, tau_bg));
    }
  }

  /// Visible (id-map) pixel count of `id` per view.
  std::vector<std::size_t> visible_area(std::int32_t id) const {
    std::vector<std::size_t> out;
    for (const auto& m : id_maps) out.push_back(static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), id)));
    return out;
  }
};

/// Up to k views ranked by the group's visible area (ties -> view order),
/// with masks from render_group_mask, padded to k by repeating the last pair.
inline CaptionRequest sample_caption_frames(std::int32_t group_id, const VoxelScene& scene,
                                            const std::vector<CameraView>& views,
                                            std::span<const std::int32_t> voxel_ids, const ViewRenders& renders,
                                            std::size_t k = kCaptionFrames, double tau_mask = 0.5) {
  const auto area = renders.visible_area(group_id);
  std::vector<std::size_t> order(views.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return area[a] > area[b]; });
  CaptionRequest req;
  const std::set<std::int32_t> sel = {group_id};
  for (auto vi : order) {
    if (req.frames.size() >= k || area[vi] == 0) break;
    auto mask = render_group_mask(scene, views[vi], sel, voxel_ids, tau_mask);
    if (count_nonzero(mask) == 0) continue;
    req.frames.push_back({renders.colors[vi], std::move(mask), vi});
  }
  if (req.frames.empty()) throw InvisibleGroup(group_id);
  req.pad_to(k);
  return req;
}

inline CaptionRequest sample_caption_frames(std::int32_t group_id, const VoxelScene& scene,
                                            const std::vector<CameraView>& views,
                                            std::span<const std::int32_t> voxel_ids, std::size_t k = kCaptionFrames,
                                            double tau = 0.5) {
  return sample_caption_frames(group_id, scene, views, voxel_ids, ViewRenders(scene, views, voxel_ids, tau), k, tau);
}

struct VisualPromptStyle {
  float darken = 0.3f;
  /// Dot radius as a fraction of the image diagonal (at least 2 px).
  double dot_fraction = 0.01;
};

/// Pixel holding the red dot: the mask centroid, or the mask pixel nearest to
/// it when the centroid pixel is outside the mask (ties -> scan order).
inline std::pair<int, int> visual_prompt_anchor(const BinaryMask& mask) {
  double su = 0.0, sv = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < mask.height(); ++v)
    for (int u = 0; u < mask.width(); ++u)
      if (mask(u, v)) {
        su += u;
        sv += v;
        ++n;
      }
  if (n == 0) throw ValidationError("visual prompt needs a non-empty mask");
  const double cu = su / n, cv = sv / n;
  const int ru = static_cast<int>(std::lround(cu)), rv = static_cast<int>(std::lround(cv));
  if (mask(ru, rv)) return {ru, rv};
  std::pair<int, int> best{0, 0};
  double best_d = std::numeric_limits<double>::infinity();
  for (int v = 0; v < mask.height(); ++v)
    for (int u = 0; u < mask.width(); ++u)
      if (mask(u, v)) {
        const double d = (u - cu) * (u - cu) + (v - cv) * (v - cv);
        if (d < best_d) {
          best_d = d;
          best = {u, v};
        }
      }
  return best;
}

inline ColorImage build_visual_prompt(const ColorImage& image, const BinaryMask& mask, const VisualPromptStyle& style = {}) {
  if (image.width() != mask.width() || image.height() != mask.height())
    throw ValidationError("visual prompt image and mask differ in size");
  const auto [au, av] = visual_prompt_anchor(mask);
  ColorImage out = image;
  for (int v = 0; v < image.height(); ++v)
    for (int u = 0; u < image.width(); ++u)
      if (!mask(u, v))
        for (int c = 0; c < 3; ++c) out(u, v, c) *= style.darken;
  const double r = std::max(2.0, style.dot_fraction * std::hypot(double(image.width()), double(image.height())));
  const int ri = static_cast<int>(std::ceil(r));
  for (int v = av - ri; v <= av + ri; ++v)
    for (int u = au - ri; u <= au + ri; ++u) {
      if (u < 0 || v < 0 || u >= image.width() || v >= image.height()) continue;
      if ((u - au) * (u - au) + (v - av) * (v - av) > r * r) continue;
      out(u, v, 0) = 1.0f;
      out(u, v, 1) = 0.0f;
      out(u, v, 2) = 0.0f;
    }
  return out;
}

struct CanonicalCaption {
  std::string text;
  bool flagged = false;
  std::vector<std::string> warnings;
};

/// Replaces a generic leading phrase with the most frequent content word of
/// the raw caption (ties -> first occurrence).
inline std::string repair_caption(const std::string& reply, const std::string& raw) {
  std::string line;
  std::istringstream is(reply);
  for (std::string l; std::getline(is, l);)
    if (!trim(l).empty() && trim(l).front() != '{' && trim(l).rfind("```", 0) != 0) {
      line = trim(l);
      break;
    }
  if (line.empty()) line = raw;
  line = normalize_space(line);
  if (!line.empty() && line.back() == '.') line.pop_back();

  std::map<std::string, int> freq;
  std::vector<std::string> first_seen;
  for (const auto& t : tokenize(raw)) {
    if (detail::stop_words().count(t) || forbidden_subject_nouns().count(t)) continue;
    if (freq[t]++ == 0) first_seen.push_back(t);
  }
  std::string noun = "unidentified";
  int best = 0;
  for (const auto& t : first_seen)
    if (freq[t] > best) {
      best = freq[t];
      noun = t;
    }

  std::vector<std::string> phrases;
  for (auto& p : split_phrases(line))
    if (!p.empty()) phrases.push_back(p);
  if (phrases.empty() || has_forbidden_subject(phrases.front()) || leading_noun(phrases.front()).empty())
    phrases.empty() ? phrases.push_back(noun)
                    : void(phrases.front() = (is_background_caption(phrases.front()) ? "background: " : "") + noun);
  std::string out;
  for (const auto& p : phrases) out += (out.empty() ? "" : ", ") + p;
  try {
    return parse_caption_line(out).text;
  } catch (const ContractError&) {
    return noun;
  }
}

/// Rewrites a raw caption through the canonical-captioning prompt; one retry,
/// then a mechanical repair with the entry flagged.
inline CanonicalCaption canonicalize_caption(const std::string& raw_caption, const std::vector<ColorImage>& prompted_frames,
                                             const ChatClient& chat) {
  if (trim(raw_caption).empty()) throw ValidationError("raw caption is empty");
  ChatRequest req{std::string(prompts::kCanonicalCaptionPrompt), {}};
  for (const auto& f : prompted_frames) req.parts.push_back(ChatPart::of_image(f));
  req.parts.push_back(ChatPart::of_text(std::string(kPartCaption) + raw_caption));
  std::string reply;
  for (int attempt = 0; attempt < 2; ++attempt) {
    reply = chat.chat(req);
    try {
      auto line = parse_caption_line(reply);
      return {line.text, false, line.warnings};
    } catch (const ContractError& e) {
      warn(std::string("canonical caption rejected (") + e.name() + "): " + trim(reply).substr(0, 120));
    }
  }
  return {repair_caption(reply, raw_caption), true, {"caption repaired after two rejected replies"}};
}

struct SceneMapConfig {
  std::string scene_name = "scene";
  int min_instance_pixels = 16;
  double tau = 0.5;
  std::size_t frames = kCaptionFrames;
  VisualPromptStyle style;
};

/// One entry per dictionary group with enough visible support, ascending by id.
inline SceneMap build_scene_map(const VoxelScene& scene, const GroupDictionary& dictionary,
                                std::span<const std::int32_t> voxel_ids, const std::vector<CameraView>& views,
                                const Captioner& captioner, const ChatClient& chat, const SceneMapConfig& config = {}) {
  if (voxel_ids.size() != scene.size()) throw ValidationError("voxel id count does not match the scene");
  const ViewRenders renders(scene, views, voxel_ids, config.tau);
  std::map<std::int32_t, std::int64_t> voxel_count;
  for (auto id : voxel_ids)
    if (id != 0) ++voxel_count[id];

  SceneMap map{config.scene_name, {}};
  for (const auto& [id, entry] : dictionary.entries) {
    std::size_t support = 0;
    for (auto a : renders.visible_area(id)) support += a;
    if (support < static_cast<std::size_t>(config.min_instance_pixels)) continue;
    SceneMapEntry e{id, entry.centroid, "", voxel_count[id], false};
    try {
      auto req = sample_caption_frames(id, scene, views, voxel_ids, renders, config.frames, config.tau);
      const std::string raw = captioner.caption(req);
      std::vector<ColorImage> prompted;
      for (const auto& f : req.frames) prompted.push_back(build_visual_prompt(f.image, f.mask, config.style));
      auto canon = canonicalize_caption(raw, prompted, chat);
      e.caption = canon.text;
      e.flagged = canon.flagged;
    } catch (const TransportError&) {
      throw;
    } catch (const Error& err) {
      warn("group " + std::to_string(id) + ": " + err.what());
      e.caption = "unidentified, caption unavailable";
      e.flagged = true;
    }
    map.entries.push_back(std::move(e));
  }
  return map;
}

inline std::string scene_map_text(const SceneMap& m) { return scene_map_to_json(m).dump(2) + "\n"; }

inline void save_scene_map(const SceneMap& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  os << scene_map_text(m);
}

inline SceneMap scene_map_from_text(const std::string& text) {
  SceneMap m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.scene_name = j.at("scene_name").get<std::string>();
    std::set<std::int32_t> ids;
    for (const auto& g : j.at("groups")) {
      SceneMapEntry e;
      e.id = g.at("id").get<std::int32_t>();
      const auto c = g.at("center").get<std::vector<double>>();
      if (c.size() != 3) throw LoadError("scene_map", "center must have 3 entries");
      e.center = Vec3(c[0], c[1], c[2]);
      if (!e.center.allFinite()) throw LoadError("scene_map", "center must be finite");
      e.caption = g.at("caption").get<std::string>();
      e.voxel_count = g.at("voxel_count").get<std::int64_t>();
      e.flagged = g.at("flagged").get<bool>();
      if (e.id < 1) throw LoadError("scene_map", "group ids must be >= 1");
      if (e.voxel_count < 0) throw LoadError("scene_map", "voxel_count must be non-negative");
      if (!ids.insert(e.id).second) throw LoadError("scene_map", "duplicate group id " + std::to_string(e.id));
      if (trim(e.caption).empty()) throw LoadError("scene_map", "group " + std::to_string(e.id) + " has no caption");
      if (has_forbidden_subject(e.caption) && !e.flagged) {
        warn("scene map group " + std::to_string(e.id) + " caption has a generic leading noun; flagged");
        e.flagged = true;
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError("scene_map", ex.what());
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return m;
}

inline SceneMap load_scene_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("scene_map", "cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return scene_map_from_text(ss.str());
}

}  // namespace openvoxel
