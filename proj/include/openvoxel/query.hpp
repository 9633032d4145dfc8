// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "openvoxel/clients.hpp"
#include "openvoxel/codec.hpp"
#include "openvoxel/contracts.hpp"
#include "openvoxel/log.hpp"
#include "openvoxel/render.hpp"

namespace openvoxel {

struct QueryRequest {
  std::string text;
  CameraView target_view;
  std::optional<ColorImage> query_image;

  void validate() const {
    if (trim(text).empty()) throw ValidationError("query text must not be empty");
    target_view.validate();
  }
};

/// Request whose query image is the color render of the target view.
inline QueryRequest make_query_request(const VoxelScene& scene, const CameraView& view, std::string text,
                                       bool with_image = true) {
  QueryRequest req{std::move(text), view, std::nullopt};
  if (with_image) req.query_image = render_color(scene, view);
  return req;
}

struct QueryAnswer {
  BinaryMask mask;
  std::vector<std::int32_t> ids;
  std::vector<std::string> captions;
  std::vector<std::int32_t> candidates;
  std::string canonical_query;
};

inline std::string refine_query(const QueryRequest& req, const SceneMap& map, const ChatClient& chat) {
  req.validate();
  ChatRequest c{std::string(prompts::kQueryRefinePrompt), {}};
  c.parts.push_back(ChatPart::of_text(std::string(kPartSceneMap) + scene_map_prompt_json(map)));
  c.parts.push_back(ChatPart::of_text(std::string(kPartQuery) + req.text));
  if (req.query_image) c.parts.push_back(ChatPart::of_image(*req.query_image));
  for (int attempt = 0;; ++attempt) {
    const std::string reply = chat.chat(c);
    try {
      return parse_canonical(reply);
    } catch (const ContractError& e) {
      if (attempt == 1) throw;
      warn(std::string("query refinement rejected (") + e.name() + "), retrying");
    }
  }
}

inline RetrievalResult retrieve(const SceneMap& map, const std::string& canonical,
                                const std::optional<ColorImage>& query_image, const ChatClient& chat) {
  if (map.entries.empty()) throw ValidationError("retrieval over an empty scene map");
  if (trim(canonical).empty()) throw ValidationError("canonical query must not be empty");
  ChatRequest c{std::string(prompts::kRetrievePrompt), {}};
  c.parts.push_back(ChatPart::of_text(std::string(kPartSceneMap) + scene_map_prompt_json(map)));
  c.parts.push_back(ChatPart::of_text(std::string(kPartCanonical) + canonical));
  if (query_image) c.parts.push_back(ChatPart::of_image(*query_image));
  return parse_retrieval(chat.chat(c), map);
}

/// Refine, retrieve, then rasterize only the returned groups in the target view.
inline QueryAnswer answer_query(const VoxelScene& scene, std::span<const std::int32_t> voxel_ids, const SceneMap& map,
                                const QueryRequest& req, const ChatClient& chat, double tau_mask = 0.5) {
  QueryAnswer a;
  a.canonical_query = refine_query(req, map, chat);
  auto r = retrieve(map, a.canonical_query, req.query_image, chat);
  a.ids = r.ids;
  a.captions = r.captions;
  if (r.candidates) a.candidates = *r.candidates;
  const std::set<std::int32_t> sel(a.ids.begin(), a.ids.end());
  a.mask = render_group_mask(scene, req.target_view, sel, voxel_ids, tau_mask);
  if (count_nonzero(a.mask) == 0)
    warn("query \"" + req.text + "\": retrieved groups are not visible in view " + req.target_view.name);
  return a;
}

inline nlohmann::ordered_json answer_to_json(const QueryAnswer& a) {
  nlohmann::ordered_json j;
  j["canonical_query"] = a.canonical_query;
  j["ids"] = a.ids;
  j["captions"] = a.captions;
  if (!a.candidates.empty()) j["candidates"] = a.candidates;
  return j;
}

/// Mask blended at 0.5 alpha in red onto the color render.
inline ColorImage answer_overlay(const ColorImage& color, const BinaryMask& mask, float alpha = 0.5f) {
  if (color.width() != mask.width() || color.height() != mask.height())
    throw ValidationError("overlay image and mask differ in size");
  ColorImage out = color;
  const float tint[3] = {1.0f, 0.0f, 0.0f};
  for (int v = 0; v < color.height(); ++v)
    for (int u = 0; u < color.width(); ++u)
      if (mask(u, v))
        for (int c = 0; c < 3; ++c) out(u, v, c) = (1.0f - alpha) * color(u, v, c) + alpha * tint[c];
  return out;
}

/// Writes <stem>_mask.png, <stem>_overlay.png and <stem>.json into `dir`.
inline void write_answer(const QueryAnswer& a, const ColorImage& color, const std::filesystem::path& dir,
                         const std::string& stem = "answer") {
  std::filesystem::create_directories(dir);
  write_file((dir / (stem + "_mask.png")).string(), encode_binary_png8(a.mask));
  write_file((dir / (stem + "_overlay.png")).string(), encode_color_png(answer_overlay(color, a.mask)));
  std::ofstream os(dir / (stem + ".json"), std::ios::binary);
  if (!os) throw ValidationError("cannot write " + (dir / (stem + ".json")).string());
  os << answer_to_json(a).dump(2) << '\n';
}

}  // namespace openvoxel
