// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Captioner and chat-model clients: deterministic rule-based mocks and
// HTTP clients for a remote model service.

#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "openvoxel/codec.hpp"
#include "openvoxel/contracts.hpp"
#include "openvoxel/prompts.hpp"
#include "openvoxel/segmenter.hpp"
#include "openvoxel/synth.hpp"

// After Eigen: resolv.h (via httplib) defines a `_res` macro that Eigen uses as a name.
#include <httplib.h>

namespace openvoxel {

inline constexpr std::size_t kCaptionFrames = 8;

struct CaptionFrame {
  ColorImage image;
  BinaryMask mask;
  /// Index into the scene's views when the frame is a render of one.
  std::optional<std::size_t> view_index;
};

struct CaptionRequest {
  std::vector<CaptionFrame> frames;

  void validate() const {
    if (frames.empty() || frames.size() > kCaptionFrames)
      throw ValidationError("caption request needs 1 to 8 frames");
    for (const auto& f : frames) {
      if (f.image.width() != f.mask.width() || f.image.height() != f.mask.height())
        throw ValidationError("caption frame image and mask differ in size");
      if (count_nonzero(f.mask) == 0) throw ValidationError("caption frame mask is empty");
    }
  }

  /// Repeats the last pair until there are exactly `n` frames.
  void pad_to(std::size_t n = kCaptionFrames) {
    validate();
    while (frames.size() < n) frames.push_back(frames.back());
  }
};

class Captioner {
 public:
  virtual ~Captioner() = default;
  std::string caption(CaptionRequest req) const {
    req.pad_to(kCaptionFrames);
    return do_caption(req);
  }

 protected:
  virtual std::string do_caption(const CaptionRequest& padded) const = 0;
};

struct ChatPart {
  enum class Type { text, image };
  Type type = Type::text;
  std::string text;
  ColorImage image;

  static ChatPart of_text(std::string t) { return {Type::text, std::move(t), {}}; }
  static ChatPart of_image(ColorImage img) { return {Type::image, {}, std::move(img)}; }
};

struct ChatRequest {
  std::string system;
  std::vector<ChatPart> parts;

  void validate() const {
    if (system.empty()) throw ValidationError("chat request needs a system prompt");
  }

  /// Text of the first part starting with `prefix`, prefix removed.
  std::optional<std::string> field(std::string_view prefix) const {
    for (const auto& p : parts)
      if (p.type == ChatPart::Type::text && p.text.rfind(prefix, 0) == 0) return p.text.substr(prefix.size());
    return std::nullopt;
  }
};

// User-part prefixes shared by the pipeline and the mock.
inline constexpr std::string_view kPartCaption = "caption: ";
inline constexpr std::string_view kPartSceneMap = "scene_map: ";
inline constexpr std::string_view kPartQuery = "query: ";
inline constexpr std::string_view kPartCanonical = "canonical: ";

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  std::string chat(const ChatRequest& req) const {
    req.validate();
    return do_chat(req);
  }

 protected:
  virtual std::string do_chat(const ChatRequest& req) const = 0;
};

// Mocks.

/// Describes the ground-truth record owning most masked pixels with a fixed
/// template that deliberately uses "object" as its subject.
class MockCaptioner final : public Captioner {
 public:
  MockCaptioner(const VoxelScene& scene, const std::vector<CameraView>& views,
                std::vector<ObjectRecord> records, double tau_bg = 0.5)
      : gt_(render_gt_masks(scene, views, tau_bg)), records_(std::move(records)) {}

  static std::string describe(const ObjectRecord& r) {
    return "A " + r.color_name + " " + r.shape + " object, possibly a " + r.category + ", placed " + r.placement;
  }

 protected:
  std::string do_caption(const CaptionRequest& req) const override {
    std::map<int, std::size_t> votes;
    for (const auto& f : req.frames) {
      if (!f.view_index || *f.view_index >= gt_.size()) continue;
      const auto& gt = gt_[*f.view_index];
      if (gt.width() != f.mask.width() || gt.height() != f.mask.height()) continue;
      for (std::size_t p = 0; p < gt.pixel_count(); ++p)
        if (f.mask.at(p) && gt.at(p) != 0) ++votes[gt.at(p)];
    }
    int best = 0;
    std::size_t best_n = 0;
    for (const auto& [id, n] : votes)
      if (n > best_n) {
        best = id;
        best_n = n;
      }
    for (const auto& r : records_)
      if (r.gt_id == best) return describe(r);
    return "A small unidentified object";
  }

 private:
  std::vector<InstanceMask> gt_;
  std::vector<ObjectRecord> records_;
};

namespace detail {

inline const std::set<std::string>& background_nouns() {
  static const std::set<std::string> s = {"floor", "wall", "ceiling", "ground"};
  return s;
}

inline const std::set<std::string>& stop_words() {
  static const std::set<std::string> s = {"a",    "an",   "the",  "of",   "with", "and",   "or",   "on",
                                          "in",   "at",   "to",   "next", "near", "under", "placed", "possibly",
                                          "is",   "it",   "that", "this", "its",  "some",  "small", "funny"};
  return s;
}

inline std::string join(const std::vector<std::string>& toks, std::size_t from = 0,
                        std::size_t to = std::string::npos) {
  std::string out;
  for (std::size_t i = from; i < std::min(to, toks.size()); ++i) out += (out.empty() ? "" : " ") + toks[i];
  return out;
}

inline std::string shape_synonym(const std::string& t) {
  if (t == "ball" || t == "spherical" || t == "round") return "sphere";
  if (t == "cube" || t == "block" || t == "boxy") return "box";
  return t;
}

}  // namespace detail

/// Rule-based chat model; picks its behavior by exact system-prompt match.
class MockChat final : public ChatClient {
 public:
  /// Canonical caption from a mock caption; any other caption that is already
  /// canonical passes through normalized.
  static std::string canonicalize(const std::string& raw) {
    static const std::regex tmpl(R"(^A (\S+) (\S+) object, possibly an? (.+?), placed (.+)$)");
    std::smatch m;
    const std::string t = normalize_space(raw);
    if (std::regex_match(t, m, tmpl)) {
      const std::string cat = m[3], details = std::string(m[1]) + " " + std::string(m[2]), place = m[4];
      const bool bg = detail::background_nouns().count(to_lower(cat)) > 0;
      return (bg ? "background: " : "") + cat + ", " + details + ", " + place;
    }
    // Anything else keeps its words minus leading articles.
    auto toks = split_phrases(t);
    std::string head = toks.front();
    for (const char* art : {"A ", "An ", "The ", "a ", "an ", "the "})
      if (head.rfind(art, 0) == 0) head = head.substr(std::string_view(art).size());
    toks.front() = head;
    std::string out;
    for (const auto& s : toks) out += (out.empty() ? "" : ", ") + s;
    if (!out.empty() && out.back() == '.') out.pop_back();
    return out;
  }

  /// Query refinement: class noun from the map's vocabulary (or the caption
  /// that shares most tokens with the query), color and shape words from the
  /// query, placement only when the query states one.
  static std::string refine(const std::string& query, const std::vector<std::pair<std::int32_t, std::string>>& map) {
    std::vector<std::string> q;
    for (const auto& t : tokenize(query)) q.push_back(detail::shape_synonym(t));
    const std::set<std::string> qset(q.begin(), q.end());

    // Longest vocabulary noun occurring as a contiguous token run; ties go to
    // the earliest occurrence in the query.
    std::string noun;
    std::size_t noun_len = 0, noun_pos = 0;
    for (const auto& [id, cap] : map) {
      if (is_background_caption(cap)) continue;
      const auto nt = tokenize(leading_noun(cap));
      if (nt.empty() || nt.size() < noun_len) continue;
      for (std::size_t i = 0; i + nt.size() <= q.size(); ++i)
        if (std::equal(nt.begin(), nt.end(), q.begin() + static_cast<std::ptrdiff_t>(i))) {
          if (nt.size() > noun_len || i < noun_pos) {
            noun = detail::join(nt);
            noun_len = nt.size();
            noun_pos = i;
          }
          break;
        }
    }
    if (noun.empty()) {
      std::size_t best = 0;
      for (const auto& [id, cap] : map) {
        std::size_t shared = 0;
        const auto ct = tokenize(cap);
        for (const auto& t : std::set<std::string>(ct.begin(), ct.end()))
          shared += qset.count(t) && !detail::stop_words().count(t);
        if (shared > best && !has_forbidden_subject(cap)) {
          best = shared;
          noun = leading_noun(cap);
        }
      }
    }
    if (noun.empty())
      for (auto it = q.rbegin(); it != q.rend() && noun.empty(); ++it)
        if (!detail::stop_words().count(*it)) noun = *it;
    if (noun.empty()) noun = "object";

    static const std::set<std::string> colors = {"red",    "green", "blue", "yellow", "purple", "white", "pink",
                                                 "cyan",   "black", "gray", "grey",   "orange", "brown"};
    static const std::set<std::string> shapes = {"sphere", "box", "ell", "plane"};
    std::vector<std::string> details;
    for (const auto& t : q)
      if (colors.count(t) && std::find(details.begin(), details.end(), t) == details.end()) details.push_back(t);
    for (const auto& t : q)
      if (shapes.count(t) && std::find(details.begin(), details.end(), t) == details.end()) details.push_back(t);

    std::string placement;
    for (std::size_t i = 0; i < q.size() && placement.empty(); ++i) {
      std::size_t start = std::string::npos;
      if ((q[i] == "on" || q[i] == "in" || q[i] == "under") && i + 1 < q.size()) start = i;
      if (q[i] == "next" && i + 2 < q.size() && q[i + 1] == "to") start = i;
      if (start == std::string::npos) continue;
      std::vector<std::string> words;
      for (std::size_t k = start; k < q.size(); ++k)
        if (q[k] != "the" && q[k] != "a" && q[k] != "an") words.push_back(q[k]);
      placement = detail::join(words);
    }

    std::string out = noun;
    if (!details.empty()) out += ", " + detail::join(details);
    if (!placement.empty()) out += ", " + placement;
    return out;
  }

  /// Shared distinct tokens plus 2 when the leading nouns agree.
  static int retrieval_score(const std::string& canonical, const std::string& caption) {
    const auto qt = tokenize(canonical), ct = tokenize(caption);
    const std::set<std::string> qs(qt.begin(), qt.end()), cs(ct.begin(), ct.end());
    int shared = 0;
    for (const auto& t : qs) shared += cs.count(t) ? 1 : 0;
    return shared + (leading_noun(canonical) == leading_noun(caption) ? 2 : 0);
  }

  static RetrievalResult retrieve(const std::string& canonical,
                                  const std::vector<std::pair<std::int32_t, std::string>>& map) {
    if (map.empty()) throw ValidationError("retrieval over an empty scene map");
    auto sorted = map;
    std::sort(sorted.begin(), sorted.end());
    int best = -1;
    RetrievalResult r;
    for (const auto& [id, cap] : sorted) {
      const int s = retrieval_score(canonical, cap);
      if (s > best) {
        best = s;
        r.ids = {id};
        r.captions = {cap};
      }
    }
    return r;
  }

 protected:
  std::string do_chat(const ChatRequest& req) const override {
    if (req.system == prompts::kCanonicalCaptionPrompt) {
      const auto raw = req.field(kPartCaption);
      if (!raw) throw ValidationError("canonicalization request has no caption part");
      return canonicalize(*raw);
    }
    if (req.system == prompts::kQueryRefinePrompt) {
      const auto query = req.field(kPartQuery);
      if (!query) throw ValidationError("refinement request has no query part");
      nlohmann::ordered_json j;
      j["canonical"] = refine(*query, map_of(req));
      return j.dump();
    }
    if (req.system == prompts::kRetrievePrompt) {
      const auto canonical = req.field(kPartCanonical);
      if (!canonical) throw ValidationError("retrieval request has no canonical part");
      return format_retrieval(retrieve(*canonical, map_of(req)));
    }
    throw Error("mock has no rule for this prompt");
  }

 private:
  static std::vector<std::pair<std::int32_t, std::string>> map_of(const ChatRequest& req) {
    std::vector<std::pair<std::int32_t, std::string>> out;
    const auto text = req.field(kPartSceneMap);
    if (!text) return out;
    try {
      for (const auto& g : nlohmann::json::parse(*text))
        out.emplace_back(g.at("id").get<std::int32_t>(), g.at("caption").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed scene_map part: ") + e.what());
    }
    return out;
  }
};

// Remote clients.

struct RemoteConfig {
  std::string endpoint;
  double timeout_s = 60.0;
  int retries = 2;

  /// OPENVOXEL_MODEL_ENDPOINT, when `endpoint` is empty.
  std::string resolved_endpoint() const {
    if (!endpoint.empty()) return endpoint;
    if (const char* env = std::getenv("OPENVOXEL_MODEL_ENDPOINT"); env && *env) return env;
    throw ValidationError("remote clients need --endpoint or OPENVOXEL_MODEL_ENDPOINT");
  }
};

namespace detail {

inline std::string b64(const std::vector<unsigned char>& bytes) { return base64_encode(bytes); }

/// POSTs JSON, retrying transport failures and 5xx replies.
inline nlohmann::json post_json(const RemoteConfig& cfg, const std::string& path, const nlohmann::json& body) {
  const std::string endpoint = cfg.resolved_endpoint();
  httplib::Client cli(endpoint);
  if (!cli.is_valid()) throw TransportError("invalid endpoint '" + endpoint + "'");
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const std::string payload = body.dump();
  std::string last;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    auto res = cli.Post(path, payload, "application/json");
    if (!res) {
      last = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw TransportError(path + " returned HTTP " + std::to_string(res->status));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw TransportError(path + " returned a non-JSON body");
    }
  }
  throw TransportError(path + " failed after " + std::to_string(cfg.retries + 1) + " attempts: " + last);
}

template <typename T>
T reply_field(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw TransportError(path + " reply has no \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw TransportError(path + " reply field \"" + key + "\" has the wrong type");
  }
}

inline std::vector<unsigned char> reply_bytes(const nlohmann::json& j, const char* key, const std::string& path) {
  try {
    return base64_decode(reply_field<std::string>(j, key, path));
  } catch (const TransportError&) {
    throw;
  } catch (const Error& e) {
    throw TransportError(path + " reply field \"" + key + "\": " + e.what());
  }
}

}  // namespace detail

class RemoteSegmenter final : public Segmenter {
 public:
  explicit RemoteSegmenter(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

  InstanceMask segment(const ColorImage& image, std::size_t) const override {
    const auto reply = detail::post_json(cfg_, "/v1/segment", {{"image", detail::b64(encode_color_png(image))}});
    InstanceMask m;
    try {
      m = decode_mask_png(detail::reply_bytes(reply, "mask", "/v1/segment"));
    } catch (const TransportError&) {
      throw;
    } catch (const Error& e) {
      throw TransportError(std::string("/v1/segment mask: ") + e.what());
    }
    if (m.width() != image.width() || m.height() != image.height())
      throw TransportError("/v1/segment mask size does not match the image");
    const auto labels = label_set(m);
    std::vector<std::int32_t> order;
    for (auto l : labels)
      if (l != 0) order.push_back(l);
    return relabel_dense(m, order);
  }

  PromptedMask segment_prompted(const ColorImage& image, std::size_t, std::span<const PointPrompt> prompts,
                                const MaskPrompt& mask_prompt) const override {
    check_prompts(image, prompts, mask_prompt);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : prompts)
      points.push_back({{"u", p.u}, {"v", p.v}, {"label", p.label == PromptLabel::positive ? 1 : 0}});
    std::vector<unsigned char> raw(mask_prompt.values.size());
    std::memcpy(raw.data(), mask_prompt.values.data(), raw.size());
    const auto reply = detail::post_json(
        cfg_, "/v1/segment_prompted",
        {{"image", detail::b64(encode_color_png(image))}, {"points", points}, {"mask_prompt", detail::b64(raw)}});
    InstanceMask m;
    try {
      m = decode_mask_png(detail::reply_bytes(reply, "mask", "/v1/segment_prompted"));
    } catch (const TransportError&) {
      throw;
    } catch (const Error& e) {
      throw TransportError(std::string("/v1/segment_prompted mask: ") + e.what());
    }
    if (m.width() != image.width() || m.height() != image.height())
      throw TransportError("/v1/segment_prompted mask size does not match the image");
    PromptedMask out{BinaryMask(m.width(), m.height()), false};
    for (std::size_t p = 0; p < m.pixel_count(); ++p) out.mask.at(p) = m.at(p) != 0;
    out.no_object = count_nonzero(out.mask) == 0;
    return out;
  }

 private:
  RemoteConfig cfg_;
};

class RemoteCaptioner final : public Captioner {
 public:
  explicit RemoteCaptioner(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

 protected:
  std::string do_caption(const CaptionRequest& req) const override {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : req.frames)
      frames.push_back({{"image", detail::b64(encode_color_png(f.image))}, {"mask", detail::b64(encode_binary_png8(f.mask))}});
    const auto reply = detail::post_json(cfg_, "/v1/caption", {{"frames", frames}});
    return detail::reply_field<std::string>(reply, "caption", "/v1/caption");
  }

 private:
  RemoteConfig cfg_;
};

class RemoteChat final : public ChatClient {
 public:
  explicit RemoteChat(RemoteConfig cfg, bool enable_thinking = false)
      : cfg_(std::move(cfg)), enable_thinking_(enable_thinking) {}

 protected:
  std::string do_chat(const ChatRequest& req) const override {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : req.parts) {
      if (p.type == ChatPart::Type::text)
        parts.push_back({{"type", "text"}, {"text", p.text}});
      else
        parts.push_back({{"type", "image"}, {"image", detail::b64(encode_color_png(p.image))}});
    }
    const auto reply = detail::post_json(
        cfg_, "/v1/chat", {{"system", req.system}, {"parts", parts}, {"enable_thinking", enable_thinking_}});
    return detail::reply_field<std::string>(reply, "text", "/v1/chat");
  }

 private:
  RemoteConfig cfg_;
  bool enable_thinking_;
};

}  // namespace openvoxel
