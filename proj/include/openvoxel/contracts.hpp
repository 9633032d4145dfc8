// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scene-map types and strict parsers for chat-model replies.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "openvoxel/common.hpp"

namespace openvoxel {

struct SceneMapEntry {
  std::int32_t id = 0;
  Vec3 center = Vec3::Zero();
  std::string caption;
  std::int64_t voxel_count = 0;
  bool flagged = false;

  bool operator==(const SceneMapEntry&) const = default;
};

struct SceneMap {
  std::string scene_name;
  /// Ascending by id.
  std::vector<SceneMapEntry> entries;

  const SceneMapEntry* find(std::int32_t id) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), id,
                               [](const SceneMapEntry& e, std::int32_t v) { return e.id < v; });
    return it != entries.end() && it->id == id ? &*it : nullptr;
  }

  bool operator==(const SceneMap&) const = default;
};

enum class ContractErrorKind {
  MultiLine,
  NotSingleJsonLine,
  MissingField,
  BadField,
  EmptyIds,
  UnknownId,
  DuplicateId,
  LengthMismatch,
  CaptionMismatch,
  ForbiddenSubject,
  BadTemplate,
};

inline const char* contract_error_name(ContractErrorKind k) {
  switch (k) {
    case ContractErrorKind::MultiLine: return "MultiLine";
    case ContractErrorKind::NotSingleJsonLine: return "NotSingleJsonLine";
    case ContractErrorKind::MissingField: return "MissingField";
    case ContractErrorKind::BadField: return "BadField";
    case ContractErrorKind::EmptyIds: return "EmptyIds";
    case ContractErrorKind::UnknownId: return "UnknownId";
    case ContractErrorKind::DuplicateId: return "DuplicateId";
    case ContractErrorKind::LengthMismatch: return "LengthMismatch";
    case ContractErrorKind::CaptionMismatch: return "CaptionMismatch";
    case ContractErrorKind::ForbiddenSubject: return "ForbiddenSubject";
    case ContractErrorKind::BadTemplate: return "BadTemplate";
  }
  return "Unknown";
}

/// A reply that violates its output contract. Carries the raw reply text.
class ContractError : public ValidationError {
 public:
  ContractError(ContractErrorKind kind, const std::string& detail, std::string raw)
      : ValidationError(std::string(contract_error_name(kind)) + ": " + detail),
        kind_(kind),
        raw_(std::move(raw)) {}

  ContractErrorKind kind() const { return kind_; }
  const char* name() const { return contract_error_name(kind_); }
  const std::string& raw() const { return raw_; }

 private:
  ContractErrorKind kind_;
  std::string raw_;
};

// Text helpers.

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::string to_lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Collapses runs of whitespace to one space and trims.
inline std::string normalize_space(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      out += c;
      space = false;
    }
  }
  return out;
}

/// Lowercase alphanumeric tokens.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::vector<std::string> split_phrases(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline constexpr std::string_view kBackgroundPrefix = "background:";

inline bool is_background_caption(std::string_view caption) {
  return to_lower(trim(caption)).rfind(kBackgroundPrefix, 0) == 0;
}

/// Leading noun phrase: the first comma-separated phrase with any
/// "background:" prefix and leading articles removed, as joined tokens.
inline std::string leading_noun(std::string_view caption) {
  std::string head = to_lower(split_phrases(caption).front());
  if (head.rfind(kBackgroundPrefix, 0) == 0) head = head.substr(kBackgroundPrefix.size());
  auto toks = tokenize(head);
  while (!toks.empty() && (toks.front() == "a" || toks.front() == "an" || toks.front() == "the"))
    toks.erase(toks.begin());
  std::string out;
  for (const auto& t : toks) out += (out.empty() ? "" : " ") + t;
  return out;
}

inline const std::set<std::string>& forbidden_subject_nouns() {
  static const std::set<std::string> nouns = {"object", "thing",  "item",   "stuff",   "part",
                                              "area",   "region", "section", "portion", "surface"};
  return nouns;
}

/// True when the leading noun phrase starts or ends with a forbidden noun
/// ("object", "part of chair", "green object").
inline bool has_forbidden_subject(std::string_view caption) {
  const auto toks = tokenize(leading_noun(caption));
  if (toks.empty()) return false;
  const auto& f = forbidden_subject_nouns();
  auto bare = [&](std::string t) {
    if (f.count(t)) return true;
    return t.size() > 1 && t.back() == 's' && f.count(t.substr(0, t.size() - 1)) > 0;
  };
  return bare(toks.front()) || bare(toks.back());
}

namespace detail {

inline std::string single_line(std::string_view text) {
  std::string t = trim(text);
  if (t.find('\n') != std::string::npos || t.find('\r') != std::string::npos)
    throw ContractError(ContractErrorKind::MultiLine, "reply spans more than one line", std::string(text));
  return t;
}

inline nlohmann::json single_json_object(std::string_view text) {
  const std::string line = single_line(text);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ContractError(ContractErrorKind::NotSingleJsonLine, "reply is not a single JSON object",
                        std::string(text));
  }
  if (!j.is_object())
    throw ContractError(ContractErrorKind::NotSingleJsonLine, "reply is not a JSON object", std::string(text));
  return j;
}

inline std::string validated_phrase(const std::string& phrase, std::string_view raw) {
  const std::string p = normalize_space(phrase);
  if (p.empty()) throw ContractError(ContractErrorKind::BadTemplate, "empty phrase", std::string(raw));
  const auto parts = split_phrases(p);
  for (const auto& s : parts)
    if (s.empty()) throw ContractError(ContractErrorKind::BadTemplate, "empty comma-separated phrase", std::string(raw));
  if (leading_noun(p).empty())
    throw ContractError(ContractErrorKind::BadTemplate, "missing leading noun", std::string(raw));
  if (has_forbidden_subject(p))
    throw ContractError(ContractErrorKind::ForbiddenSubject, "leading noun '" + leading_noun(p) + "' is too generic",
                        std::string(raw));
  return p;
}

}  // namespace detail

/// Query-refinement reply: exactly one JSON line {"canonical": "<noun>, <details>[, <placement>]"}.
inline std::string parse_canonical(std::string_view text) {
  const auto j = detail::single_json_object(text);
  auto it = j.find("canonical");
  if (it == j.end()) throw ContractError(ContractErrorKind::MissingField, "no \"canonical\" field", std::string(text));
  if (!it->is_string())
    throw ContractError(ContractErrorKind::BadField, "\"canonical\" must be a string", std::string(text));
  return detail::validated_phrase(it->get<std::string>(), text);
}

struct CaptionLine {
  std::string text;
  /// Non-fatal findings (word count outside 12-20).
  std::vector<std::string> warnings;
};

/// Canonical-captioning reply: one plain comma-separated line, optionally
/// "background: ..."; a trailing period is dropped.
inline CaptionLine parse_caption_line(std::string_view text) {
  std::string line = detail::single_line(text);
  if (!line.empty() && line.front() == '{')
    throw ContractError(ContractErrorKind::BadTemplate, "expected a plain caption line, got JSON", std::string(text));
  if (!line.empty() && line.back() == '.') line.pop_back();
  CaptionLine out{detail::validated_phrase(line, text), {}};
  std::size_t words = 0;
  for (const auto& w : split_phrases(out.text)) words += tokenize(w).size();
  if (words < 12 || words > 20)
    out.warnings.push_back("caption has " + std::to_string(words) + " words (expected 12-20)");
  return out;
}

struct RetrievalResult {
  std::vector<std::int32_t> ids;
  std::vector<std::string> captions;
  std::optional<std::vector<std::int32_t>> candidates;

  bool operator==(const RetrievalResult&) const = default;
};

/// Retrieval reply: exactly one JSON line {"ids": [...], "captions": [...]},
/// optional "candidates" (ints or {"id": n}). Ids are returned ascending with
/// their captions reordered alongside.
inline RetrievalResult parse_retrieval(std::string_view text, const SceneMap& map) {
  using K = ContractErrorKind;
  const std::string raw(text);
  const auto j = detail::single_json_object(text);
  if (!j.contains("ids")) throw ContractError(K::MissingField, "no \"ids\" field", raw);
  if (!j.contains("captions")) throw ContractError(K::MissingField, "no \"captions\" field", raw);
  const auto& jid = j.at("ids");
  const auto& jcap = j.at("captions");
  if (!jid.is_array()) throw ContractError(K::BadField, "\"ids\" must be an array", raw);
  if (!jcap.is_array()) throw ContractError(K::BadField, "\"captions\" must be an array", raw);
  if (jid.empty()) throw ContractError(K::EmptyIds, "ids must not be empty", raw);
  if (jid.size() != jcap.size())
    throw ContractError(K::LengthMismatch,
                        std::to_string(jid.size()) + " ids but " + std::to_string(jcap.size()) + " captions", raw);

  std::vector<std::pair<std::int32_t, std::string>> pairs;
  std::set<std::int32_t> seen;
  for (std::size_t i = 0; i < jid.size(); ++i) {
    if (!jid[i].is_number_integer()) throw ContractError(K::BadField, "ids must be integers", raw);
    if (!jcap[i].is_string()) throw ContractError(K::BadField, "captions must be strings", raw);
    const auto id = jid[i].get<std::int32_t>();
    const auto* e = map.find(id);
    if (!e) throw ContractError(K::UnknownId, "id " + std::to_string(id) + " is not in the scene map", raw);
    if (!seen.insert(id).second) throw ContractError(K::DuplicateId, "id " + std::to_string(id) + " repeated", raw);
    const auto cap = jcap[i].get<std::string>();
    if (cap != e->caption)
      throw ContractError(K::CaptionMismatch, "caption for id " + std::to_string(id) + " differs from the scene map",
                          raw);
    pairs.emplace_back(id, cap);
  }
  std::sort(pairs.begin(), pairs.end());
  RetrievalResult out;
  for (auto& [id, cap] : pairs) {
    out.ids.push_back(id);
    out.captions.push_back(std::move(cap));
  }

  if (auto it = j.find("candidates"); it != j.end()) {
    if (!it->is_array()) throw ContractError(K::BadField, "\"candidates\" must be an array", raw);
    std::vector<std::int32_t> cands;
    for (const auto& c : *it) {
      std::int32_t id;
      if (c.is_number_integer()) {
        id = c.get<std::int32_t>();
      } else if (c.is_object() && c.contains("id") && c.at("id").is_number_integer()) {
        id = c.at("id").get<std::int32_t>();
      } else {
        throw ContractError(K::BadField, "candidates must be ids or {\"id\": n}", raw);
      }
      if (!map.find(id)) throw ContractError(K::UnknownId, "candidate " + std::to_string(id) + " is not in the scene map", raw);
      cands.push_back(id);
    }
    out.candidates = std::move(cands);
  }
  return out;
}

/// One-line JSON rendering accepted by parse_retrieval.
inline std::string format_retrieval(const RetrievalResult& r) {
  nlohmann::ordered_json j;
  j["ids"] = r.ids;
  j["captions"] = r.captions;
  if (r.candidates) {
    nlohmann::ordered_json c = nlohmann::ordered_json::array();
    for (auto id : *r.candidates) c.push_back({{"id", id}});
    j["candidates"] = c;
  }
  return j.dump();
}

// Scene-map JSON.

inline nlohmann::ordered_json scene_map_to_json(const SceneMap& m) {
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json g;
    g["id"] = e.id;
    g["center"] = {e.center.x(), e.center.y(), e.center.z()};
    g["caption"] = e.caption;
    g["voxel_count"] = e.voxel_count;
    g["flagged"] = e.flagged;
    groups.push_back(std::move(g));
  }
  nlohmann::ordered_json j;
  j["scene_name"] = m.scene_name;
  j["groups"] = std::move(groups);
  return j;
}

/// Compact map text for chat prompts (id, center, caption).
inline std::string scene_map_prompt_json(const SceneMap& m) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json g;
    g["id"] = e.id;
    g["center"] = {e.center.x(), e.center.y(), e.center.z()};
    g["caption"] = e.caption;
    arr.push_back(std::move(g));
  }
  return arr.dump();
}

}  // namespace openvoxel
