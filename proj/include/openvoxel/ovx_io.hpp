// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// OVX container: "OVX1", u64 LE header length, UTF-8 JSON header, then raw
// little-endian sections. Section offsets are relative to the end of the
// header.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "openvoxel/scene.hpp"

namespace openvoxel {

static_assert(std::endian::native == std::endian::little, "OVX I/O assumes a little-endian host");

/// Grouping output stored alongside the scene.
struct StoredGrouping {
  std::vector<Vec3f> F;
  std::vector<float> W;
  std::vector<std::int32_t> ids;

  bool operator==(const StoredGrouping&) const = default;
};

struct OvxContents {
  VoxelScene scene;
  std::optional<StoredGrouping> grouping;
  nlohmann::json meta = nlohmann::json::object();
};

namespace detail {

struct SectionSpec {
  std::string name;
  std::string dtype;
  std::vector<std::size_t> shape;
  const void* data;
  std::size_t byte_len;
};

inline std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32" || dtype == "i32") return 4;
  throw LoadError("header", "unsupported dtype '" + dtype + "'");
}

template <typename T>
void copy_section(const std::vector<char>& payload, const nlohmann::json& sec, std::size_t n,
                  std::size_t width, const char* expected_dtype, T* dst) {
  const std::string name = sec.at("name").get<std::string>();
  if (sec.at("dtype").get<std::string>() != expected_dtype)
    throw LoadError(name, std::string("expected dtype ") + expected_dtype);
  const auto shape = sec.at("shape").get<std::vector<std::size_t>>();
  const std::vector<std::size_t> want = width == 1 ? std::vector<std::size_t>{n}
                                                   : std::vector<std::size_t>{n, width};
  if (shape != want) throw LoadError(name, "shape does not match n_voxels");
  const auto offset = sec.at("offset").get<std::size_t>();
  const auto byte_len = sec.at("byte_len").get<std::size_t>();
  if (byte_len != n * width * 4) throw LoadError(name, "byte_len does not match shape");
  if (offset > payload.size() || payload.size() - offset < byte_len)
    throw LoadError(name, "section truncated");
  std::memcpy(static_cast<void*>(dst), payload.data() + offset, byte_len);
}

}  // namespace detail

inline std::vector<char> encode_ovx(const VoxelScene& scene,
                                    const std::optional<StoredGrouping>& grouping = std::nullopt,
                                    const nlohmann::json& meta = nlohmann::json::object()) {
  scene.validate();
  const std::size_t n = scene.size();
  static_assert(sizeof(Vec3f) == 12);
  std::vector<detail::SectionSpec> secs = {
      {"centers", "f32", {n, 3}, scene.centers.data(), n * 12},
      {"sizes", "f32", {n}, scene.sizes.data(), n * 4},
      {"densities", "f32", {n}, scene.densities.data(), n * 4},
      {"colors", "f32", {n, 3}, scene.colors.data(), n * 12},
  };
  if (scene.gt_labels) secs.push_back({"gt_labels", "i32", {n}, scene.gt_labels->data(), n * 4});
  if (grouping) {
    if (grouping->F.size() != n || grouping->W.size() != n || grouping->ids.size() != n)
      throw ValidationError("grouping sections must have one entry per voxel");
    secs.push_back({"group_F", "f32", {n, 3}, grouping->F.data(), n * 12});
    secs.push_back({"group_W", "f32", {n}, grouping->W.data(), n * 4});
    secs.push_back({"group_ids", "i32", {n}, grouping->ids.data(), n * 4});
  }

  nlohmann::json header;
  header["n_voxels"] = n;
  header["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  header["sections"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& s : secs) {
    header["sections"].push_back(
        {{"name", s.name}, {"dtype", s.dtype}, {"shape", s.shape}, {"offset", offset},
         {"byte_len", s.byte_len}});
    offset += s.byte_len;
  }
  const std::string hdr = header.dump();

  std::vector<char> out;
  out.reserve(12 + hdr.size() + offset);
  out.insert(out.end(), {'O', 'V', 'X', '1'});
  const std::uint64_t len = hdr.size();
  const char* lp = reinterpret_cast<const char*>(&len);
  out.insert(out.end(), lp, lp + 8);
  out.insert(out.end(), hdr.begin(), hdr.end());
  for (const auto& s : secs) {
    const char* p = static_cast<const char*>(s.data);
    out.insert(out.end(), p, p + s.byte_len);
  }
  return out;
}

inline OvxContents decode_ovx(std::span<const char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "OVX1", 4) != 0)
    throw LoadError("magic", "not an OVX1 file");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 4, 8);
  if (len > bytes.size() - 12) throw LoadError("header", "header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("header", e.what());
  }
  const std::vector<char> payload(bytes.begin() + 12 + static_cast<std::ptrdiff_t>(len), bytes.end());

  OvxContents out;
  try {
    const auto n = header.at("n_voxels").get<std::size_t>();
    if (n == 0) throw LoadError("header", "n_voxels must be >= 1");
    if (header.contains("meta")) out.meta = header.at("meta");
    std::map<std::string, nlohmann::json> by_name;
    for (const auto& sec : header.at("sections")) {
      const auto name = sec.at("name").get<std::string>();
      detail::dtype_size(sec.at("dtype").get<std::string>());
      if (!by_name.emplace(name, sec).second) throw LoadError(name, "duplicate section");
    }
    auto require = [&](const char* name) -> const nlohmann::json& {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw LoadError(name, "required section missing");
      return it->second;
    };
    auto& s = out.scene;
    s.centers.resize(n);
    s.sizes.resize(n);
    s.densities.resize(n);
    s.colors.resize(n);
    detail::copy_section(payload, require("centers"), n, 3, "f32", s.centers.data());
    detail::copy_section(payload, require("sizes"), n, 1, "f32", s.sizes.data());
    detail::copy_section(payload, require("densities"), n, 1, "f32", s.densities.data());
    detail::copy_section(payload, require("colors"), n, 3, "f32", s.colors.data());
    if (by_name.count("gt_labels")) {
      s.gt_labels.emplace(n);
      detail::copy_section(payload, by_name["gt_labels"], n, 1, "i32", s.gt_labels->data());
    }
    const int present = static_cast<int>(by_name.count("group_F") + by_name.count("group_W") +
                                         by_name.count("group_ids"));
    if (present != 0 && present != 3)
      throw LoadError("group_F", "group sections must appear together");
    if (present == 3) {
      StoredGrouping g;
      g.F.resize(n);
      g.W.resize(n);
      g.ids.resize(n);
      detail::copy_section(payload, by_name["group_F"], n, 3, "f32", g.F.data());
      detail::copy_section(payload, by_name["group_W"], n, 1, "f32", g.W.data());
      detail::copy_section(payload, by_name["group_ids"], n, 1, "i32", g.ids.data());
      out.grouping = std::move(g);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("header", e.what());
  }
  out.scene.validate();
  return out;
}

inline void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw ValidationError("write failed for " + path);
}

inline std::vector<char> read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("file", "cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void save_scene(const VoxelScene& scene, const std::string& path,
                       const std::optional<StoredGrouping>& grouping = std::nullopt,
                       const nlohmann::json& meta = nlohmann::json::object()) {
  write_bytes(path, encode_ovx(scene, grouping, meta));
}

inline OvxContents load_scene_file(const std::string& path) { return decode_ovx(read_bytes(path)); }

inline VoxelScene load_scene(const std::string& path) { return load_scene_file(path).scene; }

}  // namespace openvoxel
