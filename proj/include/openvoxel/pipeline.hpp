// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "openvoxel/clients.hpp"
#include "openvoxel/evaluate.hpp"
#include "openvoxel/grouping.hpp"
#include "openvoxel/ovx_io.hpp"
#include "openvoxel/scene_map.hpp"
#include "openvoxel/synth.hpp"

namespace openvoxel {

namespace fs = std::filesystem;

// Fixed artifact names under the output directory.
inline constexpr const char* kSceneFile = "scene.ovx";
inline constexpr const char* kCamerasFile = "cameras.json";
inline constexpr const char* kObjectsFile = "objects.json";
inline constexpr const char* kSceneMapFile = "scene_map.json";
inline constexpr const char* kQueriesFile = "queries.json";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kReportTextFile = "report.txt";
inline constexpr const char* kDictionaryMetaKey = "group_dictionary";

inline void to_json(nlohmann::json& j, const GroupingConfig& g) {
  j = {{"iou_match_threshold", g.iou_match_threshold},
       {"containment_merge_threshold", g.containment_merge_threshold},
       {"merge_every", g.merge_every},
       {"max_views", g.max_views},
       {"tau_bg", g.tau_bg},
       {"min_instance_pixels", g.min_instance_pixels},
       {"enable_merge", g.enable_merge},
       {"positive_prompts", g.positive_prompts},
       {"max_negative_prompts", g.max_negative_prompts},
       {"seed", g.seed}};
}

inline void from_json(const nlohmann::json& j, GroupingConfig& g) {
  g.iou_match_threshold = j.value("iou_match_threshold", g.iou_match_threshold);
  g.containment_merge_threshold = j.value("containment_merge_threshold", g.containment_merge_threshold);
  g.merge_every = j.value("merge_every", g.merge_every);
  g.max_views = j.value("max_views", g.max_views);
  g.tau_bg = j.value("tau_bg", g.tau_bg);
  g.min_instance_pixels = j.value("min_instance_pixels", g.min_instance_pixels);
  g.enable_merge = j.value("enable_merge", g.enable_merge);
  g.positive_prompts = j.value("positive_prompts", g.positive_prompts);
  g.max_negative_prompts = j.value("max_negative_prompts", g.max_negative_prompts);
  g.seed = j.value("seed", g.seed);
}

enum class ClientMode { mock, remote };

/// One scene source (synth spec or OVX path) and one camera source (orbit or
/// cameras file). Input paths resolve against the config file, `out` against
/// the working directory.
struct PipelineConfig {
  std::optional<SceneSpec> synth;
  std::optional<std::string> scene_path;
  std::optional<std::string> objects_path;
  std::optional<OrbitParams> orbit;
  std::optional<std::string> cameras_path;
  GroupingConfig grouping;
  NoiseConfig noise;
  ClientMode clients = ClientMode::mock;
  RemoteConfig remote;
  QuerySetConfig queries;
  std::optional<std::string> queries_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;

  void validate() const {
    if (synth && scene_path) throw ValidationError("config names both a synth spec and a scene path");
    if (orbit && cameras_path) throw ValidationError("config names both orbit params and a cameras path");
    if (out.empty()) throw ValidationError("output directory must not be empty");
    grouping.validate();
    noise.validate();
    if (synth) synth->validate();
  }

  /// Scene source with the synth default filled in.
  bool uses_synth() const { return !scene_path; }
  bool uses_orbit() const { return !cameras_path; }

  /// Copies the top-level seed into every seeded component.
  void propagate_seed() {
    if (!seed) return;
    if (!synth && !scene_path) synth = SceneSpec{};
    if (synth) synth->seed = *seed;
    grouping.seed = *seed;
    noise.seed = *seed;
    queries.seed = *seed;
  }
};

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  auto resolve = [&](const std::string& p) { return (fs::path(p).is_absolute() ? fs::path(p) : base_dir / p).string(); };
  PipelineConfig c;
  try {
    if (j.contains("synth")) c.synth = j.at("synth").get<SceneSpec>();
    if (j.contains("scene")) c.scene_path = resolve(j.at("scene").get<std::string>());
    if (j.contains("objects")) c.objects_path = resolve(j.at("objects").get<std::string>());
    if (j.contains("orbit")) c.orbit = j.at("orbit").get<OrbitParams>();
    if (j.contains("cameras")) c.cameras_path = resolve(j.at("cameras").get<std::string>());
    if (j.contains("grouping")) c.grouping = j.at("grouping").get<GroupingConfig>();
    if (j.contains("segmenter")) {
      const auto& s = j.at("segmenter");
      c.noise.fragment_prob = s.value("fragment_prob", c.noise.fragment_prob);
      c.noise.erode_px = s.value("erode_px", c.noise.erode_px);
      c.noise.permute_ids = s.value("permute_ids", c.noise.permute_ids);
    }
    const auto mode = j.value("clients", std::string("mock"));
    if (mode != "mock" && mode != "remote") throw ValidationError("clients must be \"mock\" or \"remote\"");
    c.clients = mode == "mock" ? ClientMode::mock : ClientMode::remote;
    c.remote.endpoint = j.value("endpoint", c.remote.endpoint);
    c.remote.timeout_s = j.value("timeout_s", c.remote.timeout_s);
    c.remote.retries = j.value("retries", c.remote.retries);
    if (j.contains("queries")) {
      const auto& q = j.at("queries");
      if (q.is_string()) {
        c.queries_path = resolve(q.get<std::string>());
      } else {
        c.queries.n_queries = q.value("n_queries", c.queries.n_queries);
        c.queries.min_visible_pixels = q.value("min_visible_pixels", c.queries.min_visible_pixels);
        c.queries.placement_prob = q.value("placement_prob", c.queries.placement_prob);
      }
    }
    c.out = j.value("out", c.out);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("config", e.what());
  }
  return c;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("config", "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("config", e.what());
  }
  return pipeline_config_from_json(j, fs::path(path).parent_path());
}

/// Scene, cameras and (when known) object records plus any stored grouping.
struct SceneBundle {
  VoxelScene scene;
  std::vector<CameraView> views;
  std::vector<ObjectRecord> objects;
  std::optional<StoredGrouping> grouping;
  GroupDictionary dictionary;
};

inline SceneBundle load_bundle(const PipelineConfig& cfg) {
  SceneBundle b;
  if (cfg.uses_synth()) {
    auto s = generate_scene(cfg.synth.value_or(SceneSpec{}));
    b.scene = std::move(s.scene);
    b.objects = std::move(s.objects);
  } else {
    auto contents = load_scene_file(*cfg.scene_path);
    b.scene = std::move(contents.scene);
    b.grouping = std::move(contents.grouping);
    if (contents.meta.contains(kDictionaryMetaKey))
      b.dictionary = dictionary_from_json(contents.meta.at(kDictionaryMetaKey));
    const fs::path objects =
        cfg.objects_path ? fs::path(*cfg.objects_path) : fs::path(*cfg.scene_path).parent_path() / kObjectsFile;
    if (fs::exists(objects)) b.objects = load_objects(objects.string());
  }
  b.views = cfg.uses_orbit() ? generate_orbit(b.scene, cfg.orbit.value_or(OrbitParams{}))
                             : load_cameras(*cfg.cameras_path);
  return b;
}

struct Clients {
  std::unique_ptr<Segmenter> segmenter;
  std::unique_ptr<Captioner> captioner;
  std::unique_ptr<ChatClient> chat;

  const Segmenter& need_segmenter() const {
    if (!segmenter) throw ValidationError("mock segmenter needs a scene with gt_labels");
    return *segmenter;
  }
  const Captioner& need_captioner() const {
    if (!captioner) throw ValidationError("mock captioner needs gt_labels and object records (objects.json)");
    return *captioner;
  }
};

/// Mock clients are built only when their inputs exist: the segmenter needs gt
/// labels, the captioner also needs object records.
inline Clients make_clients(const PipelineConfig& cfg, const SceneBundle& b) {
  Clients c;
  if (cfg.clients == ClientMode::remote) {
    c.segmenter = std::make_unique<RemoteSegmenter>(cfg.remote);
    c.captioner = std::make_unique<RemoteCaptioner>(cfg.remote);
    c.chat = std::make_unique<RemoteChat>(cfg.remote);
    return c;
  }
  if (b.scene.gt_labels) {
    c.segmenter = std::make_unique<OracleSegmenter>(b.scene, b.views, cfg.noise, cfg.grouping.tau_bg);
    if (!b.objects.empty())
      c.captioner = std::make_unique<MockCaptioner>(b.scene, b.views, b.objects, cfg.grouping.tau_bg);
  }
  c.chat = std::make_unique<MockChat>();
  return c;
}

inline void write_scene_outputs(const SceneBundle& b, const fs::path& out) {
  fs::create_directories(out);
  nlohmann::json meta = nlohmann::json::object();
  if (b.grouping) meta[kDictionaryMetaKey] = dictionary_to_json(b.dictionary, {});
  save_scene(b.scene, (out / kSceneFile).string(), b.grouping, meta);
  save_cameras(b.views, (out / kCamerasFile).string());
  if (!b.objects.empty()) save_objects(b.objects, (out / kObjectsFile).string());
}

inline void apply_grouping(SceneBundle& b, const GroupingResult& r) {
  StoredGrouping g;
  g.F.reserve(r.field.size());
  for (const auto& f : r.field.F) g.F.push_back(f.cast<float>());
  g.W.assign(r.field.W.begin(), r.field.W.end());
  g.ids = r.voxel_ids;
  b.grouping = std::move(g);
  b.dictionary = r.dictionary;
}

inline SceneMap caption_stage(const SceneBundle& b, const Captioner& captioner, const ChatClient& chat,
                              const PipelineConfig& cfg, const std::string& scene_name) {
  if (!b.grouping) throw ValidationError("scene has no grouping; run the group stage first");
  if (b.dictionary.entries.empty()) throw ValidationError("scene has no group dictionary");
  SceneMapConfig mc;
  mc.scene_name = scene_name;
  mc.min_instance_pixels = cfg.grouping.min_instance_pixels;
  mc.tau = cfg.grouping.tau_bg;
  return build_scene_map(b.scene, b.dictionary, b.grouping->ids, b.views, captioner, chat, mc);
}

inline std::string scene_name_of(const PipelineConfig& cfg) {
  if (cfg.scene_path) return fs::path(*cfg.scene_path).stem().string();
  return "synth_" + std::to_string(cfg.synth.value_or(SceneSpec{}).seed);
}

/// synth/load -> group -> caption -> eval, writing every artifact under cfg.out.
inline EvalReport run_pipeline(PipelineConfig cfg) {
  cfg.propagate_seed();
  cfg.validate();
  const fs::path out(cfg.out);
  SceneBundle b = load_bundle(cfg);
  const Clients clients = make_clients(cfg, b);
  const Captioner& captioner = clients.need_captioner();

  apply_grouping(b, run_grouping(b.scene, b.views, clients.need_segmenter(), cfg.grouping));
  write_scene_outputs(b, out);

  const SceneMap map = caption_stage(b, captioner, *clients.chat, cfg, scene_name_of(cfg));
  save_scene_map(map, (out / kSceneMapFile).string());

  std::vector<QueryItem> items;
  if (cfg.queries_path) {
    items = load_query_set(*cfg.queries_path);
  } else {
    items = generate_query_set(b.scene, b.objects, b.views, cfg.queries);
    save_query_set(items, out / kQueriesFile);
  }
  EvalConfig ec;
  ec.tau_mask = cfg.grouping.tau_bg;
  const auto report = evaluate_queries(b.scene, b.grouping->ids, map, b.views, items, *clients.chat, ec);
  save_report(report, out / kReportFile, out / kReportTextFile);
  return report;
}

}  // namespace openvoxel
