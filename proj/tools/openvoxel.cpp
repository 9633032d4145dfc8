// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0

// openvoxel: synth / group / caption / query / eval / pipeline.
// Exit codes: 0 success, 1 validation or usage error, 2 transport error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "openvoxel/pipeline.hpp"
#include "openvoxel/query.hpp"

namespace fs = std::filesystem;
using namespace openvoxel;

namespace {

struct Flags {
  std::string config;
  std::string scene;
  std::string cameras;
  std::string objects;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string clients;
  std::string endpoint;
  std::optional<int> merge_every;
  std::optional<double> iou_threshold;
  std::optional<int> max_views;
  std::string text;
  std::string view;
  std::string map;
  std::string queries;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "pipeline config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--scene", f.scene, "input scene (.ovx)")->check(CLI::ExistingFile);
  cmd->add_option("--cameras", f.cameras, "cameras JSON")->check(CLI::ExistingFile);
  cmd->add_option("--objects", f.objects, "object records JSON (mock captioner)")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "seed for synthesis, grouping and query sampling");
  cmd->add_option("--clients", f.clients, "model clients")->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--endpoint", f.endpoint, "model service base URL (remote clients)");
  cmd->add_option("--merge-every", f.merge_every, "merge step interval in views")->check(CLI::PositiveNumber);
  cmd->add_option("--iou-threshold", f.iou_threshold, "mask matching IoU threshold")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--max-views", f.max_views, "view budget for grouping")->check(CLI::PositiveNumber);
}

/// Config file (if any) with flags applied on top.
PipelineConfig resolve_config(const Flags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_pipeline_config(f.config);
  if (!f.scene.empty()) {
    c.scene_path = f.scene;
    c.synth.reset();
  }
  if (!f.cameras.empty()) {
    c.cameras_path = f.cameras;
    c.orbit.reset();
  }
  if (!f.objects.empty()) c.objects_path = f.objects;
  if (!f.out.empty()) c.out = f.out;
  if (f.seed) c.seed = f.seed;
  if (!f.clients.empty()) c.clients = f.clients == "mock" ? ClientMode::mock : ClientMode::remote;
  if (!f.endpoint.empty()) c.remote.endpoint = f.endpoint;
  if (f.merge_every) c.grouping.merge_every = *f.merge_every;
  if (f.iou_threshold) c.grouping.iou_match_threshold = *f.iou_threshold;
  if (f.max_views) c.grouping.max_views = *f.max_views;
  if (!f.queries.empty()) c.queries_path = f.queries;
  c.propagate_seed();
  c.validate();
  return c;
}

SceneMap load_map_for(const Flags& f, const PipelineConfig& c) {
  if (!f.map.empty()) return load_scene_map(f.map);
  if (c.scene_path) {
    const auto sibling = fs::path(*c.scene_path).parent_path() / kSceneMapFile;
    if (fs::exists(sibling)) return load_scene_map(sibling.string());
  }
  throw ValidationError("no scene map: pass --map or keep scene_map.json next to the scene");
}

const std::vector<std::int32_t>& grouped_ids(const SceneBundle& b) {
  if (!b.grouping) throw ValidationError("scene has no grouping; run `openvoxel group` first");
  return b.grouping->ids;
}

int cmd_synth(const Flags& f) {
  const auto c = resolve_config(f);
  if (!c.uses_synth()) throw ValidationError("synth takes a SceneSpec, not --scene");
  const auto b = load_bundle(c);
  write_scene_outputs(b, c.out);
  std::printf("%zu voxels, %zu objects, %zu views -> %s\n", b.scene.size(), b.objects.size(), b.views.size(),
              c.out.c_str());
  return 0;
}

int cmd_group(const Flags& f) {
  const auto c = resolve_config(f);
  auto b = load_bundle(c);
  const auto clients = make_clients(c, b);
  const auto r = run_grouping(b.scene, b.views, clients.need_segmenter(), c.grouping);
  apply_grouping(b, r);
  write_scene_outputs(b, c.out);
  std::printf("%zu groups over %zu views (%zu merges) -> %s\n", r.dictionary.entries.size(),
              r.processed_views.size(), r.merges_applied, (fs::path(c.out) / kSceneFile).c_str());
  return 0;
}

int cmd_caption(const Flags& f) {
  const auto c = resolve_config(f);
  const auto b = load_bundle(c);
  const auto clients = make_clients(c, b);
  const auto map = caption_stage(b, clients.need_captioner(), *clients.chat, c, scene_name_of(c));
  fs::create_directories(c.out);
  save_scene_map(map, (fs::path(c.out) / kSceneMapFile).string());
  for (const auto& e : map.entries)
    std::printf("%4d %s%s\n", e.id, e.caption.c_str(), e.flagged ? "  [flagged]" : "");
  return 0;
}

int cmd_query(const Flags& f) {
  const auto c = resolve_config(f);
  const auto b = load_bundle(c);
  const auto& ids = grouped_ids(b);
  const auto map = load_map_for(f, c);
  const auto clients = make_clients(c, b);
  const auto& view = b.views.at(find_view(b.views, f.view));
  const auto req = make_query_request(b.scene, view, f.text);
  const auto ans = answer_query(b.scene, ids, map, req, *clients.chat, c.grouping.tau_bg);
  write_answer(ans, *req.query_image, c.out);
  std::printf("%s\n", answer_to_json(ans).dump().c_str());
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto c = resolve_config(f);
  const auto b = load_bundle(c);
  const auto& ids = grouped_ids(b);
  const auto map = load_map_for(f, c);
  const auto clients = make_clients(c, b);
  std::vector<QueryItem> items;
  if (c.queries_path) {
    items = load_query_set(*c.queries_path);
  } else {
    items = generate_query_set(b.scene, b.objects, b.views, c.queries);
    save_query_set(items, fs::path(c.out) / kQueriesFile);
  }
  EvalConfig ec;
  ec.tau_mask = c.grouping.tau_bg;
  const auto rep = evaluate_queries(b.scene, ids, map, b.views, items, *clients.chat, ec);
  fs::create_directories(c.out);
  save_report(rep, fs::path(c.out) / kReportFile, fs::path(c.out) / kReportTextFile);
  std::fputs(report_table(rep).c_str(), stdout);
  return 0;
}

int cmd_pipeline(const Flags& f) {
  const auto c = resolve_config(f);
  const auto rep = run_pipeline(c);
  std::fputs(report_table(rep).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"openvoxel: training-free voxel grouping, captioning and referring queries"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene, cameras and object records");
  auto* group = app.add_subcommand("group", "group voxels from per-view masks");
  auto* caption = app.add_subcommand("caption", "build the captioned scene map");
  auto* query = app.add_subcommand("query", "answer one referring query");
  auto* eval = app.add_subcommand("eval", "score a query set");
  auto* pipeline = app.add_subcommand("pipeline", "synth, group, caption and eval end to end");
  for (auto* cmd : {synth, group, caption, query, eval, pipeline}) add_common(cmd, f);
  query->add_option("--text", f.text, "query text")->required();
  query->add_option("--view", f.view, "target view name")->required();
  for (auto* cmd : {query, eval}) cmd->add_option("--map", f.map, "scene map JSON")->check(CLI::ExistingFile);
  for (auto* cmd : {eval, pipeline})
    cmd->add_option("--queries", f.queries, "query set JSON")->check(CLI::ExistingFile);
  pipeline->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*synth) return cmd_synth(f);
    if (*group) return cmd_group(f);
    if (*caption) return cmd_caption(f);
    if (*query) return cmd_query(f);
    if (*eval) return cmd_eval(f);
    return cmd_pipeline(f);
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
