// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Procedural labeled scenes: solid objects voxelized on a lattice above a
// ground plane, plus camera orbits and ground-truth metadata.

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "openvoxel/camera.hpp"
#include "openvoxel/render.hpp"
#include "openvoxel/rng.hpp"
#include "openvoxel/scene.hpp"

namespace openvoxel {

struct NamedColor {
  std::string name;
  Vec3 rgb;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int n_objects = 5;
  std::vector<std::string> shape_palette = {"box", "sphere", "ell"};
  std::vector<NamedColor> color_names = {
      {"red", {0.85, 0.15, 0.12}},   {"green", {0.2, 0.75, 0.2}},  {"blue", {0.15, 0.3, 0.9}},
      {"yellow", {0.95, 0.85, 0.1}}, {"purple", {0.6, 0.2, 0.7}},  {"white", {0.95, 0.95, 0.95}},
      {"pink", {0.95, 0.5, 0.7}},    {"cyan", {0.1, 0.8, 0.85}},
  };
  std::vector<std::string> categories = {
      "apple", "banana", "mug",    "book",   "camera", "bottle", "bowl",  "toy",  "lamp",  "clock",
      "vase",  "shoe",   "kettle", "plant",  "duck",   "teapot", "candle", "pear", "hat",  "radio"};
  /// Ground plane side length (meters), centered at the origin.
  double surface = 1.6;
  double voxel_size = 0.03;
  double density_solid = 400.0;
  /// Object bounding extents are drawn from [min, max] meters.
  double object_extent_min = 0.15;
  double object_extent_max = 0.26;
  int ground_layers = 1;
  /// Radius around the origin kept free of object footprints.
  double center_clearance = 0.1;
  /// Probability that an object's placement names its nearest neighbor.
  double relation_prob = 0.6;

  void validate() const {
    if (n_objects < 1) throw ValidationError("n_objects must be >= 1");
    if (!(voxel_size > 0.0)) throw ValidationError("voxel_size must be positive");
    if (!(surface > 0.0)) throw ValidationError("surface must be positive");
    if (!(density_solid >= 0.0)) throw ValidationError("density_solid must be non-negative");
    if (shape_palette.empty()) throw ValidationError("shape_palette must not be empty");
    for (const auto& s : shape_palette)
      if (s != "box" && s != "sphere" && s != "ell")
        throw ValidationError("unknown shape '" + s + "'");
    if (color_names.empty()) throw ValidationError("color_names must not be empty");
    std::set<std::string> names;
    for (const auto& c : color_names)
      if (!names.insert(c.name).second) throw ValidationError("color names must be unique");
    if (static_cast<int>(categories.size()) < n_objects)
      throw ValidationError("need at least n_objects distinct categories");
    if (!(center_clearance >= 0.0)) throw ValidationError("center_clearance must be non-negative");
    if (!(object_extent_min > 0.0 && object_extent_max >= object_extent_min))
      throw ValidationError("object extent range is invalid");
  }
};

struct ObjectRecord {
  int gt_id = 0;
  std::string category;
  std::string color_name;
  std::string shape;
  std::string placement;
  Vec3 center = Vec3::Zero();
};

inline constexpr int kGroundGtId = 1;

struct SynthScene {
  VoxelScene scene;
  std::vector<ObjectRecord> objects;  // ground record first
};

namespace detail {

struct Placed {
  double x, y, footprint;
};

/// Inside test in the object's local frame (origin at footprint center, z up
/// from the ground).
struct Solid {
  std::string shape;
  double a, b, c;  // half extents (sphere: radius in a)
  double yaw;

  bool contains(double lx, double ly, double z) const {
    const double cs = std::cos(yaw), sn = std::sin(yaw);
    const double x = cs * lx + sn * ly;
    const double y = -sn * lx + cs * ly;
    if (shape == "sphere") {
      const double dz = z - a;
      return x * x + y * y + dz * dz <= a * a;
    }
    if (shape == "box") return std::abs(x) <= a && std::abs(y) <= b && z >= 0.0 && z <= 2.0 * c;
    // ell: full-width low slab plus a tall half-width column.
    if (std::abs(x) > a || std::abs(y) > b || z < 0.0) return false;
    return z <= c || (x <= 0.0 && z <= 2.0 * c);
  }

  double footprint() const { return shape == "sphere" ? a : std::hypot(a, b); }
  double height() const { return shape == "sphere" ? 2.0 * a : 2.0 * c; }
};

}  // namespace detail

inline SynthScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const double h = spec.voxel_size;
  const float hf = static_cast<float>(h);
  const auto density = static_cast<float>(spec.density_solid);
  SynthScene out;
  VoxelScene& scene = out.scene;
  std::vector<std::int32_t> labels;

  // An even cell count puts ground and object voxels on one lattice, so an
  // object's bottom layer exactly caps the ground cells removed under it.
  const int cells = 2 * std::max(1, static_cast<int>(std::floor(spec.surface / (2.0 * h))));
  const double origin = -0.5 * cells * h;
  Stream layout(spec.seed, "layout");
  Stream look(spec.seed, "appearance");
  std::vector<std::string> cats = spec.categories;
  look.shuffle(cats.begin(), cats.end());

  std::vector<detail::Solid> solids;
  const double half_surface = 0.5 * cells * h;
  for (int k = 0; k < spec.n_objects; ++k) {
    detail::Solid solid;
    solid.shape = spec.shape_palette[layout.below(spec.shape_palette.size())];
    const double ext = layout.uniform(spec.object_extent_min, spec.object_extent_max);
    solid.a = 0.5 * ext;
    solid.b = 0.5 * ext * layout.uniform(0.6, 1.0);
    solid.c = 0.5 * ext * layout.uniform(0.6, 1.0);
    solid.yaw = layout.uniform(0.0, M_PI);
    if (half_surface - solid.footprint() - 2.0 * h <= spec.center_clearance + solid.footprint())
      throw ValidationError("object placement failed: surface too small, use a larger surface");
    solids.push_back(solid);
  }

  // Centers are drawn area-uniformly from the annulus that keeps each footprint
  // clear of the origin and inside the ground; a blocked layout restarts.
  std::vector<detail::Placed> placed;
  bool ok = false;
  for (int restart = 0; restart < 100 && !ok; ++restart) {
    placed.clear();
    ok = true;
    for (const auto& solid : solids) {
      const double fp = solid.footprint();
      const double r0 = spec.center_clearance + fp;
      const double r1 = half_surface - fp - 2.0 * h;
      bool free = false;
      detail::Placed p{};
      for (int attempt = 0; attempt < 200 && !free; ++attempt) {
        const double r = std::sqrt(layout.uniform(r0 * r0, r1 * r1));
        const double phi = layout.uniform(0.0, 2.0 * M_PI);
        p = {r * std::cos(phi), r * std::sin(phi), fp};
        free = true;
        for (const auto& q : placed)
          if (std::hypot(p.x - q.x, p.y - q.y) < p.footprint + q.footprint + 3.0 * h) {
            free = false;
            break;
          }
      }
      if (!free) {
        ok = false;
        break;
      }
      placed.push_back(p);
    }
  }
  if (!ok) throw ValidationError("object placement failed after bounded retries; use a larger surface");

  // Ground plane on the lattice, top face at z = 0. Cells covered by an object
  // are left out: they are never directly visible.
  for (int layer = 0; layer < spec.ground_layers; ++layer)
    for (int j = 0; j < cells; ++j)
      for (int i = 0; i < cells; ++i) {
        const double gx = origin + (i + 0.5) * h, gy = origin + (j + 0.5) * h;
        bool covered = false;
        for (std::size_t k = 0; k < solids.size() && !covered; ++k)
          covered = solids[k].contains(gx - placed[k].x, gy - placed[k].y, 0.5 * h);
        if (covered) continue;
        const bool checker = ((i / 8) + (j / 8)) % 2 == 0;
        const float g = checker ? 0.5f : 0.42f;
        scene.push_back(Vec3f(static_cast<float>(gx), static_cast<float>(gy),
                              static_cast<float>(-(layer + 0.5) * h)),
                        hf, density, Vec3f(g, g * 0.95f, g * 0.9f));
        labels.push_back(kGroundGtId);
      }
  out.objects.push_back({kGroundGtId, "floor", "gray", "plane", "under all objects", Vec3::Zero()});

  for (int k = 0; k < spec.n_objects; ++k) {
    const auto& s = solids[k];
    const auto& p = placed[k];
    const int gt = kGroundGtId + 1 + k;
    const auto& color = spec.color_names[look.below(spec.color_names.size())];
    const Vec3f rgb = color.rgb.cast<float>();
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    const int i0 = static_cast<int>(std::floor((p.x - p.footprint) / h)) - 1;
    const int i1 = static_cast<int>(std::ceil((p.x + p.footprint) / h)) + 1;
    const int j0 = static_cast<int>(std::floor((p.y - p.footprint) / h)) - 1;
    const int j1 = static_cast<int>(std::ceil((p.y + p.footprint) / h)) + 1;
    const int k1 = static_cast<int>(std::ceil(s.height() / h)) + 1;
    for (int kk = 0; kk < k1; ++kk)
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
          const double x = (i + 0.5) * h, y = (j + 0.5) * h, z = (kk + 0.5) * h;
          if (!s.contains(x - p.x, y - p.y, z)) continue;
          const Vec3f c(static_cast<float>(x), static_cast<float>(y), static_cast<float>(z));
          scene.push_back(c, hf, density, rgb);
          labels.push_back(gt);
          sum += c.cast<double>();
          ++count;
        }
    if (count == 0)
      throw ValidationError("object " + std::to_string(gt) + " is smaller than one voxel");
    out.objects.push_back({gt, cats[k], color.name, s.shape, "", sum / static_cast<double>(count)});
  }

  // Placement phrases reference the nearest neighbor with probability relation_prob.
  Stream rel(spec.seed, "placement");
  for (int k = 0; k < spec.n_objects; ++k) {
    auto& rec = out.objects[k + 1];
    int nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int m = 0; m < spec.n_objects; ++m) {
      if (m == k) continue;
      const double d = std::hypot(placed[k].x - placed[m].x, placed[k].y - placed[m].y);
      if (d < best) {
        best = d;
        nearest = m;
      }
    }
    const bool relational = rel.bernoulli(spec.relation_prob);
    rec.placement = (relational && nearest >= 0) ? "next to " + out.objects[nearest + 1].category
                                                 : std::string("on floor");
  }

  // Ground record center from its voxels.
  Vec3 gsum = Vec3::Zero();
  std::size_t gcount = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == kGroundGtId) {
      gsum += scene.centers[i].cast<double>();
      ++gcount;
    }
  out.objects[0].center = gsum / static_cast<double>(gcount);
  scene.gt_labels = std::move(labels);
  scene.validate();
  return out;
}

struct OrbitParams {
  int n_views = 24;
  double radius = 6.0;
  double elevation_deg = 45.0;
  int width = 64;
  int height = 64;
  double fov_deg = 18.0;
};

/// Renders modal gt instance masks (argmax of gt-label weight per pixel).
inline std::vector<InstanceMask> render_gt_masks(const VoxelScene& scene,
                                                 const std::vector<CameraView>& views,
                                                 double tau_bg = 0.5) {
  if (!scene.gt_labels) throw ValidationError("scene has no gt_labels");
  RayTracer tracer(scene);
  std::vector<InstanceMask> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(render_group_ids(trace_view(tracer, v), *scene.gt_labels, tau_bg));
  return out;
}

/// Cameras on a horizontal circle around the scene centroid, looking at it.
/// Throws when some gt instance is visible in no view.
inline std::vector<CameraView> generate_orbit(const VoxelScene& scene, const OrbitParams& params) {
  if (params.n_views < 1) throw ValidationError("n_views must be >= 1");
  if (!(params.radius > 0.0)) throw ValidationError("orbit radius must be positive");
  const Vec3 target = scene_centroid(scene);
  const double el = params.elevation_deg * M_PI / 180.0;
  std::vector<CameraView> views;
  for (int k = 0; k < params.n_views; ++k) {
    const double az = 2.0 * M_PI * k / params.n_views;
    const Vec3 eye = target + params.radius * Vec3(std::cos(el) * std::cos(az),
                                                   std::cos(el) * std::sin(az), std::sin(el));
    views.push_back(look_at(eye, target, params.width, params.height, params.fov_deg,
                            "v" + std::to_string(k)));
  }
  if (scene.gt_labels) {
    std::set<std::int32_t> seen;
    for (const auto& m : render_gt_masks(scene, views)) {
      auto ls = label_set(m);
      seen.insert(ls.begin(), ls.end());
    }
    for (auto id : std::set<std::int32_t>(scene.gt_labels->begin(), scene.gt_labels->end()))
      if (id != 0 && !seen.count(id))
        throw ValidationError("orbit visibility check failed: gt_id " + std::to_string(id) +
                              " is hidden in every view");
  }
  return views;
}

// JSON: SceneSpec file and ObjectRecord sidecar.

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"seed", s.seed},
       {"n_objects", s.n_objects},
       {"shape_palette", s.shape_palette},
       {"surface", s.surface},
       {"voxel_size", s.voxel_size},
       {"density_solid", s.density_solid},
       {"categories", s.categories},
       {"object_extent_min", s.object_extent_min},
       {"object_extent_max", s.object_extent_max},
       {"ground_layers", s.ground_layers},
       {"center_clearance", s.center_clearance},
       {"relation_prob", s.relation_prob}};
  j["color_names"] = nlohmann::json::array();
  for (const auto& c : s.color_names)
    j["color_names"].push_back({{"name", c.name}, {"rgb", {c.rgb.x(), c.rgb.y(), c.rgb.z()}}});
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.seed = j.value("seed", s.seed);
  s.n_objects = j.value("n_objects", s.n_objects);
  s.shape_palette = j.value("shape_palette", s.shape_palette);
  s.surface = j.value("surface", s.surface);
  s.voxel_size = j.value("voxel_size", s.voxel_size);
  s.density_solid = j.value("density_solid", s.density_solid);
  s.categories = j.value("categories", s.categories);
  s.object_extent_min = j.value("object_extent_min", s.object_extent_min);
  s.object_extent_max = j.value("object_extent_max", s.object_extent_max);
  s.ground_layers = j.value("ground_layers", s.ground_layers);
  s.center_clearance = j.value("center_clearance", s.center_clearance);
  s.relation_prob = j.value("relation_prob", s.relation_prob);
  if (j.contains("color_names")) {
    s.color_names.clear();
    for (const auto& c : j.at("color_names")) {
      const auto rgb = c.at("rgb").get<std::vector<double>>();
      if (rgb.size() != 3) throw ValidationError("color rgb must have 3 entries");
      s.color_names.push_back({c.at("name").get<std::string>(), Vec3(rgb[0], rgb[1], rgb[2])});
    }
  }
}

inline void to_json(nlohmann::json& j, const OrbitParams& o) {
  j = {{"n_views", o.n_views}, {"radius", o.radius}, {"elevation_deg", o.elevation_deg},
       {"width", o.width},     {"height", o.height}, {"fov_deg", o.fov_deg}};
}

inline void from_json(const nlohmann::json& j, OrbitParams& o) {
  o.n_views = j.value("n_views", o.n_views);
  o.radius = j.value("radius", o.radius);
  o.elevation_deg = j.value("elevation_deg", o.elevation_deg);
  o.width = j.value("width", o.width);
  o.height = j.value("height", o.height);
  o.fov_deg = j.value("fov_deg", o.fov_deg);
}

inline nlohmann::json objects_to_json(const std::vector<ObjectRecord>& objs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& o : objs)
    arr.push_back({{"gt_id", o.gt_id},
                   {"category", o.category},
                   {"color_name", o.color_name},
                   {"shape", o.shape},
                   {"placement", o.placement},
                   {"center", {o.center.x(), o.center.y(), o.center.z()}}});
  return {{"objects", arr}};
}

inline std::vector<ObjectRecord> objects_from_json(const nlohmann::json& j) {
  std::vector<ObjectRecord> out;
  std::set<int> ids;
  try {
    for (const auto& o : j.at("objects")) {
      ObjectRecord r;
      r.gt_id = o.at("gt_id").get<int>();
      r.category = o.at("category").get<std::string>();
      r.color_name = o.at("color_name").get<std::string>();
      r.shape = o.at("shape").get<std::string>();
      r.placement = o.at("placement").get<std::string>();
      const auto c = o.at("center").get<std::vector<double>>();
      if (c.size() != 3) throw LoadError("objects", "center must have 3 entries");
      r.center = Vec3(c[0], c[1], c[2]);
      if (r.gt_id < 1 || !ids.insert(r.gt_id).second)
        throw LoadError("objects", "gt_id must be >= 1 and unique");
      if (r.category.empty()) throw LoadError("objects", "category must not be empty");
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("objects", e.what());
  }
  return out;
}

inline void save_objects(const std::vector<ObjectRecord>& objs, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  os << objects_to_json(objs).dump(2) << '\n';
}

inline std::vector<ObjectRecord> load_objects(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("objects", "cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("objects", e.what());
  }
  return objects_from_json(j);
}

}  // namespace openvoxel
