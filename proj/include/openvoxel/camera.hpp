// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "openvoxel/common.hpp"

namespace openvoxel {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// Pinhole camera. Camera frame is +x right, +y down, +z forward; `rotation`
/// and `translation` map camera coordinates to world coordinates.
struct CameraView {
  std::string name;
  int width = 0;
  int height = 0;
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const {
    if (width < 1 || height < 1) throw ValidationError("camera width and height must be >= 1");
    if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("camera focal lengths must be positive");
    if (!rotation.allFinite() || !translation.allFinite())
      throw ValidationError("camera pose must be finite");
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6)
      throw ValidationError("camera rotation must be orthonormal with determinant +1");
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  Ray pixel_ray(int u, int v) const {
    Vec3 d((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0);
    return {translation, (rotation * d.normalized()).normalized()};
  }

  /// Projects a world point; returns false when it lies behind the camera.
  bool project(const Vec3& world, double& u, double& v) const {
    const Vec3 p = rotation.transpose() * (world - translation);
    if (p.z() <= 0.0) return false;
    u = fx * p.x() / p.z() + cx;
    v = fy * p.y() / p.z() + cy;
    return true;
  }

  /// Camera-to-world as a row-major 4x4.
  std::array<double, 16> c2w() const {
    std::array<double, 16> m{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r * 4 + c] = rotation(r, c);
      m[r * 4 + 3] = translation[r];
    }
    m[15] = 1.0;
    return m;
  }
};

/// Builds a camera at `eye` looking at `target` with world +z as up.
inline CameraView look_at(const Vec3& eye, const Vec3& target, int width, int height,
                          double fov_deg, std::string name = {}) {
  CameraView cam;
  cam.name = std::move(name);
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * fov_deg * M_PI / 180.0);
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  const Vec3 forward = (target - eye).normalized();
  Vec3 world_up(0.0, 0.0, 1.0);
  if (std::abs(forward.dot(world_up)) > 0.999) world_up = Vec3(0.0, 1.0, 0.0);
  const Vec3 right = forward.cross(world_up).normalized();
  const Vec3 down = forward.cross(right).normalized();
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.translation = eye;
  return cam;
}

// Camera file: shared intrinsics plus per-frame c2w (row-major 4x4).

inline nlohmann::json cameras_to_json(const std::vector<CameraView>& views) {
  if (views.empty()) throw ValidationError("camera set must not be empty");
  const auto& f = views.front();
  nlohmann::json j;
  j["width"] = f.width;
  j["height"] = f.height;
  j["fx"] = f.fx;
  j["fy"] = f.fy;
  j["cx"] = f.cx;
  j["cy"] = f.cy;
  j["frames"] = nlohmann::json::array();
  for (const auto& v : views) {
    if (v.width != f.width || v.height != f.height || v.fx != f.fx || v.fy != f.fy ||
        v.cx != f.cx || v.cy != f.cy)
      throw ValidationError("camera file requires shared intrinsics across frames");
    const auto m = v.c2w();
    j["frames"].push_back({{"name", v.name}, {"c2w", std::vector<double>(m.begin(), m.end())}});
  }
  return j;
}

inline std::vector<CameraView> cameras_from_json(const nlohmann::json& j) {
  std::vector<CameraView> out;
  try {
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    for (const auto& fr : j.at("frames")) {
      CameraView v;
      v.name = fr.at("name").get<std::string>();
      v.width = w;
      v.height = h;
      v.fx = j.at("fx").get<double>();
      v.fy = j.at("fy").get<double>();
      v.cx = j.at("cx").get<double>();
      v.cy = j.at("cy").get<double>();
      const auto m = fr.at("c2w").get<std::vector<double>>();
      if (m.size() != 16) throw LoadError("frames", "c2w must have 16 entries");
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) v.rotation(r, c) = m[r * 4 + c];
        v.translation[r] = m[r * 4 + 3];
      }
      v.validate();
      out.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("cameras", e.what());
  }
  if (out.empty()) throw LoadError("frames", "camera file has no frames");
  return out;
}

inline void save_cameras(const std::vector<CameraView>& views, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  os << cameras_to_json(views).dump(2) << '\n';
}

inline std::vector<CameraView> load_cameras(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cameras", "cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("cameras", e.what());
  }
  return cameras_from_json(j);
}

inline std::size_t find_view(const std::vector<CameraView>& views, const std::string& name) {
  for (std::size_t i = 0; i < views.size(); ++i)
    if (views[i].name == name) return i;
  throw ValidationError("unknown view '" + name + "'");
}

}  // namespace openvoxel
