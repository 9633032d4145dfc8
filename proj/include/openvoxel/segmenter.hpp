// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "openvoxel/camera.hpp"
#include "openvoxel/image.hpp"
#include "openvoxel/rng.hpp"
#include "openvoxel/synth.hpp"

namespace openvoxel {

enum class PromptLabel : int { negative = 0, positive = 1 };

struct PointPrompt {
  int u = 0;
  int v = 0;
  PromptLabel label = PromptLabel::positive;
};

/// Dense mask prompt; every value is +20 (positive), -20 (negative) or 0 (unknown).
struct MaskPrompt {
  static constexpr std::int8_t kPositive = 20;
  static constexpr std::int8_t kNegative = -20;

  int width = 0;
  int height = 0;
  std::vector<std::int8_t> values;

  MaskPrompt() = default;
  MaskPrompt(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0) {}

  void validate() const {
    if (values.size() != static_cast<std::size_t>(width) * height)
      throw ValidationError("mask prompt size does not match its dimensions");
    for (auto x : values)
      if (x != kPositive && x != kNegative && x != 0)
        throw ValidationError("mask prompt values must be +20, -20 or 0");
  }
};

struct NoiseConfig {
  double fragment_prob = 0.0;
  int erode_px = 0;
  bool permute_ids = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(fragment_prob >= 0.0 && fragment_prob <= 1.0))
      throw ValidationError("fragment_prob must lie in [0, 1]");
    if (erode_px < 0) throw ValidationError("erode_px must be non-negative");
  }
};

struct PromptedMask {
  BinaryMask mask;
  /// All positive prompts fell on background.
  bool no_object = false;
};

/// Per-view instance segmentation. Labels are dense 1..m with 0 background and
/// carry no meaning across views. Implementations must tolerate concurrent calls.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  virtual InstanceMask segment(const ColorImage& image, std::size_t view_index) const = 0;

  virtual PromptedMask segment_prompted(const ColorImage& image, std::size_t view_index,
                                        std::span<const PointPrompt> prompts,
                                        const MaskPrompt& mask_prompt) const = 0;

 protected:
  static void check_prompts(const ColorImage& image, std::span<const PointPrompt> prompts,
                            const MaskPrompt& mask_prompt) {
    bool positive = false;
    for (const auto& p : prompts) {
      if (p.u < 0 || p.v < 0 || p.u >= image.width() || p.v >= image.height())
        throw ValidationError("point prompt outside the image");
      positive |= p.label == PromptLabel::positive;
    }
    if (!positive) throw ValidationError("segment_prompted needs at least one positive prompt");
    mask_prompt.validate();
    if (mask_prompt.width != image.width() || mask_prompt.height != image.height())
      throw ValidationError("mask prompt dimensions do not match the image");
  }
};

/// Relabels non-zero labels to 1..m in the given order.
inline InstanceMask relabel_dense(const InstanceMask& m, const std::vector<std::int32_t>& order) {
  std::map<std::int32_t, std::int32_t> remap;
  for (std::size_t k = 0; k < order.size(); ++k) remap[order[k]] = static_cast<std::int32_t>(k + 1);
  InstanceMask out(m.width(), m.height());
  for (std::size_t p = 0; p < m.pixel_count(); ++p)
    out.at(p) = m.at(p) == 0 ? 0 : remap.at(m.at(p));
  return out;
}

/// Segmenter backed by rendered ground-truth masks of a synthetic scene, with
/// optional fragmentation, boundary erosion and per-view label permutation.
class OracleSegmenter final : public Segmenter {
 public:
  OracleSegmenter(const VoxelScene& scene, const std::vector<CameraView>& views,
                  NoiseConfig noise = {}, double tau_bg = 0.5)
      : noise_(noise) {
    noise.validate();
    if (!scene.gt_labels) throw ValidationError("oracle segmenter needs a scene with gt_labels");
    gt_ = render_gt_masks(scene, views, tau_bg);
  }

  const InstanceMask& gt_mask(std::size_t view_index) const { return gt_.at(view_index); }

  InstanceMask segment(const ColorImage&, std::size_t view_index) const override {
    if (view_index >= gt_.size()) throw ValidationError("view index outside the oracle's views");
    const InstanceMask& gt = gt_[view_index];
    Stream rng(noise_.seed, "segment", view_index);

    // Fragment labels are encoded as 2*id + side.
    InstanceMask work(gt.width(), gt.height());
    for (std::size_t p = 0; p < gt.pixel_count(); ++p) work.at(p) = gt.at(p) * 2;
    for (auto id : label_set(gt)) {
      const bool split = rng.bernoulli(noise_.fragment_prob);
      const double theta = rng.uniform(0.0, M_PI);
      if (!split) continue;
      std::vector<std::size_t> pix;
      double cu = 0.0, cv = 0.0;
      for (std::size_t p = 0; p < gt.pixel_count(); ++p)
        if (gt.at(p) == id) {
          pix.push_back(p);
          cu += static_cast<double>(p % gt.width());
          cv += static_cast<double>(p / gt.width());
        }
      if (pix.size() < 2) continue;
      cu /= pix.size();
      cv /= pix.size();
      const double nx = std::cos(theta), ny = std::sin(theta);
      std::vector<double> proj;
      proj.reserve(pix.size());
      for (auto p : pix)
        proj.push_back((static_cast<double>(p % gt.width()) - cu) * nx +
                       (static_cast<double>(p / gt.width()) - cv) * ny);
      double cut = 0.0;
      const auto above = std::count_if(proj.begin(), proj.end(), [](double x) { return x >= 0.0; });
      if (above == 0 || above == static_cast<long>(proj.size())) {
        // Degenerate line: split at the median projection instead.
        std::vector<double> sorted = proj;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        cut = sorted[sorted.size() / 2];
      }
      for (std::size_t k = 0; k < pix.size(); ++k)
        if (proj[k] >= cut) work.at(pix[k]) = id * 2 + 1;
    }

    if (noise_.erode_px > 0) {
      InstanceMask eroded = work;
      const int r = noise_.erode_px;
      for (int v = 0; v < work.height(); ++v)
        for (int u = 0; u < work.width(); ++u) {
          const auto l = work(u, v);
          if (l == 0) continue;
          bool interior = true;
          for (int dv = -r; dv <= r && interior; ++dv)
            for (int du = -r; du <= r; ++du) {
              const int uu = u + du, vv = v + dv;
              if (uu < 0 || vv < 0 || uu >= work.width() || vv >= work.height()) continue;
              if (work(uu, vv) != l) {
                interior = false;
                break;
              }
            }
          if (!interior) eroded(u, v) = 0;
        }
      work = std::move(eroded);
    }

    const auto present = label_set(work);
    std::vector<std::int32_t> order(present.begin(), present.end());
    if (noise_.permute_ids) rng.shuffle(order.begin(), order.end());
    return relabel_dense(work, order);
  }

  PromptedMask segment_prompted(const ColorImage& image, std::size_t view_index,
                                std::span<const PointPrompt> prompts,
                                const MaskPrompt& mask_prompt) const override {
    if (view_index >= gt_.size()) throw ValidationError("view index outside the oracle's views");
    check_prompts(image, prompts, mask_prompt);
    const InstanceMask& gt = gt_[view_index];
    std::map<std::int32_t, int> votes;
    for (const auto& p : prompts)
      if (p.label == PromptLabel::positive && gt(p.u, p.v) != 0) ++votes[gt(p.u, p.v)];
    PromptedMask out{BinaryMask(gt.width(), gt.height()), false};
    if (votes.empty()) {
      out.no_object = true;
      return out;
    }
    // Ties in point votes fall back to the +20 region, then to the smaller id.
    std::map<std::int32_t, std::size_t> region;
    for (std::size_t p = 0; p < gt.pixel_count(); ++p)
      if (mask_prompt.values[p] == MaskPrompt::kPositive && gt.at(p) != 0) ++region[gt.at(p)];
    std::int32_t best = 0;
    std::pair<int, std::size_t> best_key{-1, 0};
    for (const auto& [id, n] : votes) {
      const std::pair<int, std::size_t> key{n, region.count(id) ? region.at(id) : 0};
      if (key > best_key) {
        best_key = key;
        best = id;
      }
    }
    // Negative prompts only remove other instances; the selected instance's
    // pixels are returned whole.
    for (std::size_t p = 0; p < gt.pixel_count(); ++p) out.mask.at(p) = gt.at(p) == best ? 1 : 0;
    return out;
  }

 private:
  NoiseConfig noise_;
  std::vector<InstanceMask> gt_;
};

}  // namespace openvoxel
