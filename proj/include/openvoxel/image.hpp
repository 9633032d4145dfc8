// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "openvoxel/common.hpp"

namespace openvoxel {

/// Dense row-major H x W x C image.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    if (width < 0 || height < 0 || channels < 1)
      throw ValidationError("image dimensions must be non-negative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  T& operator()(int u, int v, int c = 0) { return data_[index(u, v, c)]; }
  const T& operator()(int u, int v, int c = 0) const { return data_[index(u, v, c)]; }
  T& at(std::size_t pixel, int c = 0) { return data_[pixel * channels_ + c]; }
  const T& at(std::size_t pixel, int c = 0) const { return data_[pixel * channels_ + c]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Image& o) const = default;

 private:
  std::size_t index(int u, int v, int c) const {
    return (static_cast<std::size_t>(v) * width_ + u) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// RGB in [0, 1].
using ColorImage = Image<float>;
/// Per-pixel instance labels; 0 is background.
using InstanceMask = Image<std::int32_t>;
/// 0 / 1 mask.
using BinaryMask = Image<std::uint8_t>;

inline ColorImage make_color_image(int width, int height) { return ColorImage(width, height, 3); }

inline std::set<std::int32_t> label_set(const InstanceMask& m) {
  std::set<std::int32_t> out;
  for (auto l : m.data())
    if (l != 0) out.insert(l);
  return out;
}

inline std::size_t count_nonzero(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t x) { return x != 0; }));
}

inline BinaryMask binary_of(const InstanceMask& m, std::int32_t label) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t p = 0; p < m.pixel_count(); ++p) out.at(p) = m.at(p) == label ? 1 : 0;
  return out;
}

inline BinaryMask nonzero_of(const InstanceMask& m) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t p = 0; p < m.pixel_count(); ++p) out.at(p) = m.at(p) != 0 ? 1 : 0;
  return out;
}

}  // namespace openvoxel
