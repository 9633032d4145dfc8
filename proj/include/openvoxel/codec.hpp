// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// PNG (libpng) and base64 (OpenSSL) encoders for masks, images and wire payloads.

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <openssl/evp.h>
#include <png.h>

#include "openvoxel/image.hpp"

namespace openvoxel {

inline std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ValidationError("base64 payload length must be a multiple of 4");
  std::vector<unsigned char> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("invalid base64 payload");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() > 1 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

namespace detail {

struct PngWriteBuffer {
  std::vector<unsigned char> bytes;
};

inline void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.insert(buf->bytes.end(), data, data + len);
}

inline void png_flush_cb(png_structp) {}

struct PngReadBuffer {
  const std::vector<unsigned char>* bytes;
  std::size_t pos = 0;
};

inline void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->pos + len > buf->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, buf->bytes->data() + buf->pos, len);
  buf->pos += len;
}

/// rows: height rows of packed big-endian samples.
inline std::vector<unsigned char> png_encode(int width, int height, int bit_depth, int color_type,
                                             const std::vector<std::vector<unsigned char>>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  PngWriteBuffer buf;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed");
  }
  png_set_write_fn(png, &buf, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& r : rows) png_write_row(png, const_cast<png_bytep>(r.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(buf.bytes);
}

struct DecodedPng {
  int width = 0, height = 0, bit_depth = 0, channels = 0;
  std::vector<std::vector<unsigned char>> rows;
};

inline DecodedPng png_decode(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw ValidationError("payload is not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadBuffer buf{&bytes, 0};
  DecodedPng out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("PNG decoding failed");
  }
  png_set_read_fn(png, &buf, png_read_cb);
  png_read_info(png, info);
  png_set_palette_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.rows.assign(static_cast<std::size_t>(out.height), std::vector<unsigned char>(rowbytes));
  for (auto& r : out.rows) png_read_row(png, r.data(), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

inline unsigned char to_u8(float x) {
  return static_cast<unsigned char>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f));
}

}  // namespace detail

/// 16-bit single-channel PNG; labels must lie in [0, 65535].
inline std::vector<unsigned char> encode_mask_png16(const InstanceMask& m) {
  std::vector<std::vector<unsigned char>> rows(m.height(), std::vector<unsigned char>(2 * m.width()));
  for (int v = 0; v < m.height(); ++v)
    for (int u = 0; u < m.width(); ++u) {
      const auto l = m(u, v);
      if (l < 0 || l > 65535) throw ValidationError("mask label out of 16-bit range");
      rows[v][2 * u] = static_cast<unsigned char>(l >> 8);
      rows[v][2 * u + 1] = static_cast<unsigned char>(l & 0xff);
    }
  return detail::png_encode(m.width(), m.height(), 16, PNG_COLOR_TYPE_GRAY, rows);
}

/// Decodes a single-channel PNG (8 or 16 bit) into labels.
inline InstanceMask decode_mask_png(const std::vector<unsigned char>& bytes) {
  auto d = detail::png_decode(bytes);
  if (d.channels != 1) throw ValidationError("mask PNG must be single-channel");
  InstanceMask m(d.width, d.height);
  for (int v = 0; v < d.height; ++v)
    for (int u = 0; u < d.width; ++u)
      m(u, v) = d.bit_depth == 16 ? (d.rows[v][2 * u] << 8) | d.rows[v][2 * u + 1] : d.rows[v][u];
  return m;
}

/// 8-bit PNG with 0 / 255.
inline std::vector<unsigned char> encode_binary_png8(const BinaryMask& m) {
  std::vector<std::vector<unsigned char>> rows(m.height(), std::vector<unsigned char>(m.width()));
  for (int v = 0; v < m.height(); ++v)
    for (int u = 0; u < m.width(); ++u) rows[v][u] = m(u, v) ? 255 : 0;
  return detail::png_encode(m.width(), m.height(), 8, PNG_COLOR_TYPE_GRAY, rows);
}

inline std::vector<unsigned char> encode_color_png(const ColorImage& img) {
  if (img.channels() != 3) throw ValidationError("color image must have 3 channels");
  std::vector<std::vector<unsigned char>> rows(img.height(), std::vector<unsigned char>(3 * img.width()));
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u)
      for (int c = 0; c < 3; ++c) rows[v][3 * u + c] = detail::to_u8(img(u, v, c));
  return detail::png_encode(img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, rows);
}

inline ColorImage decode_color_png(const std::vector<unsigned char>& bytes) {
  auto d = detail::png_decode(bytes);
  if (d.bit_depth != 8 || (d.channels != 3 && d.channels != 1))
    throw ValidationError("color PNG must be 8-bit RGB or gray");
  ColorImage img = make_color_image(d.width, d.height);
  for (int v = 0; v < d.height; ++v)
    for (int u = 0; u < d.width; ++u)
      for (int c = 0; c < 3; ++c)
        img(u, v, c) = d.rows[v][d.channels == 3 ? 3 * u + c : u] / 255.0f;
  return img;
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace openvoxel
