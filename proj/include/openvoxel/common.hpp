// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace openvoxel {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input or invariant violation. The CLI maps it to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a remote model service. The CLI maps it to exit code 2.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Malformed OVX / JSON file; `section()` names the offending part.
class LoadError : public ValidationError {
 public:
  LoadError(std::string section, const std::string& what)
      : ValidationError(section + ": " + what), section_(std::move(section)) {}
  const std::string& section() const { return section_; }

 private:
  std::string section_;
};

inline std::string join_ints(const std::vector<int>& v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace openvoxel
