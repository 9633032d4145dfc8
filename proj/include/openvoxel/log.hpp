// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace openvoxel {

using WarningSink = std::function<void(const std::string&)>;

/// Process-wide warning sink; replace (or clear) to redirect non-fatal messages.
inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
  return sink;
}

inline void warn(const std::string& message) {
  if (auto& s = warning_sink()) s(message);
}

}  // namespace openvoxel
