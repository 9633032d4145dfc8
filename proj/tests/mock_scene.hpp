// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// A synthetic scene grouped by its ground-truth labels, so the scene-map and
// query layers can be tested independently of grouping quality.

#include "openvoxel/clients.hpp"
#include "openvoxel/grouping.hpp"
#include "openvoxel/scene_map.hpp"
#include "openvoxel/synth.hpp"

namespace ovtest {

struct MockScene {
  openvoxel::SynthScene synth;
  std::vector<openvoxel::CameraView> views;
  std::vector<std::int32_t> ids;
  openvoxel::GroupDictionary dictionary;
  openvoxel::SceneMap map;
};

inline MockScene make_mock_scene(std::uint64_t seed, int n_objects = 5,
                                 openvoxel::OrbitParams orbit = openvoxel::OrbitParams{}) {
  using namespace openvoxel;
  SceneSpec spec;
  spec.seed = seed;
  spec.n_objects = n_objects;
  MockScene m{generate_scene(spec), {}, {}, {}, {}};
  m.views = generate_orbit(m.synth.scene, orbit);
  m.ids = *m.synth.scene.gt_labels;
  for (const auto& o : m.synth.objects) {
    m.dictionary.observe(o.gt_id, o.center, 1.0);
    m.dictionary.next_id = std::max(m.dictionary.next_id, o.gt_id + 1);
  }
  const MockCaptioner captioner(m.synth.scene, m.views, m.synth.objects);
  const MockChat chat;
  SceneMapConfig cfg;
  cfg.scene_name = "mock" + std::to_string(seed);
  m.map = build_scene_map(m.synth.scene, m.dictionary, m.ids, m.views, captioner, chat, cfg);
  return m;
}

inline const MockScene& shared_mock_scene() {
  static const MockScene m = make_mock_scene(11);
  return m;
}

}  // namespace ovtest
