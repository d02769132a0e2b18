#pragma once

// Small simulated datasets shared by the learning and CLI tests.

#include <string>
#include <vector>

#include "adaptvo/rollout.hpp"
#include "adaptvo/simworld.hpp"

namespace fixture {

inline adaptvo::WorldConfig tiny_world(int frames = 6) {
  adaptvo::WorldConfig c;
  c.width = 64;
  c.height = 48;
  c.n_frames = frames;
  c.waypoint_spacing = 4;
  return c;
}

inline std::vector<adaptvo::TrainingScene> tiny_scenes(int count, int frames = 6, std::uint64_t seed = 1) {
  std::vector<adaptvo::TrainingScene> out;
  const adaptvo::WorldConfig cfg = tiny_world(frames);
  for (int i = 0; i < count; ++i) {
    adaptvo::Episode ep = adaptvo::generate_episode(cfg, seed * 1000 + static_cast<std::uint64_t>(i));
    out.push_back({"scene_" + std::to_string(i), std::move(ep.frames), cfg.fps});
  }
  return out;
}

}  // namespace fixture
