// Synthetic multi-target scenes: constant-velocity ground truth, noisy
// detections with misses and Poisson clutter, and identity-bearing
// appearance features (separated unit embeddings plus isotropic noise).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ran/data.hpp"

namespace ran {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OcclusionWindow {
  int target = 0;  // gt id
  int start = 0;   // first occluded frame (1-based)
  int length = 0;
};

// Optional fixed trajectory for one target; presets use these to pin the
// geometry (crossings, lanes) while noise stays seed-driven.
struct TargetScript {
  double start_x = 0.0;  // initial box center
  double start_y = 0.0;
  double vel_x = 0.0;
  double vel_y = 0.0;
  double width = 32.0;
  double height = 32.0;
};

struct SceneConfig {
  int num_targets = 3;
  int num_frames = 60;
  double arena_width = 640.0;
  double arena_height = 480.0;
  double speed_min = 2.0;
  double speed_max = 6.0;
  double velocity_noise = 0.0;   // per-step sigma added to the velocity
  double box_size_min = 24.0;
  double box_size_max = 48.0;
  int appearance_dim = 16;
  double embedding_margin = 1.0;  // min pairwise distance between unit embeddings
  double appearance_noise = 0.05;
  double miss_rate = 0.0;         // per-detection drop probability
  double clutter_rate = 0.0;      // Poisson mean of false detections per frame
  double box_jitter = 0.0;        // sigma on detection box coordinates
  std::vector<OcclusionWindow> occlusions;
  std::vector<TargetScript> scripts;  // when non-empty, overrides random placement
  uint64_t seed = 1;
};

struct Scene {
  GroundTruth gt;
  DetectionSet detections;  // appearance features attached
  std::vector<Vec> embeddings;
};

// Deterministic per config.seed. Throws ConfigError when the requested
// embedding margin cannot be met for (num_targets, appearance_dim).
Scene generate(const SceneConfig& config);

// Fixed scenarios: "parallel" (non-interacting lanes, zero noise),
// "crossing" (similar targets whose paths intersect; appearance must
// disambiguate), "occlusion" (multi-frame detection gaps).
SceneConfig preset(const std::string& name);

}  // namespace ran
