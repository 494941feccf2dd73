#include "ran/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ran {

namespace {

Vec random_unit_vector(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      norm2 += x * x;
    }
  } while (norm2 < 1e-12);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

double distance(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

std::vector<Vec> make_embeddings(int count, int dim, double margin, std::mt19937_64& rng) {
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 512; ++attempt) {
      Vec cand = random_unit_vector(dim, rng);
      bool ok = true;
      for (const Vec& e : out) {
        if (distance(cand, e) < margin) {
          ok = false;
          break;
        }
      }
      if (ok) {
        out.push_back(std::move(cand));
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw ConfigError("generate: embedding margin infeasible for " + std::to_string(count) +
                        " targets in dimension " + std::to_string(dim));
    }
  }
  return out;
}

struct TargetState {
  double cx, cy, vx, vy, w, h;
};

}  // namespace

Scene generate(const SceneConfig& config) {
  if (config.num_frames < 1) throw ConfigError("generate: num_frames must be >= 1");
  if (config.appearance_dim < 1) throw ConfigError("generate: appearance_dim must be >= 1");
  if (config.miss_rate < 0.0 || config.miss_rate > 1.0) {
    throw ConfigError("generate: miss_rate outside [0, 1]");
  }
  if (config.clutter_rate < 0.0) throw ConfigError("generate: clutter_rate must be >= 0");
  const int num_targets =
      config.scripts.empty() ? config.num_targets : static_cast<int>(config.scripts.size());
  if (num_targets < 1) throw ConfigError("generate: need at least one target");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene;
  scene.embeddings = make_embeddings(num_targets, config.appearance_dim,
                                     config.embedding_margin, rng);

  std::vector<TargetState> targets(num_targets);
  for (int i = 0; i < num_targets; ++i) {
    TargetState& t = targets[i];
    if (!config.scripts.empty()) {
      const TargetScript& s = config.scripts[i];
      t = {s.start_x, s.start_y, s.vel_x, s.vel_y, s.width, s.height};
    } else {
      std::uniform_real_distribution<double> size_dist(config.box_size_min, config.box_size_max);
      t.w = size_dist(rng);
      t.h = size_dist(rng);
      std::uniform_real_distribution<double> px(t.w / 2, config.arena_width - t.w / 2);
      std::uniform_real_distribution<double> py(t.h / 2, config.arena_height - t.h / 2);
      t.cx = px(rng);
      t.cy = py(rng);
      const double angle = unit(rng) * 2.0 * M_PI;
      std::uniform_real_distribution<double> speed_dist(config.speed_min, config.speed_max);
      const double speed = speed_dist(rng);
      t.vx = speed * std::cos(angle);
      t.vy = speed * std::sin(angle);
    }
  }

  auto occluded = [&config](int target_id, int frame) {
    for (const OcclusionWindow& w : config.occlusions) {
      if (w.target == target_id && frame >= w.start && frame < w.start + w.length) return true;
    }
    return false;
  };

  for (int frame = 1; frame <= config.num_frames; ++frame) {
    for (int i = 0; i < num_targets; ++i) {
      TargetState& t = targets[i];
      const int id = i + 1;
      const bool hidden = occluded(id, frame);

      Box box{t.cx - t.w / 2, t.cy - t.h / 2, t.w, t.h};
      scene.gt.add(frame, {id, box, !hidden});

      if (!hidden && unit(rng) >= config.miss_rate) {
        Detection d;
        d.frame = frame;
        d.box = box;
        if (config.box_jitter > 0.0) {
          d.box.x += config.box_jitter * gauss(rng);
          d.box.y += config.box_jitter * gauss(rng);
          d.box.w = std::max(4.0, d.box.w + config.box_jitter * gauss(rng));
          d.box.h = std::max(4.0, d.box.h + config.box_jitter * gauss(rng));
        }
        d.confidence = 1.0;
        d.appearance = scene.embeddings[i];
        if (config.appearance_noise > 0.0) {
          for (double& v : d.appearance) v += config.appearance_noise * gauss(rng);
        }
        scene.detections.add(std::move(d));
      }

      // advance dynamics after emitting the frame
      if (config.velocity_noise > 0.0) {
        t.vx += config.velocity_noise * gauss(rng);
        t.vy += config.velocity_noise * gauss(rng);
      }
      t.cx += t.vx;
      t.cy += t.vy;
      // reflect so boxes never leave the arena
      const double lo_x = t.w / 2, hi_x = config.arena_width - t.w / 2;
      const double lo_y = t.h / 2, hi_y = config.arena_height - t.h / 2;
      if (t.cx < lo_x) { t.cx = lo_x; t.vx = -t.vx; }
      if (t.cx > hi_x) { t.cx = hi_x; t.vx = -t.vx; }
      if (t.cy < lo_y) { t.cy = lo_y; t.vy = -t.vy; }
      if (t.cy > hi_y) { t.cy = hi_y; t.vy = -t.vy; }
    }

    if (config.clutter_rate > 0.0) {
      std::poisson_distribution<int> clutter_count(config.clutter_rate);
      const int n = clutter_count(rng);
      for (int c = 0; c < n; ++c) {
        std::uniform_real_distribution<double> size_dist(config.box_size_min,
                                                         config.box_size_max);
        Detection d;
        d.frame = frame;
        d.box.w = size_dist(rng);
        d.box.h = size_dist(rng);
        d.box.x = unit(rng) * (config.arena_width - d.box.w);
        d.box.y = unit(rng) * (config.arena_height - d.box.h);
        d.confidence = 1.0;
        d.appearance = random_unit_vector(config.appearance_dim, rng);
        if (config.appearance_noise > 0.0) {
          for (double& v : d.appearance) v += config.appearance_noise * gauss(rng);
        }
        scene.detections.add(std::move(d));
      }
    }
  }
  return scene;
}

SceneConfig preset(const std::string& name) {
  SceneConfig cfg;
  if (name == "parallel") {
    // easy control: separated lanes, no noise of any kind
    cfg.num_frames = 60;
    cfg.appearance_dim = 16;
    cfg.embedding_margin = 1.0;
    cfg.appearance_noise = 0.0;
    cfg.miss_rate = 0.0;
    cfg.clutter_rate = 0.0;
    cfg.box_jitter = 0.0;
    cfg.scripts = {
        {60.0, 100.0, 4.0, 0.0, 36.0, 36.0},
        {60.0, 240.0, 4.0, 0.0, 36.0, 36.0},
        {60.0, 380.0, 4.0, 0.0, 36.0, 36.0},
    };
  } else if (name == "crossing") {
    // two mirrored pairs with equal scale and speed whose paths intersect;
    // motion alone is ambiguous near the crossing point
    cfg.num_frames = 60;
    cfg.appearance_dim = 16;
    cfg.embedding_margin = 1.2;
    cfg.appearance_noise = 0.08;
    cfg.miss_rate = 0.03;
    cfg.clutter_rate = 0.3;
    cfg.box_jitter = 1.5;
    cfg.scripts = {
        {60.0, 160.0, 5.0, 0.8, 30.0, 30.0},
        {560.0, 160.0, -5.0, 0.8, 30.0, 30.0},
        {60.0, 320.0, 5.0, -0.8, 30.0, 30.0},
        {560.0, 320.0, -5.0, -0.8, 30.0, 30.0},
    };
  } else if (name == "occlusion") {
    // targets disappear for several frames and must be reacquired
    cfg.num_frames = 60;
    cfg.appearance_dim = 16;
    cfg.embedding_margin = 1.2;
    cfg.appearance_noise = 0.05;
    cfg.miss_rate = 0.02;
    cfg.clutter_rate = 0.2;
    cfg.box_jitter = 1.0;
    cfg.scripts = {
        {60.0, 120.0, 4.5, 0.5, 32.0, 32.0},
        {580.0, 240.0, -4.5, 0.0, 32.0, 32.0},
        {60.0, 360.0, 4.5, -0.5, 32.0, 32.0},
    };
    cfg.occlusions = {
        {1, 25, 8},
        {2, 35, 6},
    };
  } else {
    throw ConfigError("unknown preset: " + name + " (expected parallel, crossing or occlusion)");
  }
  return cfg;
}

}  // namespace ran
