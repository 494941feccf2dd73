// Shared data containers: boxes, detections, ground truth and result rows.
#pragma once

#include <map>
#include <vector>

#include "ran/numerics.hpp"

namespace ran {

struct Box {
  double x = 0.0;  // top-left
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double diagonal() const;
};

// Intersection over union, in [0, 1].
double iou(const Box& a, const Box& b);

struct Detection {
  int frame = 0;  // 1-based
  Box box;
  double confidence = 0.0;
  Vec appearance;  // empty until a feature sidecar is joined
};

// Detections grouped by frame; within-frame order is file order.
class DetectionSet {
 public:
  void add(Detection det);
  const std::map<int, std::vector<Detection>>& frames() const { return frames_; }
  std::map<int, std::vector<Detection>>& frames() { return frames_; }
  size_t total() const;
  bool empty() const { return frames_.empty(); }

 private:
  std::map<int, std::vector<Detection>> frames_;
};

struct GtEntry {
  int id = 0;
  Box box;
  bool visible = true;
};

class GroundTruth {
 public:
  void add(int frame, GtEntry entry);  // throws on duplicate (frame, id)
  const std::map<int, std::vector<GtEntry>>& frames() const { return frames_; }
  bool empty() const { return frames_.empty(); }

 private:
  std::map<int, std::vector<GtEntry>> frames_;
};

struct ResultRow {
  int frame = 0;
  int track_id = 0;
  Box box;
};

}  // namespace ran
