#include "ran/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace ran {

double Box::diagonal() const { return std::sqrt(w * w + h * h); }

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

void DetectionSet::add(Detection det) {
  frames_[det.frame].push_back(std::move(det));
}

size_t DetectionSet::total() const {
  size_t n = 0;
  for (const auto& [frame, dets] : frames_) n += dets.size();
  return n;
}

void GroundTruth::add(int frame, GtEntry entry) {
  auto& rows = frames_[frame];
  for (const auto& existing : rows) {
    if (existing.id == entry.id) {
      throw std::invalid_argument("GroundTruth: duplicate id " + std::to_string(entry.id) +
                                  " in frame " + std::to_string(frame));
    }
  }
  rows.push_back(std::move(entry));
}

}  // namespace ran
