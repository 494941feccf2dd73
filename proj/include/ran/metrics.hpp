// CLEAR-MOT evaluation of tracker output against ground truth.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ran/data.hpp"

namespace ran {

struct MatchLogEntry {
  int frame = 0;
  int gt_id = 0;
  int hyp_id = 0;
  double overlap = 0.0;
};

struct MetricsReport {
  double mota = 0.0;
  double motp = 0.0;  // mean IoU over matches
  long fp = 0;
  long fn = 0;
  long ids = 0;
  long frag = 0;
  double mt_fraction = 0.0;
  double ml_fraction = 0.0;
  long total_gt = 0;      // visible ground-truth boxes
  long num_matches = 0;
  std::vector<MatchLogEntry> match_log;
};

// Per frame: correspondences from the previous frame are kept while their
// IoU stays at or above the threshold, then remaining pairs are matched
// greedily by descending IoU. A ground-truth trajectory matched to a
// different hypothesis id than before counts one id switch.
MetricsReport clearmot(const GroundTruth& gt, const std::vector<ResultRow>& hyp,
                       double iou_threshold = 0.5);

std::string format_report(const MetricsReport& r);       // aligned text
std::string report_to_csv(const MetricsReport& r);       // metric,value rows

// Re-runs a pure evaluation per value; rows are independent of order.
template <typename T>
std::vector<std::pair<T, MetricsReport>> sweep(
    const std::vector<T>& values, const std::function<MetricsReport(const T&)>& eval_fn) {
  std::vector<std::pair<T, MetricsReport>> table;
  table.reserve(values.size());
  for (const T& v : values) table.emplace_back(v, eval_fn(v));
  return table;
}

}  // namespace ran
