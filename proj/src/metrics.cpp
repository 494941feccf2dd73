#include "ran/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

namespace ran {

namespace {

struct GtTimeline {
  std::vector<int> visible_frames;  // ordered
  std::vector<bool> covered;        // parallel to visible_frames
};

}  // namespace

MetricsReport clearmot(const GroundTruth& gt, const std::vector<ResultRow>& hyp,
                       double iou_threshold) {
  std::map<int, std::vector<ResultRow>> hyp_frames;
  for (const ResultRow& r : hyp) hyp_frames[r.frame].push_back(r);

  std::set<int> all_frames;
  for (const auto& [f, rows] : gt.frames()) all_frames.insert(f);
  for (const auto& [f, rows] : hyp_frames) all_frames.insert(f);

  MetricsReport rep;
  double iou_sum = 0.0;
  std::map<int, int> last_match;        // gt id -> hyp id, persists across gaps
  std::map<int, GtTimeline> timelines;  // gt id -> coverage over visible frames

  for (int frame : all_frames) {
    std::vector<GtEntry> visible;
    if (auto it = gt.frames().find(frame); it != gt.frames().end()) {
      for (const GtEntry& e : it->second) {
        if (e.visible) visible.push_back(e);
      }
    }
    std::sort(visible.begin(), visible.end(),
              [](const GtEntry& a, const GtEntry& b) { return a.id < b.id; });
    static const std::vector<ResultRow> kNoRows;
    auto hit = hyp_frames.find(frame);
    const std::vector<ResultRow>& hrows = hit != hyp_frames.end() ? hit->second : kNoRows;

    std::vector<bool> g_used(visible.size(), false);
    std::vector<bool> h_used(hrows.size(), false);
    std::vector<std::pair<size_t, size_t>> matches;

    // Keep still-valid correspondences from earlier frames first.
    for (size_t g = 0; g < visible.size(); ++g) {
      auto prev = last_match.find(visible[g].id);
      if (prev == last_match.end()) continue;
      for (size_t h = 0; h < hrows.size(); ++h) {
        if (h_used[h] || hrows[h].track_id != prev->second) continue;
        if (iou(visible[g].box, hrows[h].box) >= iou_threshold) {
          g_used[g] = true;
          h_used[h] = true;
          matches.emplace_back(g, h);
        }
        break;  // ids are unique per frame in tracker output
      }
    }

    // Greedy descending IoU over the remainder.
    struct Cand {
      double overlap;
      size_t g, h;
    };
    std::vector<Cand> cands;
    for (size_t g = 0; g < visible.size(); ++g) {
      if (g_used[g]) continue;
      for (size_t h = 0; h < hrows.size(); ++h) {
        if (h_used[h]) continue;
        const double o = iou(visible[g].box, hrows[h].box);
        if (o >= iou_threshold) cands.push_back({o, g, h});
      }
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      if (visible[a.g].id != visible[b.g].id) return visible[a.g].id < visible[b.g].id;
      return hrows[a.h].track_id < hrows[b.h].track_id;
    });
    for (const Cand& c : cands) {
      if (g_used[c.g] || h_used[c.h]) continue;
      g_used[c.g] = true;
      h_used[c.h] = true;
      matches.emplace_back(c.g, c.h);
    }

    for (const auto& [g, h] : matches) {
      const int gt_id = visible[g].id;
      const int hyp_id = hrows[h].track_id;
      auto prev = last_match.find(gt_id);
      if (prev != last_match.end() && prev->second != hyp_id) rep.ids += 1;
      last_match[gt_id] = hyp_id;
      const double o = iou(visible[g].box, hrows[h].box);
      iou_sum += o;
      rep.num_matches += 1;
      rep.match_log.push_back({frame, gt_id, hyp_id, o});
    }

    rep.total_gt += static_cast<long>(visible.size());
    for (size_t h = 0; h < hrows.size(); ++h) {
      if (!h_used[h]) rep.fp += 1;
    }
    for (size_t g = 0; g < visible.size(); ++g) {
      if (!g_used[g]) rep.fn += 1;
      auto& tl = timelines[visible[g].id];
      tl.visible_frames.push_back(frame);
      tl.covered.push_back(g_used[g]);
    }
  }

  rep.motp = rep.num_matches > 0 ? iou_sum / rep.num_matches : 0.0;
  rep.mota = rep.total_gt > 0
                 ? 1.0 - static_cast<double>(rep.fp + rep.fn + rep.ids) / rep.total_gt
                 : 1.0;

  long mt = 0, ml = 0;
  for (const auto& [id, tl] : timelines) {
    long covered = 0;
    for (size_t i = 0; i < tl.covered.size(); ++i) {
      if (tl.covered[i]) covered += 1;
      if (i > 0 && tl.covered[i - 1] && !tl.covered[i]) rep.frag += 1;
    }
    const double ratio = static_cast<double>(covered) / tl.visible_frames.size();
    if (ratio >= 0.8) mt += 1;
    if (ratio <= 0.2) ml += 1;
  }
  if (!timelines.empty()) {
    rep.mt_fraction = static_cast<double>(mt) / timelines.size();
    rep.ml_fraction = static_cast<double>(ml) / timelines.size();
  }
  return rep;
}

std::string format_report(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "MOTA  %8.4f\n"
                "MOTP  %8.4f\n"
                "FP    %8ld\n"
                "FN    %8ld\n"
                "IDS   %8ld\n"
                "Frag  %8ld\n"
                "MT    %7.1f%%\n"
                "ML    %7.1f%%\n"
                "GT    %8ld\n",
                r.mota, r.motp, r.fp, r.fn, r.ids, r.frag, 100.0 * r.mt_fraction,
                100.0 * r.ml_fraction, r.total_gt);
  return buf;
}

std::string report_to_csv(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "metric,value\nmota,%.6f\nmotp,%.6f\nfp,%ld\nfn,%ld\nids,%ld\nfrag,%ld\n"
                "mt_fraction,%.6f\nml_fraction,%.6f\ntotal_gt,%ld\n",
                r.mota, r.motp, r.fp, r.fn, r.ids, r.frag, r.mt_fraction, r.ml_fraction,
                r.total_gt);
  return buf;
}

}  // namespace ran
