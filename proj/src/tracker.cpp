#include "ran/tracker.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ran {

const char* to_string(Modality m) {
  switch (m) {
    case Modality::Appearance: return "a";
    case Modality::Motion: return "m";
    case Modality::Both: return "am";
  }
  return "?";
}

Modality modality_from_string(const std::string& name) {
  if (name == "a") return Modality::Appearance;
  if (name == "m") return Modality::Motion;
  if (name == "am") return Modality::Both;
  throw std::invalid_argument("unknown modality: " + name + " (expected a, m or am)");
}

Vec motion_feature(const Box& det_box, const Box& prev_box) {
  return {det_box.cx() - prev_box.cx(), det_box.cy() - prev_box.cy(), det_box.w, det_box.h};
}

std::vector<std::pair<int, int>> candidate_pairs(const std::vector<Track>& tracks,
                                                 const std::vector<Detection>& detections,
                                                 const TrackerConfig& config) {
  std::vector<std::pair<int, int>> pairs;
  for (size_t l = 0; l < tracks.size(); ++l) {
    const Box& ref = tracks[l].last_box;
    const double radius = config.gate_factor * ref.diagonal();
    for (size_t i = 0; i < detections.size(); ++i) {
      const Detection& det = detections[i];
      if (det.confidence < config.min_detection_confidence) continue;
      const double dx = det.box.cx() - ref.cx();
      const double dy = det.box.cy() - ref.cy();
      if (std::sqrt(dx * dx + dy * dy) <= radius) {
        pairs.emplace_back(static_cast<int>(l), static_cast<int>(i));
      }
    }
  }
  return pairs;
}

double association_score(const Track& track, const Detection& det, const TrackModel& model,
                         Modality modality) {
  double s = 0.0;
  if (modality != Modality::Motion) {
    s += model.appearance.score(track.appearance_state, det.appearance);
  }
  if (modality != Modality::Appearance) {
    const Vec b = motion_feature(det.box, track.last_box);
    s += model.motion.score(track.motion_state, b);
  }
  return s;
}

std::vector<ScoredPair> score_pairs_serial(const std::vector<Track>& tracks,
                                           const std::vector<Detection>& detections,
                                           const std::vector<std::pair<int, int>>& pairs,
                                           const TrackModel& model, Modality modality) {
  std::vector<ScoredPair> scored(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [l, i] = pairs[p];
    scored[p] = {l, i, association_score(tracks[l], detections[i], model, modality)};
  }
  return scored;
}

std::vector<ScoredPair> score_pairs(const std::vector<Track>& tracks,
                                    const std::vector<Detection>& detections,
                                    const std::vector<std::pair<int, int>>& pairs,
                                    const TrackModel& model, Modality modality, int jobs) {
  std::vector<ScoredPair> scored(pairs.size());
  const int n = static_cast<int>(pairs.size());
#pragma omp parallel for schedule(static) num_threads(jobs > 0 ? jobs : omp_get_max_threads())
  for (int p = 0; p < n; ++p) {
    const auto [l, i] = pairs[p];
    scored[p] = {l, i, association_score(tracks[l], detections[i], model, modality)};
  }
  return scored;
}

Assignment associate(const std::vector<Track>& tracks, size_t num_detections,
                     std::vector<ScoredPair> scored, double threshold) {
  std::sort(scored.begin(), scored.end(), [&tracks](const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (tracks[a.track_index].id != tracks[b.track_index].id) {
      return tracks[a.track_index].id < tracks[b.track_index].id;
    }
    return a.det_index < b.det_index;
  });

  Assignment out;
  std::vector<bool> track_taken(tracks.size(), false);
  std::vector<bool> det_taken(num_detections, false);
  for (const ScoredPair& p : scored) {
    if (p.score <= threshold) break;  // sorted, nothing below can match
    if (track_taken[p.track_index] || det_taken[p.det_index]) continue;
    track_taken[p.track_index] = true;
    det_taken[p.det_index] = true;
    out.matches.emplace_back(p.track_index, p.det_index);
  }
  for (size_t l = 0; l < tracks.size(); ++l) {
    if (!track_taken[l]) out.unmatched_tracks.push_back(static_cast<int>(l));
  }
  for (size_t i = 0; i < num_detections; ++i) {
    if (!det_taken[i]) out.unmatched_detections.push_back(static_cast<int>(i));
  }
  return out;
}

Track update_matched(Track track, const Detection& det, const TrackModel& model, int frame) {
  const Vec b = motion_feature(det.box, track.last_box);
  track.appearance_state = model.appearance.advance(std::move(track.appearance_state),
                                                    det.appearance);
  track.motion_state = model.motion.advance(std::move(track.motion_state), b);
  track.last_box = det.box;
  track.status = TrackStatus::Tracked;
  track.lost_count = 0;
  track.last_seen_frame = frame;
  track.history.push_back({frame, det.box, false});
  return track;
}

Track update_lost(Track track, const TrackModel& model, int frame) {
  const ConditionalGaussian g = model.motion.predict(track.motion_state);
  track.motion_state = model.motion.advance(std::move(track.motion_state), g.mu);
  Box next;
  next.w = std::max(g.mu[2], 1.0);  // direct-GRU means are unconstrained
  next.h = std::max(g.mu[3], 1.0);
  next.x = track.last_box.cx() + g.mu[0] - 0.5 * next.w;
  next.y = track.last_box.cy() + g.mu[1] - 0.5 * next.h;
  track.last_box = next;
  track.status = TrackStatus::Lost;
  track.lost_count += 1;
  track.history.push_back({frame, next, true});
  return track;
}

int lifecycle(std::vector<Track>& tracks, const std::vector<Detection>& detections,
              const std::vector<int>& unmatched_detections, const TrackModel& model,
              const TrackerConfig& config, int frame, int next_id) {
  std::erase_if(tracks, [&config](const Track& t) { return t.lost_count > config.t_terminate; });
  for (int i : unmatched_detections) {
    const Detection& det = detections[i];
    if (det.confidence < config.min_detection_confidence) continue;
    Track t;
    t.id = next_id++;
    t.appearance_state = model.appearance.init_state(det.appearance);
    t.motion_state = model.motion.init_state({0.0, 0.0, det.box.w, det.box.h});
    t.last_box = det.box;
    t.status = TrackStatus::Tracked;
    t.lost_count = 0;
    t.birth_frame = frame;
    t.last_seen_frame = frame;
    t.history.push_back({frame, det.box, false});
    tracks.push_back(std::move(t));
  }
  return next_id;
}

TrackStreamResult track_stream(const DetectionSet& detections, const TrackModel& model,
                               const TrackerConfig& config) {
  std::vector<std::pair<int, std::vector<Detection>>> frames;
  frames.reserve(detections.frames().size());
  for (const auto& [frame, dets] : detections.frames()) frames.emplace_back(frame, dets);
  return track_stream(frames, model, config);
}

TrackStreamResult track_stream(const std::vector<std::pair<int, std::vector<Detection>>>& frames,
                               const TrackModel& model, const TrackerConfig& config) {
  TrackStreamResult result;
  std::vector<Track> tracks;
  int next_id = 1;
  int prev_frame = 0;

  for (const auto& [frame, all_dets] : frames) {
    if (frame <= prev_frame) {
      throw std::invalid_argument("track_stream: frames must be strictly increasing");
    }
    prev_frame = frame;

    // gated = detections above the confidence floor; low-confidence ones are
    // invisible to both association and track creation.
    std::vector<Detection> dets;
    dets.reserve(all_dets.size());
    for (const Detection& d : all_dets) {
      if (d.confidence >= config.min_detection_confidence) dets.push_back(d);
    }

    const auto pairs = candidate_pairs(tracks, dets, config);
    const auto scored = score_pairs(tracks, dets, pairs, model, config.modality, config.jobs);
    const Assignment assignment =
        associate(tracks, dets.size(), scored, config.score_threshold);

    std::vector<Track> updated;
    updated.reserve(tracks.size());
    std::vector<bool> matched(tracks.size(), false);
    std::vector<int> matched_det(tracks.size(), -1);
    for (const auto& [l, i] : assignment.matches) {
      matched[l] = true;
      matched_det[l] = i;
    }
    for (size_t l = 0; l < tracks.size(); ++l) {
      if (matched[l]) {
        updated.push_back(update_matched(std::move(tracks[l]), dets[matched_det[l]], model, frame));
      } else {
        updated.push_back(update_lost(std::move(tracks[l]), model, frame));
      }
    }
    tracks = std::move(updated);

    next_id = lifecycle(tracks, dets, assignment.unmatched_detections, model, config, frame,
                        next_id);

    for (const Track& t : tracks) {
      if (t.status == TrackStatus::Tracked) {
        result.rows.push_back({frame, t.id, t.last_box});
      }
    }
  }
  result.final_tracks = std::move(tracks);
  return result;
}

}  // namespace ran
