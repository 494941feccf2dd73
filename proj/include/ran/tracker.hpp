// Online tracking loop: per-frame gating, log-likelihood association scoring
// under the sibling appearance/motion predictors, greedy one-to-one
// assignment, and track lifecycle (update / lost / terminate / spawn).
#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ran/baselines.hpp"
#include "ran/data.hpp"

namespace ran {

enum class Modality { Appearance, Motion, Both };

const char* to_string(Modality m);
Modality modality_from_string(const std::string& name);

enum class TrackStatus { Tracked, Lost };

struct TrackEvent {
  int frame = 0;
  Box box;
  bool was_predicted = false;  // true for boxes extrapolated while lost
};

struct Track {
  int id = 0;
  RanState appearance_state;
  RanState motion_state;
  Box last_box;
  TrackStatus status = TrackStatus::Tracked;
  int lost_count = 0;
  int birth_frame = 0;
  int last_seen_frame = 0;
  std::vector<TrackEvent> history;
};

struct TrackerConfig {
  double score_threshold = -40.0;  // log domain; matches must score above this
  double gate_factor = 2.0;        // candidate radius in units of box diagonal
  int t_terminate = 20;            // max consecutive lost frames
  double min_detection_confidence = 0.0;
  Modality modality = Modality::Both;
  int jobs = 0;  // >0 caps the pair-scoring threads
};

struct Assignment {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

struct ScoredPair {
  int track_index = 0;
  int det_index = 0;
  double score = 0.0;
};

// [dcx, dcy, w, h]: detection center relative to the previous box center,
// plus the detection extents.
Vec motion_feature(const Box& det_box, const Box& prev_box);

// Pairs whose center distance is at most gate_factor * diagonal(last_box),
// boundary inclusive; detections below the confidence floor are excluded.
std::vector<std::pair<int, int>> candidate_pairs(const std::vector<Track>& tracks,
                                                 const std::vector<Detection>& detections,
                                                 const TrackerConfig& config);

// log Pr(appearance) + log Pr(motion); either term can be dropped via the
// modality setting.
double association_score(const Track& track, const Detection& det, const TrackModel& model,
                         Modality modality);

// Scores every candidate pair. The parallel version distributes pairs over
// OpenMP threads; output order and values are identical to the serial one.
std::vector<ScoredPair> score_pairs_serial(const std::vector<Track>& tracks,
                                           const std::vector<Detection>& detections,
                                           const std::vector<std::pair<int, int>>& pairs,
                                           const TrackModel& model, Modality modality);
std::vector<ScoredPair> score_pairs(const std::vector<Track>& tracks,
                                    const std::vector<Detection>& detections,
                                    const std::vector<std::pair<int, int>>& pairs,
                                    const TrackModel& model, Modality modality, int jobs);

// Greedy one-to-one: pairs sorted by descending score (ties: lower track id,
// then lower detection index), accepted while both sides are free and the
// score exceeds the threshold.
Assignment associate(const std::vector<Track>& tracks, size_t num_detections,
                     std::vector<ScoredPair> scored, double threshold);

Track update_matched(Track track, const Detection& det, const TrackModel& model, int frame);
Track update_lost(Track track, const TrackModel& model, int frame);

// Terminates tracks lost for more than t_terminate frames and spawns tracks
// from unmatched detections. Returns the next unused id.
int lifecycle(std::vector<Track>& tracks, const std::vector<Detection>& detections,
              const std::vector<int>& unmatched_detections, const TrackModel& model,
              const TrackerConfig& config, int frame, int next_id);

struct TrackStreamResult {
  std::vector<ResultRow> rows;
  std::vector<Track> final_tracks;  // live tracks after the last frame
};

TrackStreamResult track_stream(const DetectionSet& detections, const TrackModel& model,
                               const TrackerConfig& config);
// Lower-level entry point; frames must be strictly increasing.
TrackStreamResult track_stream(const std::vector<std::pair<int, std::vector<Detection>>>& frames,
                               const TrackModel& model, const TrackerConfig& config);

}  // namespace ran
