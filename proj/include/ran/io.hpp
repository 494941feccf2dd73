// Readers and writers for the MOTChallenge-style CSV formats, the appearance
// feature sidecar, result files and binary model checkpoints. Formatting is
// canonical and locale-independent so golden files round-trip byte-exactly.
#pragma once

#include <cstdint>
#include <string>

#include "ran/baselines.hpp"
#include "ran/data.hpp"

namespace ran {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lines are `frame,id,x,y,w,h,conf[,x3d,y3d,z3d...]`; the id field is
// ignored (detection files carry -1). Trailing fields are tolerated.
DetectionSet read_detections(const std::string& path);
void write_detections(const std::string& path, const DetectionSet& dets);

// Same CSV shape with real ids; the 7th field is the active flag and rows
// with flag 0 are marked invisible. Duplicate (frame, id) is an error.
GroundTruth read_ground_truth(const std::string& path);
void write_ground_truth(const std::string& path, const GroundTruth& gt);

// Rows `frame,det_index,v1,...,vN` joined onto detections by frame and
// 0-based within-frame index; every detection must receive exactly one row.
void read_features(const std::string& path, DetectionSet& dets);
void write_features(const std::string& path, const DetectionSet& dets);

// Rows `frame,track_id,x,y,w,h,1,-1,-1,-1`, box values with two fractional
// digits, sorted by (frame, track_id).
void write_results(const std::string& path, std::vector<ResultRow> rows);
std::vector<ResultRow> read_results(const std::string& path);

struct Checkpoint {
  uint32_t version = 1;
  TrackModel model;
  uint64_t seed = 0;
  uint64_t iterations = 0;
};

// Self-describing little-endian binary container; load(save(c)) is bitwise
// identical including every tensor.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Canonical numeric formatting helpers (locale independent).
std::string format_fixed2(double v);        // no exponent, 2 fractional digits
std::string format_shortest(double v);      // shortest round-trip decimal

}  // namespace ran
