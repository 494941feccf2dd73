// Maximum-likelihood training of any predictor kind: trajectory sampling
// from ground truth plus detections, sequence negative log-likelihood with
// hand-derived backpropagation through time, Adam, per-sequence recurrent
// dropout, and a finite-difference gradient checker.
#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ran/baselines.hpp"
#include "ran/data.hpp"

namespace ran {

struct EmptyDatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrajectoryStep {
  Vec motion;      // 4-vector, relative-offset convention of the tracker
  Vec appearance;  // N-vector
  bool visible = true;
};

struct TrajectorySample {
  std::vector<TrajectoryStep> steps;

  int length() const { return static_cast<int>(steps.size()); }
};

// Gradient of the joint loss, shaped exactly like the parameters.
struct ModelGradients {
  PredictorParams appearance;
  PredictorParams motion;
};

// One 0/1 mask per modality's hidden units, fixed for the whole sequence.
// Masked forward uses inverted scaling (h * mask / keep_prob) so keep_prob
// 1.0 is the identity.
struct DropoutPlan {
  Vec appearance_mask;
  Vec motion_mask;
  double keep_prob = 1.0;
};

struct SamplerConfig {
  int crop_min = 8;
  int crop_max = 20;
  double iou_threshold = 0.5;  // detection adopts a GT box when IoU exceeds this
};

// For each sampled ground-truth trajectory, picks at each visible frame one
// detection overlapping the GT box (IoU > threshold) uniformly at random;
// frames without such a detection become invisible steps. Sequences are
// randomly cropped to [crop_min, crop_max] steps. Deterministic per seed.
std::vector<TrajectorySample> sample_trajectories(const GroundTruth& gt,
                                                  const DetectionSet& dets, int batch,
                                                  uint64_t rng_seed,
                                                  const SamplerConfig& config = {});

struct SequenceLossDetail {
  double nll = 0.0;
  long steps = 0;  // number of contributing (scored) time steps
};

// Runs the model forward over the sample. Visible steps with at least one
// step of history contribute -log p(appearance) - log p(motion) and advance
// both states with the observed features; invisible steps contribute
// nothing, freeze the appearance state and advance the motion state with its
// own predicted mean.
SequenceLossDetail sequence_nll_detailed(const TrackModel& model, const TrajectorySample& sample,
                                         const DropoutPlan* plan = nullptr);
double sequence_nll(const TrackModel& model, const TrajectorySample& sample,
                    const DropoutPlan* plan = nullptr);

// Exact reverse-mode gradient of sequence_nll for every trainable parameter.
// The clamp on sigma and the masked softmax use subgradient zero in the
// inactive regions.
std::pair<SequenceLossDetail, ModelGradients> backward(const TrackModel& model,
                                                       const TrajectorySample& sample,
                                                       const DropoutPlan* plan = nullptr);

ModelGradients zero_gradients(const TrackModel& model);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  long step_count = 0;
};

AdamState make_adam_state(const TrackModel& model);
// Standard bias-corrected Adam over the flattened parameters. Throws
// TrainingDivergedError on nonfinite gradients.
void adam_step(TrackModel& model, const ModelGradients& grads, AdamState& state,
               const AdamConfig& config);

struct BatchGradient {
  ModelGradients grads;        // mean over the batch, fixed ascending-index sum
  double mean_nll_per_step = 0.0;
  double mean_nll_per_sequence = 0.0;
  long total_steps = 0;
};

// Per-sample backward passes are independent; the parallel version runs them
// on OpenMP threads into per-sample buffers and reduces in ascending sample
// order, so its output is bitwise identical to the serial one.
BatchGradient batch_gradient_serial(const TrackModel& model,
                                    const std::vector<TrajectorySample>& samples,
                                    const std::vector<DropoutPlan>& plans);
BatchGradient batch_gradient(const TrackModel& model,
                             const std::vector<TrajectorySample>& samples,
                             const std::vector<DropoutPlan>& plans, int jobs);

struct ModelDims {
  int app_input = 16;
  int app_hidden = 32;
  int motion_input = 4;
  int motion_hidden = 16;
  int window = 10;
};

TrackModel make_model(PredictorKind kind, const ModelDims& dims);  // zero parameters
// Uniform [-a, a] with a = 1/sqrt(fan_in) per matrix; vectors start at zero.
void init_params(TrackModel& model, std::mt19937_64& rng);

struct TrainConfig {
  int iterations = 200;
  int batch = 64;
  AdamConfig adam;
  double dropout_keep = 0.75;  // keep probability; 1.0 disables dropout
  SamplerConfig sampler;
  double grad_max_norm = 0.0;  // 0 disables clipping
  int jobs = 0;
};

struct TrainResult {
  TrackModel model;
  std::vector<double> loss_curve;  // per-iteration mean NLL per contributing step
};

TrainResult train(PredictorKind kind, const ModelDims& dims, const GroundTruth& gt,
                  const DetectionSet& dets, const TrainConfig& config, uint64_t seed);

struct GradCheckReport {
  double max_rel_error = 0.0;
  size_t worst_coordinate = 0;
  size_t coords_checked = 0;
  size_t coords_total = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central finite differences against the analytic gradient. Checks every
// coordinate when max_coords is 0 or the parameter count is below it,
// otherwise a seeded random subset of max_coords coordinates.
GradCheckReport grad_check(const TrackModel& model, const TrajectorySample& sample,
                           double epsilon, double tolerance, size_t max_coords = 0,
                           uint64_t subset_seed = 0);

// Flatten / unflatten across both modalities (appearance first).
Vec flatten_model(const TrackModel& model);
void unflatten_model(TrackModel& model, const Vec& flat);

}  // namespace ran
