// Recurrent autoregressive model of one feature modality: a sliding window
// of recent inputs (external memory), a GRU hidden state (internal memory),
// and a linear head that turns the hidden state into mixing weights over the
// window plus per-dimension log standard deviations. Prediction is a
// diagonal Gaussian whose mean is the weighted window average.
#pragma once

#include <deque>

#include "ran/numerics.hpp"

namespace ran {

// Predicted standard deviations are clamped to this range after exp().
constexpr double kSigmaMin = 1e-4;
constexpr double kSigmaMax = 1e4;

// Thrown when a prediction is requested from a state with no stored inputs.
struct NoHistoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ring buffer of the most recent feature vectors, newest first:
// slot(0) is the last input, slot(valid_count()-1) the oldest retained one.
class ExternalMemory {
 public:
  ExternalMemory() = default;
  ExternalMemory(int capacity, int dim);

  void push(Vec v);  // insert newest, evict oldest when full
  int valid_count() const { return static_cast<int>(slots_.size()); }
  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  const Vec& slot(int k) const { return slots_[k]; }

 private:
  int capacity_ = 0;
  int dim_ = 0;
  std::deque<Vec> slots_;
};

// Gate matrices of a bias-free GRU. *_in act on the input, *_hid on the
// previous hidden state.
struct GruParams {
  Mat update_in, reset_in, cand_in;     // d x N
  Mat update_hid, reset_hid, cand_hid;  // d x d

  int input_dim() const { return update_in.cols; }
  int hidden_dim() const { return update_in.rows; }

  static GruParams zeros(int hidden_dim, int input_dim);
};

// Linear head mapping the hidden state to (window logits, log deviations):
// rows [0,window) produce mixing logits, rows [window, window+input_dim)
// produce log standard deviations.
struct ArHead {
  Mat weight;  // (window + input_dim) x d
  Vec bias;    // window + input_dim
  int window = 0;

  int input_dim() const { return weight.rows - window; }
  int hidden_dim() const { return weight.cols; }

  static ArHead zeros(int window, int input_dim, int hidden_dim);
};

struct RanParams {
  GruParams gru;
  ArHead head;

  int input_dim() const { return gru.input_dim(); }
  int hidden_dim() const { return gru.hidden_dim(); }
  int window() const { return head.window; }
};

// Per-trajectory state: hidden vector plus template window. Value semantics;
// operations return new states and never mutate their inputs.
struct RanState {
  Vec hidden;
  ExternalMemory memory;
};

// Mixing weights over window slots (zero on slots without history) and the
// clamped standard deviations.
struct ArCoefficients {
  Vec alpha;  // length = window capacity, sums to 1 over valid slots
  Vec sigma;  // length = input dim, in [kSigmaMin, kSigmaMax]
};

struct ConditionalGaussian {
  Vec mu;
  Vec sigma;
};

// One GRU update: z = g(Wz x + Uz h), r = g(Wr x + Ur h),
// c = tanh(W x + U (r.h)), h' = (1-z).h + z.c
Vec gru_step(const GruParams& params, const Vec& x, const Vec& h_prev);

// Head output for a window with valid_count filled slots. Logits of unfilled
// slots are excluded from the softmax and their weights are exactly zero.
ArCoefficients predict_coefficients(const ArHead& head, const Vec& h_prev, int valid_count);

// mu = sum_k alpha_k * slot(k); sigma copied from the coefficients.
ConditionalGaussian predict_distribution(const ExternalMemory& memory,
                                         const ArCoefficients& coeffs);

// Log-density of x under the state's predicted Gaussian. Does not mutate.
double score_candidate(const RanParams& params, const RanState& state, const Vec& x);

// New state with the GRU advanced by x and x pushed onto the window.
RanState advance(const RanParams& params, RanState state, const Vec& x);

// Zero hidden state and a window holding exactly first_input.
RanState init_state(const RanParams& params, const Vec& first_input);

}  // namespace ran
