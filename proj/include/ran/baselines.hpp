// Ablation predictors behind one interface: the full recurrent model, a GRU
// that predicts the Gaussian directly, a plain window average, and a
// time-invariant weighted window. All four share the sigma clamp and the
// masked-softmax convention.
#pragma once

#include <functional>
#include <string>
#include <variant>

#include "ran/ran_model.hpp"

namespace ran {

enum class PredictorKind { Ran, GruDirect, Ave, Tiv };

const char* to_string(PredictorKind kind);
PredictorKind predictor_kind_from_string(const std::string& name);

// Window average; only the deviations are trainable.
struct AveParams {
  Vec log_sigma;  // length N

  int input_dim() const { return static_cast<int>(log_sigma.size()); }
};

// Fixed (trainable but time-invariant) mixing logits over the window.
struct TivParams {
  Vec alpha_logits;  // length K
  Vec log_sigma;     // length N

  int input_dim() const { return static_cast<int>(log_sigma.size()); }
  int window() const { return static_cast<int>(alpha_logits.size()); }
};

// GRU whose head emits (mu, log sigma) directly; the window is kept filled
// for interface parity but never read by the prediction.
struct GruDirectParams {
  GruParams gru;
  Mat head_weight;  // 2N x d, rows [0,N) -> mu, rows [N,2N) -> log sigma
  Vec head_bias;    // 2N

  int input_dim() const { return gru.input_dim(); }
  int hidden_dim() const { return gru.hidden_dim(); }
};

using PredictorParams = std::variant<RanParams, GruDirectParams, AveParams, TivParams>;

PredictorKind kind_of(const PredictorParams& params);
int params_input_dim(const PredictorParams& params);

ConditionalGaussian ave_predict(const ExternalMemory& memory, const AveParams& params);
ConditionalGaussian tiv_predict(const ExternalMemory& memory, const TivParams& params);
ConditionalGaussian gru_direct_predict(const GruDirectParams& params, const Vec& h_prev);

// One modality of one predictor kind: parameters plus the window capacity,
// with uniform state plumbing so tracker and training code never branch on
// the kind.
struct Predictor {
  PredictorParams params;
  int window = 0;

  PredictorKind kind() const { return kind_of(params); }
  int input_dim() const { return params_input_dim(params); }

  RanState init_state(const Vec& first_input) const;
  RanState advance(RanState state, const Vec& x) const;
  ConditionalGaussian predict(const RanState& state) const;
  double score(const RanState& state, const Vec& x) const;
};

// Sibling appearance and motion predictors of one kind; the unit the tracker
// consumes and training produces.
struct TrackModel {
  Predictor appearance;
  Predictor motion;

  PredictorKind kind() const { return appearance.kind(); }
};

// Fixed-order traversal of every trainable tensor (matrices as their
// row-major storage). The order is the canonical flattening used by the
// optimizer, the finite-difference checker and checkpoint serialization.
void for_each_tensor(PredictorParams& params,
                     const std::function<void(std::vector<double>&)>& fn);
void for_each_tensor(const PredictorParams& params,
                     const std::function<void(const std::vector<double>&)>& fn);

size_t param_count(const PredictorParams& params);
void flatten_params(const PredictorParams& params, Vec& out);        // appends
void unflatten_params(PredictorParams& params, const Vec& flat, size_t& cursor);

// Zero-valued parameters with the same shapes; gradient accumulators.
PredictorParams zeros_like(const PredictorParams& params);
// y += a * x over every tensor.
void add_scaled(PredictorParams& y, double a, const PredictorParams& x);
void scale_params(PredictorParams& p, double s);

// Zero-initialized predictor of the given geometry. hidden_dim is ignored
// for kinds without a recurrent cell.
Predictor make_predictor(PredictorKind kind, int input_dim, int hidden_dim, int window);

}  // namespace ran
