#include "ran/training.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ran/tracker.hpp"

namespace ran {

namespace {

// ------------------------------------------------------------------
// Forward tape for one modality. The tape records every hidden state,
// every vector that enters the window (observed features are constants,
// means pushed during gaps are computed nodes), and one event per GRU
// advance / scored step / pushed mean. Backward replays it in reverse.
// ------------------------------------------------------------------

enum class GapPolicy { Freeze, AdvanceWithMean };

enum class EventType { Score, Mean, Advance };

struct TapeEvent {
  EventType type = EventType::Score;
  int h_in = -1;             // hidden node read by the head / GRU
  std::vector<int> mem;      // window node ids, newest first (Score/Mean)
  Vec target;                // Score: observed vector
  Vec alpha;                 // Score/Mean: mixing weights over mem (empty for direct GRU)
  Vec sigma;                 // Score: clamped deviations
  std::vector<bool> sigma_clamped;
  Vec mu;                    // Score/Mean: predicted mean
  int out_value = -1;        // Mean: node holding mu
  int h_out = -1;            // Advance: produced hidden node
  int input_value = -1;      // Advance: GRU input node
  Vec z, r, cand;            // Advance: gate activations
};

struct ModalityGrad {
  PredictorParams* g = nullptr;  // same variant alternative as the parameters
};

class ModalityTape {
 public:
  ModalityTape(const Predictor& pred, const Vec* mask, double keep_prob, GapPolicy policy)
      : pred_(pred), mask_(mask), keep_(keep_prob), policy_(policy) {}

  bool initialized() const { return initialized_; }
  double nll() const { return nll_; }
  long steps() const { return steps_; }

  void observe(const Vec& x) {
    if (!initialized_) {
      init(x);
      return;
    }
    score(x);
    advance(x, add_value(x, /*is_const=*/true));
  }

  void gap() {
    if (!initialized_ || policy_ == GapPolicy::Freeze) return;
    TapeEvent ev = predict_event(EventType::Mean);
    const int node = add_value(ev.mu, /*is_const=*/false);
    ev.out_value = node;
    events_.push_back(std::move(ev));
    advance(values_[node], node);
  }

  void backward(PredictorParams& grads) {
    value_adj_.assign(values_.size(), Vec());
    hidden_adj_.assign(hidden_.size(), Vec());
    for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
      switch (it->type) {
        case EventType::Score: backward_score(*it, grads); break;
        case EventType::Mean: backward_mean(*it, grads); break;
        case EventType::Advance: backward_advance(*it, grads); break;
      }
    }
  }

 private:
  const GruParams* gru_params() const {
    if (const auto* p = std::get_if<RanParams>(&pred_.params)) return &p->gru;
    if (const auto* p = std::get_if<GruDirectParams>(&pred_.params)) return &p->gru;
    return nullptr;
  }

  int add_value(Vec v, bool is_const) {
    values_.push_back(std::move(v));
    value_const_.push_back(is_const);
    return static_cast<int>(values_.size()) - 1;
  }

  void init(const Vec& x) {
    if (const GruParams* g = gru_params()) {
      hidden_.push_back(Vec(g->hidden_dim(), 0.0));
      cur_h_ = 0;
    }
    mem_.clear();
    mem_.insert(mem_.begin(), add_value(x, true));
    initialized_ = true;
  }

  // Computes (alpha, sigma, mu) from the current hidden state and window,
  // recording what backward needs. Sigma is filled only for Score events.
  TapeEvent predict_event(EventType type) {
    TapeEvent ev;
    ev.type = type;
    ev.h_in = cur_h_;
    ev.mem = mem_;
    const int valid = static_cast<int>(mem_.size());

    switch (pred_.kind()) {
      case PredictorKind::Ran: {
        const auto& p = std::get<RanParams>(pred_.params);
        const Vec raw = add(matvec(p.head.weight, hidden_[cur_h_]), p.head.bias);
        Vec logits(raw.begin(), raw.begin() + p.window());
        ev.alpha = masked_softmax(logits, valid);
        if (type == EventType::Score) {
          fill_sigma(ev, raw, p.window(), p.input_dim());
        }
        ev.mu = weighted_mem(ev.alpha);
        break;
      }
      case PredictorKind::Tiv: {
        const auto& p = std::get<TivParams>(pred_.params);
        ev.alpha = masked_softmax(p.alpha_logits, valid);
        if (type == EventType::Score) {
          fill_sigma_from_logsigma(ev, p.log_sigma);
        }
        ev.mu = weighted_mem(ev.alpha);
        break;
      }
      case PredictorKind::Ave: {
        const auto& p = std::get<AveParams>(pred_.params);
        ev.alpha.assign(valid, 1.0 / valid);
        if (type == EventType::Score) {
          fill_sigma_from_logsigma(ev, p.log_sigma);
        }
        // mu computed as (sum)/valid, matching ave_predict's rounding
        ev.mu.assign(pred_.input_dim(), 0.0);
        for (int k = 0; k < valid; ++k) axpy(ev.mu, 1.0, values_[mem_[k]]);
        for (double& v : ev.mu) v /= valid;
        break;
      }
      case PredictorKind::GruDirect: {
        const auto& p = std::get<GruDirectParams>(pred_.params);
        const Vec raw = add(matvec(p.head_weight, hidden_[cur_h_]), p.head_bias);
        const int n = p.input_dim();
        ev.mu.assign(raw.begin(), raw.begin() + n);
        if (type == EventType::Score) {
          fill_sigma(ev, raw, n, n);
        }
        break;
      }
    }
    return ev;
  }

  void fill_sigma(TapeEvent& ev, const Vec& raw, int offset, int n) {
    ev.sigma.resize(n);
    ev.sigma_clamped.resize(n);
    for (int j = 0; j < n; ++j) {
      const double s = std::exp(raw[offset + j]);
      ev.sigma[j] = std::clamp(s, kSigmaMin, kSigmaMax);
      ev.sigma_clamped[j] = s < kSigmaMin || s > kSigmaMax;
    }
  }

  void fill_sigma_from_logsigma(TapeEvent& ev, const Vec& log_sigma) {
    const int n = static_cast<int>(log_sigma.size());
    ev.sigma.resize(n);
    ev.sigma_clamped.resize(n);
    for (int j = 0; j < n; ++j) {
      const double s = std::exp(log_sigma[j]);
      ev.sigma[j] = std::clamp(s, kSigmaMin, kSigmaMax);
      ev.sigma_clamped[j] = s < kSigmaMin || s > kSigmaMax;
    }
  }

  Vec weighted_mem(const Vec& alpha) {
    Vec mu(pred_.input_dim(), 0.0);
    for (size_t k = 0; k < mem_.size(); ++k) axpy(mu, alpha[k], values_[mem_[k]]);
    return mu;
  }

  void score(const Vec& x) {
    TapeEvent ev = predict_event(EventType::Score);
    ev.target = x;
    nll_ -= diag_gaussian_logpdf(x, ev.mu, ev.sigma);
    steps_ += 1;
    events_.push_back(std::move(ev));
  }

  void advance(const Vec& x, int value_node) {
    if (const GruParams* g = gru_params()) {
      TapeEvent ev;
      ev.type = EventType::Advance;
      ev.h_in = cur_h_;
      ev.input_value = value_node;
      const Vec& h = hidden_[cur_h_];
      ev.z = sigmoid(add(matvec(g->update_in, x), matvec(g->update_hid, h)));
      ev.r = sigmoid(add(matvec(g->reset_in, x), matvec(g->reset_hid, h)));
      ev.cand = tanh(add(matvec(g->cand_in, x), matvec(g->cand_hid, hadamard(ev.r, h))));
      Vec out(h.size());
      for (size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 - ev.z[i]) * h[i] + ev.z[i] * ev.cand[i];
      }
      if (mask_ != nullptr) {
        for (size_t i = 0; i < out.size(); ++i) out[i] *= (*mask_)[i] / keep_;
      }
      hidden_.push_back(std::move(out));
      ev.h_out = static_cast<int>(hidden_.size()) - 1;
      cur_h_ = ev.h_out;
      events_.push_back(std::move(ev));
    }
    mem_.insert(mem_.begin(), value_node);
    if (static_cast<int>(mem_.size()) > pred_.window) mem_.pop_back();
  }

  // --- backward helpers -------------------------------------------------

  Vec& value_adj(int node) {
    if (value_adj_[node].empty()) value_adj_[node].assign(values_[node].size(), 0.0);
    return value_adj_[node];
  }

  Vec& hidden_adj(int node) {
    if (hidden_adj_[node].empty()) hidden_adj_[node].assign(hidden_[node].size(), 0.0);
    return hidden_adj_[node];
  }

  // d(softmax)/d(logits) applied to an adjoint over alpha (valid entries).
  static Vec softmax_backward(const Vec& alpha, const Vec& g_alpha) {
    const double inner = dot(alpha, g_alpha);
    Vec d(alpha.size());
    for (size_t k = 0; k < alpha.size(); ++k) d[k] = alpha[k] * (g_alpha[k] - inner);
    return d;
  }

  // Propagates an adjoint on mu (and optionally on the log-sigma head rows)
  // into the parameters, the hidden state and the window nodes.
  void backward_prediction(const TapeEvent& ev, const Vec& d_mu, const Vec* d_log_sigma,
                           PredictorParams& grads) {
    const int valid = static_cast<int>(ev.mem.size());
    switch (pred_.kind()) {
      case PredictorKind::Ran: {
        const auto& p = std::get<RanParams>(pred_.params);
        auto& g = std::get<RanParams>(grads);
        Vec g_alpha(valid);
        for (int k = 0; k < valid; ++k) {
          g_alpha[k] = dot(d_mu, values_[ev.mem[k]]);
          axpy(value_adj(ev.mem[k]), ev.alpha[k], d_mu);
        }
        const Vec d_logits = softmax_backward(Vec(ev.alpha.begin(), ev.alpha.begin() + valid),
                                              g_alpha);
        const Vec& h = hidden_[ev.h_in];
        Vec dh(h.size(), 0.0);
        for (int k = 0; k < valid; ++k) {
          g.head.bias[k] += d_logits[k];
          for (int c = 0; c < p.head.hidden_dim(); ++c) {
            g.head.weight(k, c) += d_logits[k] * h[c];
            dh[c] += d_logits[k] * p.head.weight(k, c);
          }
        }
        if (d_log_sigma != nullptr) {
          const int K = p.window();
          for (int j = 0; j < p.input_dim(); ++j) {
            g.head.bias[K + j] += (*d_log_sigma)[j];
            for (int c = 0; c < p.head.hidden_dim(); ++c) {
              g.head.weight(K + j, c) += (*d_log_sigma)[j] * h[c];
              dh[c] += (*d_log_sigma)[j] * p.head.weight(K + j, c);
            }
          }
        }
        axpy(hidden_adj(ev.h_in), 1.0, dh);
        break;
      }
      case PredictorKind::Tiv: {
        auto& g = std::get<TivParams>(grads);
        Vec g_alpha(valid);
        for (int k = 0; k < valid; ++k) {
          g_alpha[k] = dot(d_mu, values_[ev.mem[k]]);
          axpy(value_adj(ev.mem[k]), ev.alpha[k], d_mu);
        }
        const Vec d_logits = softmax_backward(Vec(ev.alpha.begin(), ev.alpha.begin() + valid),
                                              g_alpha);
        for (int k = 0; k < valid; ++k) g.alpha_logits[k] += d_logits[k];
        if (d_log_sigma != nullptr) {
          for (size_t j = 0; j < g.log_sigma.size(); ++j) g.log_sigma[j] += (*d_log_sigma)[j];
        }
        break;
      }
      case PredictorKind::Ave: {
        auto& g = std::get<AveParams>(grads);
        for (int k = 0; k < valid; ++k) {
          axpy(value_adj(ev.mem[k]), 1.0 / valid, d_mu);
        }
        if (d_log_sigma != nullptr) {
          for (size_t j = 0; j < g.log_sigma.size(); ++j) g.log_sigma[j] += (*d_log_sigma)[j];
        }
        break;
      }
      case PredictorKind::GruDirect: {
        const auto& p = std::get<GruDirectParams>(pred_.params);
        auto& g = std::get<GruDirectParams>(grads);
        const int n = p.input_dim();
        const Vec& h = hidden_[ev.h_in];
        Vec dh(h.size(), 0.0);
        for (int j = 0; j < n; ++j) {
          g.head_bias[j] += d_mu[j];
          for (int c = 0; c < p.hidden_dim(); ++c) {
            g.head_weight(j, c) += d_mu[j] * h[c];
            dh[c] += d_mu[j] * p.head_weight(j, c);
          }
        }
        if (d_log_sigma != nullptr) {
          for (int j = 0; j < n; ++j) {
            g.head_bias[n + j] += (*d_log_sigma)[j];
            for (int c = 0; c < p.hidden_dim(); ++c) {
              g.head_weight(n + j, c) += (*d_log_sigma)[j] * h[c];
              dh[c] += (*d_log_sigma)[j] * p.head_weight(n + j, c);
            }
          }
        }
        axpy(hidden_adj(ev.h_in), 1.0, dh);
        break;
      }
    }
  }

  void backward_score(const TapeEvent& ev, PredictorParams& grads) {
    const size_t n = ev.target.size();
    Vec d_mu(n), d_log_sigma(n);
    for (size_t j = 0; j < n; ++j) {
      const double e = (ev.target[j] - ev.mu[j]) / ev.sigma[j];
      d_mu[j] = -e / ev.sigma[j];                              // d(-logpdf)/d mu
      d_log_sigma[j] = ev.sigma_clamped[j] ? 0.0 : 1.0 - e * e;  // via sigma = exp(raw)
    }
    backward_prediction(ev, d_mu, &d_log_sigma, grads);
  }

  void backward_mean(const TapeEvent& ev, PredictorParams& grads) {
    const Vec& g_mu = value_adj_[ev.out_value];
    if (g_mu.empty()) return;  // mean never influenced a later loss term
    backward_prediction(ev, g_mu, nullptr, grads);
  }

  void backward_advance(const TapeEvent& ev, PredictorParams& grads) {
    Vec g_out = hidden_adj_[ev.h_out];
    if (g_out.empty()) return;
    if (mask_ != nullptr) {
      for (size_t i = 0; i < g_out.size(); ++i) g_out[i] *= (*mask_)[i] / keep_;
    }
    const GruParams* p = gru_params();
    GruParams* g = nullptr;
    if (auto* rp = std::get_if<RanParams>(&grads)) g = &rp->gru;
    else g = &std::get<GruDirectParams>(grads).gru;

    const Vec& h = hidden_[ev.h_in];
    const Vec& u = values_[ev.input_value];
    const size_t d = h.size();

    Vec d_cand(d), d_z(d), d_h(d);
    for (size_t i = 0; i < d; ++i) {
      d_cand[i] = g_out[i] * ev.z[i];
      d_z[i] = g_out[i] * (ev.cand[i] - h[i]);
      d_h[i] = g_out[i] * (1.0 - ev.z[i]);
    }
    Vec d_u(u.size(), 0.0);

    // candidate: cand = tanh(Wc u + Uc (r.h))
    Vec d_pre_c(d);
    for (size_t i = 0; i < d; ++i) d_pre_c[i] = d_cand[i] * (1.0 - ev.cand[i] * ev.cand[i]);
    add_outer(g->cand_in, d_pre_c, u);
    add_outer(g->cand_hid, d_pre_c, hadamard(ev.r, h));
    axpy(d_u, 1.0, matvec_t(p->cand_in, d_pre_c));
    const Vec t = matvec_t(p->cand_hid, d_pre_c);
    Vec d_r(d);
    for (size_t i = 0; i < d; ++i) {
      d_r[i] = t[i] * h[i];
      d_h[i] += t[i] * ev.r[i];
    }

    // update gate: z = sigmoid(Wz u + Uz h)
    Vec d_pre_z(d);
    for (size_t i = 0; i < d; ++i) d_pre_z[i] = d_z[i] * ev.z[i] * (1.0 - ev.z[i]);
    add_outer(g->update_in, d_pre_z, u);
    add_outer(g->update_hid, d_pre_z, h);
    axpy(d_u, 1.0, matvec_t(p->update_in, d_pre_z));
    axpy(d_h, 1.0, matvec_t(p->update_hid, d_pre_z));

    // reset gate: r = sigmoid(Wr u + Ur h)
    Vec d_pre_r(d);
    for (size_t i = 0; i < d; ++i) d_pre_r[i] = d_r[i] * ev.r[i] * (1.0 - ev.r[i]);
    add_outer(g->reset_in, d_pre_r, u);
    add_outer(g->reset_hid, d_pre_r, h);
    axpy(d_u, 1.0, matvec_t(p->reset_in, d_pre_r));
    axpy(d_h, 1.0, matvec_t(p->reset_hid, d_pre_r));

    axpy(hidden_adj(ev.h_in), 1.0, d_h);
    if (!value_const_[ev.input_value]) {
      axpy(value_adj(ev.input_value), 1.0, d_u);
    }
  }

  const Predictor& pred_;
  const Vec* mask_;
  double keep_;
  GapPolicy policy_;

  bool initialized_ = false;
  int cur_h_ = -1;
  std::vector<int> mem_;  // node ids, newest first
  std::vector<Vec> hidden_;
  std::vector<Vec> values_;
  std::vector<bool> value_const_;
  std::vector<TapeEvent> events_;
  std::vector<Vec> value_adj_;
  std::vector<Vec> hidden_adj_;

  double nll_ = 0.0;
  long steps_ = 0;
};

void run_sample(const TrajectorySample& sample, ModalityTape& app, ModalityTape& mot) {
  for (const TrajectoryStep& step : sample.steps) {
    if (step.visible) {
      app.observe(step.appearance);
      mot.observe(step.motion);
    } else {
      app.gap();
      mot.gap();
    }
  }
}

const Vec* mask_or_null(const Vec& mask, double keep) {
  if (keep >= 1.0 || mask.empty()) return nullptr;
  return &mask;
}

}  // namespace

SequenceLossDetail sequence_nll_detailed(const TrackModel& model, const TrajectorySample& sample,
                                         const DropoutPlan* plan) {
  static const DropoutPlan kNone;
  const DropoutPlan& p = plan != nullptr ? *plan : kNone;
  ModalityTape app(model.appearance, mask_or_null(p.appearance_mask, p.keep_prob), p.keep_prob,
                   GapPolicy::Freeze);
  ModalityTape mot(model.motion, mask_or_null(p.motion_mask, p.keep_prob), p.keep_prob,
                   GapPolicy::AdvanceWithMean);
  run_sample(sample, app, mot);
  return {app.nll() + mot.nll(), app.steps()};
}

double sequence_nll(const TrackModel& model, const TrajectorySample& sample,
                    const DropoutPlan* plan) {
  return sequence_nll_detailed(model, sample, plan).nll;
}

ModelGradients zero_gradients(const TrackModel& model) {
  return {zeros_like(model.appearance.params), zeros_like(model.motion.params)};
}

std::pair<SequenceLossDetail, ModelGradients> backward(const TrackModel& model,
                                                       const TrajectorySample& sample,
                                                       const DropoutPlan* plan) {
  static const DropoutPlan kNone;
  const DropoutPlan& p = plan != nullptr ? *plan : kNone;
  ModalityTape app(model.appearance, mask_or_null(p.appearance_mask, p.keep_prob), p.keep_prob,
                   GapPolicy::Freeze);
  ModalityTape mot(model.motion, mask_or_null(p.motion_mask, p.keep_prob), p.keep_prob,
                   GapPolicy::AdvanceWithMean);
  run_sample(sample, app, mot);

  ModelGradients grads = zero_gradients(model);
  app.backward(grads.appearance);
  mot.backward(grads.motion);
  return {{app.nll() + mot.nll(), app.steps()}, std::move(grads)};
}

AdamState make_adam_state(const TrackModel& model) {
  AdamState st;
  const size_t n = param_count(model.appearance.params) + param_count(model.motion.params);
  st.first_moment.assign(n, 0.0);
  st.second_moment.assign(n, 0.0);
  return st;
}

void adam_step(TrackModel& model, const ModelGradients& grads, AdamState& state,
               const AdamConfig& config) {
  Vec g;
  flatten_params(grads.appearance, g);
  flatten_params(grads.motion, g);
  if (!all_finite(g)) throw TrainingDivergedError("adam_step: nonfinite gradient");
  if (g.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: state size mismatch");
  }

  Vec theta = flatten_model(model);
  state.step_count += 1;
  const double c1 = 1.0 - std::pow(config.beta1, state.step_count);
  const double c2 = 1.0 - std::pow(config.beta2, state.step_count);
  for (size_t i = 0; i < theta.size(); ++i) {
    state.first_moment[i] = config.beta1 * state.first_moment[i] + (1.0 - config.beta1) * g[i];
    state.second_moment[i] =
        config.beta2 * state.second_moment[i] + (1.0 - config.beta2) * g[i] * g[i];
    const double m_hat = state.first_moment[i] / c1;
    const double v_hat = state.second_moment[i] / c2;
    theta[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
  unflatten_model(model, theta);
}

BatchGradient batch_gradient_serial(const TrackModel& model,
                                    const std::vector<TrajectorySample>& samples,
                                    const std::vector<DropoutPlan>& plans) {
  return batch_gradient(model, samples, plans, 1);
}

BatchGradient batch_gradient(const TrackModel& model,
                             const std::vector<TrajectorySample>& samples,
                             const std::vector<DropoutPlan>& plans, int jobs) {
  if (samples.empty()) throw EmptyDatasetError("batch_gradient: no samples");
  if (!plans.empty() && plans.size() != samples.size()) {
    throw std::invalid_argument("batch_gradient: plans/samples size mismatch");
  }
  const int n = static_cast<int>(samples.size());
  std::vector<ModelGradients> partial(n, zero_gradients(model));
  std::vector<double> nlls(n, 0.0);
  std::vector<long> steps(n, 0);

#pragma omp parallel for schedule(dynamic) \
    num_threads(jobs > 0 ? jobs : omp_get_max_threads())
  for (int b = 0; b < n; ++b) {
    const DropoutPlan* plan = plans.empty() ? nullptr : &plans[b];
    auto [detail, grads] = backward(model, samples[b], plan);
    partial[b] = std::move(grads);
    nlls[b] = detail.nll;
    steps[b] = detail.steps;
  }

  BatchGradient out;
  out.grads = zero_gradients(model);
  double nll_sum = 0.0;
  // ascending-index summation keeps the reduction bitwise reproducible
  for (int b = 0; b < n; ++b) {
    add_scaled(out.grads.appearance, 1.0, partial[b].appearance);
    add_scaled(out.grads.motion, 1.0, partial[b].motion);
    nll_sum += nlls[b];
    out.total_steps += steps[b];
  }
  scale_params(out.grads.appearance, 1.0 / n);
  scale_params(out.grads.motion, 1.0 / n);
  out.mean_nll_per_sequence = nll_sum / n;
  out.mean_nll_per_step = out.total_steps > 0 ? nll_sum / out.total_steps : 0.0;
  return out;
}

TrackModel make_model(PredictorKind kind, const ModelDims& dims) {
  TrackModel m;
  m.appearance = make_predictor(kind, dims.app_input, dims.app_hidden, dims.window);
  m.motion = make_predictor(kind, dims.motion_input, dims.motion_hidden, dims.window);
  return m;
}

namespace {
void init_mat(Mat& m, std::mt19937_64& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(m.cols));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : m.data) v = dist(rng);
}

void init_predictor(PredictorParams& params, std::mt19937_64& rng) {
  if (auto* p = std::get_if<RanParams>(&params)) {
    init_mat(p->gru.update_in, rng);
    init_mat(p->gru.reset_in, rng);
    init_mat(p->gru.cand_in, rng);
    init_mat(p->gru.update_hid, rng);
    init_mat(p->gru.reset_hid, rng);
    init_mat(p->gru.cand_hid, rng);
    init_mat(p->head.weight, rng);
  } else if (auto* p = std::get_if<GruDirectParams>(&params)) {
    init_mat(p->gru.update_in, rng);
    init_mat(p->gru.reset_in, rng);
    init_mat(p->gru.cand_in, rng);
    init_mat(p->gru.update_hid, rng);
    init_mat(p->gru.reset_hid, rng);
    init_mat(p->gru.cand_hid, rng);
    init_mat(p->head_weight, rng);
  }
  // AVE/TIV vectors and all biases stay zero: sigma starts at 1, weights uniform.
}
}  // namespace

void init_params(TrackModel& model, std::mt19937_64& rng) {
  init_predictor(model.appearance.params, rng);
  init_predictor(model.motion.params, rng);
}

Vec flatten_model(const TrackModel& model) {
  Vec flat;
  flatten_params(model.appearance.params, flat);
  flatten_params(model.motion.params, flat);
  return flat;
}

void unflatten_model(TrackModel& model, const Vec& flat) {
  size_t cursor = 0;
  unflatten_params(model.appearance.params, flat, cursor);
  unflatten_params(model.motion.params, flat, cursor);
  if (cursor != flat.size()) throw std::invalid_argument("unflatten_model: size mismatch");
}

std::vector<TrajectorySample> sample_trajectories(const GroundTruth& gt,
                                                  const DetectionSet& dets, int batch,
                                                  uint64_t rng_seed,
                                                  const SamplerConfig& config) {
  if (batch < 1) throw std::invalid_argument("sample_trajectories: batch must be >= 1");
  if (config.crop_min < 2 || config.crop_max < config.crop_min) {
    throw std::invalid_argument("sample_trajectories: bad crop range");
  }

  struct GtStep {
    int frame;
    Box box;
    bool visible;
  };
  std::map<int, std::vector<GtStep>> trajectories;
  for (const auto& [frame, rows] : gt.frames()) {
    for (const GtEntry& e : rows) trajectories[e.id].push_back({frame, e.box, e.visible});
  }

  // Detections overlapping the GT box enough to stand in for it.
  auto matching_dets = [&](int frame, const Box& box) {
    std::vector<const Detection*> out;
    auto it = dets.frames().find(frame);
    if (it == dets.frames().end()) return out;
    for (const Detection& d : it->second) {
      if (iou(d.box, box) > config.iou_threshold) out.push_back(&d);
    }
    return out;
  };

  std::vector<int> eligible;
  for (const auto& [id, steps] : trajectories) {
    int usable = 0;
    for (const GtStep& s : steps) {
      if (s.visible && !matching_dets(s.frame, s.box).empty()) usable += 1;
    }
    if (usable >= 2) eligible.push_back(id);
  }
  if (eligible.empty()) {
    throw EmptyDatasetError("sample_trajectories: no trajectory with >= 2 usable steps");
  }

  std::mt19937_64 rng(rng_seed);
  std::vector<TrajectorySample> out;
  out.reserve(batch);

  while (static_cast<int>(out.size()) < batch) {
    for (int attempt = 0;; ++attempt) {
      const int id = eligible[std::uniform_int_distribution<size_t>(0, eligible.size() - 1)(rng)];
      const auto& steps = trajectories[id];
      const int first_frame = steps.front().frame;
      const int last_frame = steps.back().frame;
      const int span = last_frame - first_frame + 1;

      int crop_len = std::uniform_int_distribution<int>(config.crop_min, config.crop_max)(rng);
      crop_len = std::min(crop_len, span);
      const int start =
          first_frame + (span > crop_len
                             ? std::uniform_int_distribution<int>(0, span - crop_len)(rng)
                             : 0);
      const bool exhausted = attempt >= 64;
      const int lo = exhausted ? first_frame : start;
      const int hi = exhausted ? last_frame : start + crop_len - 1;

      std::map<int, GtStep> by_frame;
      for (const GtStep& s : steps) by_frame[s.frame] = s;

      TrajectorySample sample;
      const Box* prev_box = nullptr;
      int visible_count = 0;
      for (int frame = lo; frame <= hi; ++frame) {
        TrajectoryStep ts;
        ts.visible = false;
        auto it = by_frame.find(frame);
        if (it != by_frame.end() && it->second.visible) {
          const auto cands = matching_dets(frame, it->second.box);
          if (!cands.empty()) {
            const Detection* pick =
                cands[std::uniform_int_distribution<size_t>(0, cands.size() - 1)(rng)];
            ts.visible = true;
            ts.appearance = pick->appearance;
            ts.motion = prev_box == nullptr
                            ? Vec{0.0, 0.0, pick->box.w, pick->box.h}
                            : motion_feature(pick->box, *prev_box);
            prev_box = &pick->box;
            visible_count += 1;
          }
        }
        sample.steps.push_back(std::move(ts));
      }

      // trim invisible edges
      while (!sample.steps.empty() && !sample.steps.front().visible) {
        sample.steps.erase(sample.steps.begin());
      }
      while (!sample.steps.empty() && !sample.steps.back().visible) {
        sample.steps.pop_back();
      }

      if (visible_count >= 2 && sample.length() >= 2) {
        // fill placeholder features on invisible steps so shapes stay uniform
        size_t app_dim = 0;
        for (const auto& s : sample.steps) {
          if (s.visible) {
            app_dim = s.appearance.size();
            break;
          }
        }
        for (auto& s : sample.steps) {
          if (!s.visible) {
            s.appearance.assign(app_dim, 0.0);
            s.motion.assign(4, 0.0);
          }
        }
        out.push_back(std::move(sample));
        break;
      }
      if (attempt > 64) {
        throw EmptyDatasetError("sample_trajectories: could not build a usable sample");
      }
    }
  }
  return out;
}

namespace {
DropoutPlan make_plan(const TrackModel& model, double keep, std::mt19937_64& rng) {
  DropoutPlan plan;
  plan.keep_prob = keep;
  auto hidden_dim = [](const Predictor& p) {
    if (const auto* r = std::get_if<RanParams>(&p.params)) return r->hidden_dim();
    if (const auto* g = std::get_if<GruDirectParams>(&p.params)) return g->hidden_dim();
    return 0;
  };
  std::bernoulli_distribution keep_dist(keep);
  plan.appearance_mask.resize(hidden_dim(model.appearance));
  for (double& m : plan.appearance_mask) m = keep_dist(rng) ? 1.0 : 0.0;
  plan.motion_mask.resize(hidden_dim(model.motion));
  for (double& m : plan.motion_mask) m = keep_dist(rng) ? 1.0 : 0.0;
  return plan;
}
}  // namespace

TrainResult train(PredictorKind kind, const ModelDims& dims, const GroundTruth& gt,
                  const DetectionSet& dets, const TrainConfig& config, uint64_t seed) {
  if (gt.empty() || dets.empty()) throw EmptyDatasetError("train: empty dataset");
  std::mt19937_64 rng(seed);

  TrainResult result;
  result.model = make_model(kind, dims);
  init_params(result.model, rng);
  AdamState adam = make_adam_state(result.model);

  const bool use_dropout = config.dropout_keep < 1.0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    const uint64_t sample_seed = rng();
    auto samples = sample_trajectories(gt, dets, config.batch, sample_seed, config.sampler);
    std::vector<DropoutPlan> plans;
    if (use_dropout) {
      plans.reserve(samples.size());
      for (size_t b = 0; b < samples.size(); ++b) {
        plans.push_back(make_plan(result.model, config.dropout_keep, rng));
      }
    }
    BatchGradient bg = batch_gradient(result.model, samples, plans, config.jobs);

    if (config.grad_max_norm > 0.0) {
      Vec g;
      flatten_params(bg.grads.appearance, g);
      flatten_params(bg.grads.motion, g);
      const double norm = std::sqrt(dot(g, g));
      if (norm > config.grad_max_norm) {
        const double s = config.grad_max_norm / norm - 1.0;
        add_scaled(bg.grads.appearance, s, bg.grads.appearance);
        add_scaled(bg.grads.motion, s, bg.grads.motion);
      }
    }

    adam_step(result.model, bg.grads, adam, config.adam);
    result.loss_curve.push_back(bg.mean_nll_per_step);
  }
  return result;
}

GradCheckReport grad_check(const TrackModel& model, const TrajectorySample& sample,
                           double epsilon, double tolerance, size_t max_coords,
                           uint64_t subset_seed) {
  if (epsilon <= 0.0 || epsilon > 1e-2) {
    throw std::invalid_argument("grad_check: epsilon out of (0, 1e-2]");
  }
  auto [detail, grads] = backward(model, sample, nullptr);
  (void)detail;
  Vec analytic;
  flatten_params(grads.appearance, analytic);
  flatten_params(grads.motion, analytic);

  std::vector<size_t> coords(analytic.size());
  for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (max_coords > 0 && coords.size() > max_coords) {
    std::mt19937_64 rng(subset_seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  report.coords_total = analytic.size();
  report.coords_checked = coords.size();

  Vec theta = flatten_model(model);
  TrackModel probe = model;
  for (size_t i : coords) {
    const double saved = theta[i];
    theta[i] = saved + epsilon;
    unflatten_model(probe, theta);
    const double f_plus = sequence_nll(probe, sample);
    theta[i] = saved - epsilon;
    unflatten_model(probe, theta);
    const double f_minus = sequence_nll(probe, sample);
    theta[i] = saved;

    const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace ran
