#include "ran/ran_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace ran {

ExternalMemory::ExternalMemory(int capacity, int dim) : capacity_(capacity), dim_(dim) {
  if (capacity < 1) throw std::invalid_argument("ExternalMemory: capacity must be >= 1");
  if (dim < 1) throw std::invalid_argument("ExternalMemory: dim must be >= 1");
}

void ExternalMemory::push(Vec v) {
  if (static_cast<int>(v.size()) != dim_) {
    throw std::invalid_argument("ExternalMemory::push: dimension mismatch");
  }
  slots_.push_front(std::move(v));
  if (static_cast<int>(slots_.size()) > capacity_) slots_.pop_back();
}

GruParams GruParams::zeros(int hidden_dim, int input_dim) {
  GruParams p;
  p.update_in = Mat(hidden_dim, input_dim);
  p.reset_in = Mat(hidden_dim, input_dim);
  p.cand_in = Mat(hidden_dim, input_dim);
  p.update_hid = Mat(hidden_dim, hidden_dim);
  p.reset_hid = Mat(hidden_dim, hidden_dim);
  p.cand_hid = Mat(hidden_dim, hidden_dim);
  return p;
}

ArHead ArHead::zeros(int window, int input_dim, int hidden_dim) {
  ArHead h;
  h.weight = Mat(window + input_dim, hidden_dim);
  h.bias = Vec(window + input_dim, 0.0);
  h.window = window;
  return h;
}

Vec gru_step(const GruParams& params, const Vec& x, const Vec& h_prev) {
  if (static_cast<int>(x.size()) != params.input_dim() ||
      static_cast<int>(h_prev.size()) != params.hidden_dim()) {
    throw std::invalid_argument("gru_step: shape mismatch");
  }
  const Vec z = sigmoid(add(matvec(params.update_in, x), matvec(params.update_hid, h_prev)));
  const Vec r = sigmoid(add(matvec(params.reset_in, x), matvec(params.reset_hid, h_prev)));
  const Vec c = tanh(add(matvec(params.cand_in, x), matvec(params.cand_hid, hadamard(r, h_prev))));
  Vec h(h_prev.size());
  for (size_t i = 0; i < h.size(); ++i) {
    h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * c[i];
  }
  return h;
}

ArCoefficients predict_coefficients(const ArHead& head, const Vec& h_prev, int valid_count) {
  if (static_cast<int>(h_prev.size()) != head.hidden_dim()) {
    throw std::invalid_argument("predict_coefficients: hidden dim mismatch");
  }
  if (valid_count < 1) throw NoHistoryError("predict_coefficients: no stored inputs");
  if (valid_count > head.window) {
    throw std::invalid_argument("predict_coefficients: valid_count exceeds window");
  }
  Vec raw = add(matvec(head.weight, h_prev), head.bias);
  ArCoefficients out;
  Vec logits(raw.begin(), raw.begin() + head.window);
  out.alpha = masked_softmax(logits, valid_count);
  out.sigma.resize(head.input_dim());
  for (int j = 0; j < head.input_dim(); ++j) {
    out.sigma[j] = std::clamp(std::exp(raw[head.window + j]), kSigmaMin, kSigmaMax);
  }
  return out;
}

ConditionalGaussian predict_distribution(const ExternalMemory& memory,
                                         const ArCoefficients& coeffs) {
  const int valid = memory.valid_count();
  if (valid < 1) throw NoHistoryError("predict_distribution: empty memory");
  if (static_cast<int>(coeffs.alpha.size()) < valid) {
    throw std::invalid_argument("predict_distribution: coefficients shorter than memory");
  }
  ConditionalGaussian g;
  g.mu.assign(memory.dim(), 0.0);
  for (int k = 0; k < valid; ++k) {
    axpy(g.mu, coeffs.alpha[k], memory.slot(k));
  }
  g.sigma = coeffs.sigma;
  return g;
}

double score_candidate(const RanParams& params, const RanState& state, const Vec& x) {
  const ArCoefficients coeffs =
      predict_coefficients(params.head, state.hidden, state.memory.valid_count());
  const ConditionalGaussian g = predict_distribution(state.memory, coeffs);
  return diag_gaussian_logpdf(x, g.mu, g.sigma);
}

RanState advance(const RanParams& params, RanState state, const Vec& x) {
  state.hidden = gru_step(params.gru, x, state.hidden);
  state.memory.push(x);
  return state;
}

RanState init_state(const RanParams& params, const Vec& first_input) {
  if (static_cast<int>(first_input.size()) != params.input_dim()) {
    throw std::invalid_argument("init_state: input dim mismatch");
  }
  RanState s;
  s.hidden.assign(params.hidden_dim(), 0.0);
  s.memory = ExternalMemory(params.window(), params.input_dim());
  s.memory.push(first_input);
  return s;
}

}  // namespace ran
