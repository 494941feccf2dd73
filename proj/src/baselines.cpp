#include "ran/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>
#include <utility>

namespace ran {

const char* to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::Ran: return "ran";
    case PredictorKind::GruDirect: return "gru";
    case PredictorKind::Ave: return "ave";
    case PredictorKind::Tiv: return "tiv";
  }
  return "?";
}

PredictorKind predictor_kind_from_string(const std::string& name) {
  if (name == "ran") return PredictorKind::Ran;
  if (name == "gru") return PredictorKind::GruDirect;
  if (name == "ave") return PredictorKind::Ave;
  if (name == "tiv") return PredictorKind::Tiv;
  throw std::invalid_argument("unknown predictor kind: " + name);
}

PredictorKind kind_of(const PredictorParams& params) {
  switch (params.index()) {
    case 0: return PredictorKind::Ran;
    case 1: return PredictorKind::GruDirect;
    case 2: return PredictorKind::Ave;
    default: return PredictorKind::Tiv;
  }
}

int params_input_dim(const PredictorParams& params) {
  return std::visit([](const auto& p) { return p.input_dim(); }, params);
}

namespace {
Vec clamped_sigma(const Vec& log_sigma) {
  Vec s(log_sigma.size());
  for (size_t j = 0; j < s.size(); ++j) {
    s[j] = std::clamp(std::exp(log_sigma[j]), kSigmaMin, kSigmaMax);
  }
  return s;
}
}  // namespace

ConditionalGaussian ave_predict(const ExternalMemory& memory, const AveParams& params) {
  const int valid = memory.valid_count();
  if (valid < 1) throw NoHistoryError("ave_predict: empty memory");
  ConditionalGaussian g;
  g.mu.assign(memory.dim(), 0.0);
  for (int k = 0; k < valid; ++k) {
    axpy(g.mu, 1.0, memory.slot(k));
  }
  for (double& v : g.mu) v /= valid;
  g.sigma = clamped_sigma(params.log_sigma);
  return g;
}

ConditionalGaussian tiv_predict(const ExternalMemory& memory, const TivParams& params) {
  const int valid = memory.valid_count();
  if (valid < 1) throw NoHistoryError("tiv_predict: empty memory");
  if (params.window() < valid) {
    throw std::invalid_argument("tiv_predict: window shorter than memory");
  }
  const Vec alpha = masked_softmax(params.alpha_logits, valid);
  ConditionalGaussian g;
  g.mu.assign(memory.dim(), 0.0);
  for (int k = 0; k < valid; ++k) {
    axpy(g.mu, alpha[k], memory.slot(k));
  }
  g.sigma = clamped_sigma(params.log_sigma);
  return g;
}

ConditionalGaussian gru_direct_predict(const GruDirectParams& params, const Vec& h_prev) {
  const int n = params.input_dim();
  const Vec raw = add(matvec(params.head_weight, h_prev), params.head_bias);
  ConditionalGaussian g;
  g.mu.assign(raw.begin(), raw.begin() + n);
  g.sigma.resize(n);
  for (int j = 0; j < n; ++j) {
    g.sigma[j] = std::clamp(std::exp(raw[n + j]), kSigmaMin, kSigmaMax);
  }
  return g;
}

RanState Predictor::init_state(const Vec& first_input) const {
  if (static_cast<int>(first_input.size()) != input_dim()) {
    throw std::invalid_argument("Predictor::init_state: input dim mismatch");
  }
  RanState s;
  if (const auto* ran = std::get_if<RanParams>(&params)) {
    s.hidden.assign(ran->hidden_dim(), 0.0);
  } else if (const auto* gd = std::get_if<GruDirectParams>(&params)) {
    s.hidden.assign(gd->hidden_dim(), 0.0);
  }
  s.memory = ExternalMemory(window, input_dim());
  s.memory.push(first_input);
  return s;
}

RanState Predictor::advance(RanState state, const Vec& x) const {
  if (const auto* ran = std::get_if<RanParams>(&params)) {
    state.hidden = gru_step(ran->gru, x, state.hidden);
  } else if (const auto* gd = std::get_if<GruDirectParams>(&params)) {
    state.hidden = gru_step(gd->gru, x, state.hidden);
  }
  state.memory.push(x);
  return state;
}

ConditionalGaussian Predictor::predict(const RanState& state) const {
  switch (kind()) {
    case PredictorKind::Ran: {
      const auto& p = std::get<RanParams>(params);
      const ArCoefficients coeffs =
          predict_coefficients(p.head, state.hidden, state.memory.valid_count());
      return predict_distribution(state.memory, coeffs);
    }
    case PredictorKind::GruDirect: {
      if (state.memory.valid_count() < 1) throw NoHistoryError("predict: empty memory");
      return gru_direct_predict(std::get<GruDirectParams>(params), state.hidden);
    }
    case PredictorKind::Ave:
      return ave_predict(state.memory, std::get<AveParams>(params));
    case PredictorKind::Tiv:
      return tiv_predict(state.memory, std::get<TivParams>(params));
  }
  throw std::logic_error("unreachable");
}

double Predictor::score(const RanState& state, const Vec& x) const {
  const ConditionalGaussian g = predict(state);
  return diag_gaussian_logpdf(x, g.mu, g.sigma);
}

namespace {
template <typename Params, typename Fn>
void visit_tensors(Params& p, const Fn& fn) {
  using Decayed = std::remove_cv_t<Params>;
  if constexpr (std::is_same_v<Decayed, RanParams>) {
    fn(p.gru.update_in.data);
    fn(p.gru.reset_in.data);
    fn(p.gru.cand_in.data);
    fn(p.gru.update_hid.data);
    fn(p.gru.reset_hid.data);
    fn(p.gru.cand_hid.data);
    fn(p.head.weight.data);
    fn(p.head.bias);
  } else if constexpr (std::is_same_v<Decayed, GruDirectParams>) {
    fn(p.gru.update_in.data);
    fn(p.gru.reset_in.data);
    fn(p.gru.cand_in.data);
    fn(p.gru.update_hid.data);
    fn(p.gru.reset_hid.data);
    fn(p.gru.cand_hid.data);
    fn(p.head_weight.data);
    fn(p.head_bias);
  } else if constexpr (std::is_same_v<Decayed, AveParams>) {
    fn(p.log_sigma);
  } else {
    fn(p.alpha_logits);
    fn(p.log_sigma);
  }
}
}  // namespace

void for_each_tensor(PredictorParams& params,
                     const std::function<void(std::vector<double>&)>& fn) {
  std::visit([&fn](auto& p) { visit_tensors(p, fn); }, params);
}

void for_each_tensor(const PredictorParams& params,
                     const std::function<void(const std::vector<double>&)>& fn) {
  std::visit([&fn](const auto& p) { visit_tensors(p, fn); }, params);
}

size_t param_count(const PredictorParams& params) {
  size_t n = 0;
  for_each_tensor(params, [&n](const std::vector<double>& t) { n += t.size(); });
  return n;
}

void flatten_params(const PredictorParams& params, Vec& out) {
  for_each_tensor(params, [&out](const std::vector<double>& t) {
    out.insert(out.end(), t.begin(), t.end());
  });
}

void unflatten_params(PredictorParams& params, const Vec& flat, size_t& cursor) {
  for_each_tensor(params, [&flat, &cursor](std::vector<double>& t) {
    if (cursor + t.size() > flat.size()) {
      throw std::invalid_argument("unflatten_params: flat vector too short");
    }
    std::copy(flat.begin() + cursor, flat.begin() + cursor + t.size(), t.begin());
    cursor += t.size();
  });
}

PredictorParams zeros_like(const PredictorParams& params) {
  PredictorParams copy = params;
  for_each_tensor(copy, [](std::vector<double>& t) { std::fill(t.begin(), t.end(), 0.0); });
  return copy;
}

void add_scaled(PredictorParams& y, double a, const PredictorParams& x) {
  if (y.index() != x.index()) throw std::invalid_argument("add_scaled: kind mismatch");
  std::vector<const std::vector<double>*> xs;
  for_each_tensor(x, [&xs](const std::vector<double>& t) { xs.push_back(&t); });
  size_t i = 0;
  for_each_tensor(y, [&xs, &i, a](std::vector<double>& t) {
    const std::vector<double>& src = *xs[i++];
    if (src.size() != t.size()) throw std::invalid_argument("add_scaled: shape mismatch");
    for (size_t j = 0; j < t.size(); ++j) t[j] += a * src[j];
  });
}

void scale_params(PredictorParams& p, double s) {
  for_each_tensor(p, [s](std::vector<double>& t) {
    for (double& v : t) v *= s;
  });
}

Predictor make_predictor(PredictorKind kind, int input_dim, int hidden_dim, int window) {
  if (input_dim < 1 || window < 1) {
    throw std::invalid_argument("make_predictor: dims must be positive");
  }
  Predictor p;
  p.window = window;
  switch (kind) {
    case PredictorKind::Ran: {
      RanParams rp;
      rp.gru = GruParams::zeros(hidden_dim, input_dim);
      rp.head = ArHead::zeros(window, input_dim, hidden_dim);
      p.params = std::move(rp);
      break;
    }
    case PredictorKind::GruDirect: {
      GruDirectParams gp;
      gp.gru = GruParams::zeros(hidden_dim, input_dim);
      gp.head_weight = Mat(2 * input_dim, hidden_dim);
      gp.head_bias = Vec(2 * input_dim, 0.0);
      p.params = std::move(gp);
      break;
    }
    case PredictorKind::Ave:
      p.params = AveParams{Vec(input_dim, 0.0)};
      break;
    case PredictorKind::Tiv:
      p.params = TivParams{Vec(window, 0.0), Vec(input_dim, 0.0)};
      break;
  }
  return p;
}

}  // namespace ran
