#include "ran/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ran {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)

void check_same_length(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch");
  }
}
}  // namespace

Mat::Mat(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
  if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative shape");
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vec softmax(const Vec& v) {
  if (v.empty()) throw std::invalid_argument("softmax: empty input");
  return masked_softmax(v, static_cast<int>(v.size()));
}

Vec masked_softmax(const Vec& v, int valid_count) {
  if (valid_count < 1 || valid_count > static_cast<int>(v.size())) {
    throw std::invalid_argument("masked_softmax: valid_count out of range");
  }
  Vec out(v.size(), 0.0);
  double m = v[0];
  for (int i = 1; i < valid_count; ++i) m = std::max(m, v[i]);
  double sum = 0.0;
  for (int i = 0; i < valid_count; ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (int i = 0; i < valid_count; ++i) out[i] /= sum;
  return out;
}

double diag_gaussian_logpdf(const Vec& x, const Vec& mu, const Vec& sigma) {
  check_same_length(x, mu, "diag_gaussian_logpdf");
  check_same_length(x, sigma, "diag_gaussian_logpdf");
  double acc = 0.0;
  for (size_t j = 0; j < x.size(); ++j) {
    if (sigma[j] <= 0.0) throw std::domain_error("diag_gaussian_logpdf: sigma <= 0");
    const double z = (x[j] - mu[j]) / sigma[j];
    acc += -kHalfLog2Pi - std::log(sigma[j]) - 0.5 * z * z;
  }
  return acc;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec sigmoid(const Vec& v) {
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vec tanh(const Vec& v) {
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

Vec matvec(const Mat& m, const Vec& v) {
  if (static_cast<int>(v.size()) != m.cols) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  Vec out(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + static_cast<size_t>(r) * m.cols;
    double acc = 0.0;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

Vec matvec_t(const Mat& m, const Vec& v) {
  if (static_cast<int>(v.size()) != m.rows) {
    throw std::invalid_argument("matvec_t: shape mismatch");
  }
  Vec out(m.cols, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + static_cast<size_t>(r) * m.cols;
    const double s = v[r];
    for (int c = 0; c < m.cols; ++c) out[c] += s * row[c];
  }
  return out;
}

Vec add(const Vec& a, const Vec& b) {
  check_same_length(a, b, "add");
  Vec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vec sub(const Vec& a, const Vec& b) {
  check_same_length(a, b, "sub");
  Vec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vec hadamard(const Vec& a, const Vec& b) {
  check_same_length(a, b, "hadamard");
  Vec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vec scale(const Vec& v, double s) {
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * s;
  return out;
}

double dot(const Vec& a, const Vec& b) {
  check_same_length(a, b, "dot");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void add_outer(Mat& out, const Vec& u, const Vec& v) {
  if (out.rows != static_cast<int>(u.size()) || out.cols != static_cast<int>(v.size())) {
    throw std::invalid_argument("add_outer: shape mismatch");
  }
  for (int r = 0; r < out.rows; ++r) {
    double* row = out.data.data() + static_cast<size_t>(r) * out.cols;
    const double s = u[r];
    for (int c = 0; c < out.cols; ++c) row[c] += s * v[c];
  }
}

void axpy(Vec& y, double a, const Vec& x) {
  check_same_length(y, x, "axpy");
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Mat& m) { return all_finite(m.data); }

}  // namespace ran
