// Dense vector/matrix kernels and scalar nonlinearities. Everything is
// double precision; matrices are small, dense and row-major.
#pragma once

#include <cstddef>
#include <vector>

namespace ran {

using Vec = std::vector<double>;

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Mat() = default;
  Mat(int r, int c, double fill = 0.0);

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  static Mat identity(int n);
};

// exp(v_i) / sum_j exp(v_j), computed with max-subtraction so large logits
// cannot overflow. Throws std::invalid_argument on empty input.
Vec softmax(const Vec& v);

// Softmax over the first valid_count entries; the remaining entries of the
// result are exactly zero.
Vec masked_softmax(const Vec& v, int valid_count);

// sum_j [ -0.5*ln(2*pi) - ln(sigma_j) - 0.5*((x_j-mu_j)/sigma_j)^2 ].
// Throws std::domain_error if any sigma_j <= 0, std::invalid_argument on
// length mismatch.
double diag_gaussian_logpdf(const Vec& x, const Vec& mu, const Vec& sigma);

double sigmoid(double x);
Vec sigmoid(const Vec& v);
Vec tanh(const Vec& v);

Vec matvec(const Mat& m, const Vec& v);
// m^T * v without materializing the transpose.
Vec matvec_t(const Mat& m, const Vec& v);

Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec hadamard(const Vec& a, const Vec& b);
Vec scale(const Vec& v, double s);
double dot(const Vec& a, const Vec& b);

// out += u * v^T
void add_outer(Mat& out, const Vec& u, const Vec& v);
// y += a * x
void axpy(Vec& y, double a, const Vec& x);

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

}  // namespace ran
