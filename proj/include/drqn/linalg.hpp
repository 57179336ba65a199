#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace drqn {

// Row-major dense matrix of doubles. Just enough linear algebra for the
// Q-network; kernels are plain loops that the optimizer vectorizes.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

  const double* row(std::size_t r) const { return a.data() + r * cols; }
  double* row(std::size_t r) { return a.data() + r * cols; }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }
};

// out = m * x
inline void matvec(const Matrix& m, const double* x, double* out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
}

// out += m * x
inline void matvec_add(const Matrix& m, const double* x, double* out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    out[r] += acc;
  }
}

// out += m^T * x  (accumulates row-by-row so memory access stays contiguous)
inline void matvec_transpose_add(const Matrix& m, const double* x, double* out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.row(r);
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += xr * w[c];
  }
}

// m += u * v^T
inline void outer_add(Matrix& m, const double* u, const double* v) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* w = m.row(r);
    const double ur = u[r];
    if (ur == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) w[c] += ur * v[c];
  }
}

inline void vec_add(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace drqn
