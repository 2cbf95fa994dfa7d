#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qgrid::nn {

// Dense row-major matrix of doubles. Doubles keep finite-difference
// gradient checks meaningful.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> data)
      : rows(r), cols(c), d(std::move(data)) {}

  double& operator()(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return d[static_cast<size_t>(r) * cols + c];
  }
  size_t size() const { return d.size(); }
  bool same_shape(const Mat& o) const {
    return rows == o.rows && cols == o.cols;
  }
  void zero() { std::fill(d.begin(), d.end(), 0.0); }

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat full(int r, int c, double v) {
    Mat m(r, c);
    std::fill(m.d.begin(), m.d.end(), v);
    return m;
  }
};

inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul shape mismatch");
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.d[static_cast<size_t>(i) * a.cols];
    double* crow = &c.d[static_cast<size_t>(i) * c.cols];
    for (int j = 0; j < a.cols; ++j) {
      double av = arow[j];
      if (av == 0.0) continue;
      const double* brow = &b.d[static_cast<size_t>(j) * b.cols];
      for (int k = 0; k < b.cols; ++k) crow[k] += av * brow[k];
    }
  }
  return c;
}

}  // namespace qgrid::nn
