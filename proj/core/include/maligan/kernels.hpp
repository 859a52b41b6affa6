#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace maligan::kernels {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Max-subtracted row softmax; the single softmax used everywhere so sampling
/// and log-prob paths agree bit-for-bit.
inline void softmax_row(std::span<const double> in, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : in) mx = std::max(mx, v);
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - mx);
    total += out[i];
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] /= total;
}

inline std::vector<double> softmax(std::span<const double> in) {
  std::vector<double> out(in.size());
  softmax_row(in, out);
  return out;
}

/// Fused log-softmax: log(x_i) - max - log(sum exp(x - max)).
inline void log_softmax_row(std::span<const double> in, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : in) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : in) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - lse;
}

inline std::vector<double> log_softmax(std::span<const double> in) {
  std::vector<double> out(in.size());
  log_softmax_row(in, out);
  return out;
}

/// y = x^T W for row vector x (len R) and matrix W (R x C), plus optional bias.
inline std::vector<double> matvec_row(std::span<const double> x, const std::vector<double>& w,
                                      std::size_t rows, std::size_t cols) {
  std::vector<double> y(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double xv = x[r];
    if (xv == 0.0) continue;
    const double* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += xv * wr[c];
  }
  return y;
}

/// Neumaier compensated accumulator.
struct Accumulator {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double get() const { return sum + comp; }
};

}  // namespace maligan::kernels
