#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace maligan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s);

/// Dense 64-bit real tensor. Row-major. `grad` is empty until ensure_grad().
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), values(shape_numel(shape), fill) {}

  static Tensor from(Shape s, std::vector<double> v) {
    if (shape_numel(s) != v.size())
      throw std::invalid_argument("Tensor::from: shape " + shape_str(s) +
                                  " does not match value count " + std::to_string(v.size()));
    Tensor t;
    t.shape = std::move(s);
    t.values = std::move(v);
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  std::size_t numel() const { return values.size(); }

  std::size_t rows() const {
    if (shape.size() != 2) throw std::logic_error("Tensor::rows: not 2-d");
    return shape[0];
  }
  std::size_t cols() const {
    if (shape.size() != 2) throw std::logic_error("Tensor::cols: not 2-d");
    return shape[1];
  }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
  void zero_grad() { grad.assign(values.size(), 0.0); }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace maligan
