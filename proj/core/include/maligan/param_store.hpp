#pragma once

#include <map>
#include <span>
#include <string>

#include "maligan/tensor.hpp"

namespace maligan {

/// Named parameter tensors plus per-parameter optimizer state.
///
/// The flat view concatenates parameters in lexicographic name order
/// (std::map iteration order), row-major within each tensor. That ordering is
/// the contract every GradientVector in this library is aligned to.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Shape shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Tensor>& entries() const { return params_; }
  std::map<std::string, Tensor>& entries() { return params_; }

  std::size_t flat_size() const;
  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;
  void set_flat_values(std::span<const double> v);
  void add_flat_to_grads(std::span<const double> g);
  void zero_grads();

  /// Standard SGD / Adam updates. Grads must be finite (error names the
  /// offending parameter); grads are zeroed after a successful step.
  void sgd_step(double lr);
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Checkpoint format (documented in the README): magic "MALICKPT",
  /// u32 version, u32 count, then per parameter: u32 name length, name bytes,
  /// u32 ndim, u64 dims, f64 values — all little-endian. Round-trips
  /// bit-exactly. Optimizer state is not checkpointed.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  struct AdamState {
    std::vector<double> m, v;
  };
  std::map<std::string, Tensor> params_;
  std::map<std::string, AdamState> adam_;
  long adam_t_ = 0;
};

}  // namespace maligan
