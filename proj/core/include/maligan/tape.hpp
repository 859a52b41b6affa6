#pragma once

#include <functional>
#include <string>
#include <vector>

#include "maligan/param_store.hpp"
#include "maligan/tensor.hpp"

namespace maligan::ad {

struct Var {
  int id = -1;
};

/// Recording tape for reverse-mode differentiation over a fixed op set:
/// matmul, add/sub/mul, sigmoid/tanh/exp/log, row softmax and fused row
/// log-softmax, embedding gather, column concat, sum/mean reduction, affine,
/// element pick, clamp. Enough for GRU / bi-GRU / embeddings / logistic head.
///
/// Every op validates operand shapes (errors name the op and both shapes) and
/// rejects non-finite outputs. backward() may be called once per recording and
/// accumulates d(output)/d(param) into the grads of every bound ParamStore.
class Tape {
 public:
  Var input(Tensor t);
  Var param(ParamStore& store, const std::string& name);
  Var constant(double v) { return input(Tensor::scalar(v)); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh_(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var embedding_row(Var table, std::size_t row);
  Var concat_cols(Var a, Var b);
  Var sum(Var a);
  Var mean(Var a);
  Var affine(Var a, double k, double c);  // k*x + c, elementwise
  Var pick(Var a, std::size_t flat_index);
  Var clamp(Var a, double lo, double hi);

  /// Reverse pass from a scalar output. Consumes the recording.
  void backward(Var output);

  const Tensor& value(Var v) const { return nodes_.at(check(v)).val; }
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    std::vector<double> adj;
    std::function<void(Tape&, const Node&)> back;  // null for leaves
  };
  struct ParamBinding {
    ParamStore* store;
    std::string name;
    int node;
  };

  std::vector<Node> nodes_;
  std::vector<ParamBinding> bindings_;
  bool consumed_ = false;

  std::size_t check(Var v) const;
  Var emit(const char* op, Tensor val, std::function<void(Tape&, const Node&)> back);
  Node& node(Var v) { return nodes_[check(v)]; }

  friend struct TapeOps;
};

}  // namespace maligan::ad
