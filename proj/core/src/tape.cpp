#include "maligan/tape.hpp"

#include <cmath>

#include "maligan/kernels.hpp"

namespace maligan::ad {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

void require_finite(const char* op, const Tensor& t) {
  if (!t.finite()) throw std::runtime_error(std::string(op) + ": non-finite output value");
}

}  // namespace

std::size_t Tape::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::logic_error("Tape: variable does not belong to this tape");
  return static_cast<std::size_t>(v.id);
}

Var Tape::emit(const char* op, Tensor val, std::function<void(Tape&, const Node&)> back) {
  require_finite(op, val);
  Node n;
  n.val = std::move(val);
  n.adj.assign(n.val.numel(), 0.0);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::input(Tensor t) { return emit("input", std::move(t), nullptr); }

Var Tape::param(ParamStore& store, const std::string& name) {
  Var v = emit("param", store.at(name), nullptr);
  bindings_.push_back({&store, name, v.id});
  return v;
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.numel() != 1) throw std::logic_error("Tape::scalar: not a scalar");
  return t.values[0];
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape("add", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] += tb.values[i];
  return emit("add", std::move(out), [a, b](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    auto& gb = t.node(b).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) {
      ga[i] += self.adj[i];
      gb[i] += self.adj[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape("sub", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] -= tb.values[i];
  return emit("sub", std::move(out), [a, b](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    auto& gb = t.node(b).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) {
      ga[i] += self.adj[i];
      gb[i] -= self.adj[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape("mul", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] *= tb.values[i];
  return emit("mul", std::move(out), [a, b](Tape& t, const Node& self) {
    const auto& va = t.node(a).val.values;
    const auto& vb = t.node(b).val.values;
    auto& ga = t.node(a).adj;
    auto& gb = t.node(b).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) {
      ga[i] += self.adj[i] * vb[i];
      gb[i] += self.adj[i] * va[i];
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.cols() != tb.rows())
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(ta.shape) + " vs " +
                                shape_str(tb.shape));
  const std::size_t R = ta.rows(), K = ta.cols(), C = tb.cols();
  Tensor out({R, C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t k = 0; k < K; ++k) {
      const double av = ta.at(r, k);
      if (av == 0.0) continue;
      for (std::size_t c = 0; c < C; ++c) out.values[r * C + c] += av * tb.values[k * C + c];
    }
  return emit("matmul", std::move(out), [a, b, R, K, C](Tape& t, const Node& self) {
    const auto& va = t.node(a).val.values;
    const auto& vb = t.node(b).val.values;
    auto& ga = t.node(a).adj;
    auto& gb = t.node(b).adj;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const double go = self.adj[r * C + c];
        if (go == 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) {
          ga[r * K + k] += go * vb[k * C + c];
          gb[k * C + c] += go * va[r * K + k];
        }
      }
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (auto& v : out.values) v = kernels::sigmoid(v);
  return emit("sigmoid", std::move(out), [a](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) {
      const double s = self.val.values[i];
      ga[i] += self.adj[i] * s * (1.0 - s);
    }
  });
}

Var Tape::tanh_(Var a) {
  Tensor out = value(a);
  for (auto& v : out.values) v = std::tanh(v);
  return emit("tanh", std::move(out), [a](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) {
      const double y = self.val.values[i];
      ga[i] += self.adj[i] * (1.0 - y * y);
    }
  });
}

Var Tape::exp_(Var a) {
  Tensor out = value(a);
  for (auto& v : out.values) v = std::exp(v);
  return emit("exp", std::move(out), [a](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) ga[i] += self.adj[i] * self.val.values[i];
  });
}

Var Tape::log_(Var a) {
  Tensor out = value(a);
  for (auto& v : out.values) {
    if (v <= 0.0) throw std::domain_error("log: nonpositive operand");
    v = std::log(v);
  }
  return emit("log", std::move(out), [a](Tape& t, const Node& self) {
    const auto& va = t.node(a).val.values;
    auto& ga = t.node(a).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) ga[i] += self.adj[i] / va[i];
  });
}

Var Tape::softmax_rows(Var a) {
  const Tensor& ta = value(a);
  if (ta.shape.size() != 2) throw std::invalid_argument("softmax_rows: operand not 2-d, shape " + shape_str(ta.shape));
  const std::size_t R = ta.rows(), C = ta.cols();
  Tensor out({R, C});
  for (std::size_t r = 0; r < R; ++r)
    kernels::softmax_row({ta.values.data() + r * C, C}, {out.values.data() + r * C, C});
  return emit("softmax_rows", std::move(out), [a, R, C](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (std::size_t r = 0; r < R; ++r) {
      const double* p = self.val.values.data() + r * C;
      const double* go = self.adj.data() + r * C;
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += go[c] * p[c];
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += p[c] * (go[c] - dot);
    }
  });
}

Var Tape::log_softmax_rows(Var a) {
  const Tensor& ta = value(a);
  if (ta.shape.size() != 2)
    throw std::invalid_argument("log_softmax_rows: operand not 2-d, shape " + shape_str(ta.shape));
  const std::size_t R = ta.rows(), C = ta.cols();
  Tensor out({R, C});
  for (std::size_t r = 0; r < R; ++r)
    kernels::log_softmax_row({ta.values.data() + r * C, C}, {out.values.data() + r * C, C});
  return emit("log_softmax_rows", std::move(out), [a, R, C](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (std::size_t r = 0; r < R; ++r) {
      const double* lsm = self.val.values.data() + r * C;
      const double* go = self.adj.data() + r * C;
      double total = 0.0;
      for (std::size_t c = 0; c < C; ++c) total += go[c];
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += go[c] - std::exp(lsm[c]) * total;
    }
  });
}

Var Tape::embedding_row(Var table, std::size_t row) {
  const Tensor& tt = value(table);
  if (tt.shape.size() != 2 || row >= tt.rows())
    throw std::invalid_argument("embedding_row: row " + std::to_string(row) +
                                " out of range for table " + shape_str(tt.shape));
  const std::size_t C = tt.cols();
  Tensor out({1, C});
  std::copy(tt.values.begin() + row * C, tt.values.begin() + (row + 1) * C, out.values.begin());
  return emit("embedding_row", std::move(out), [table, row, C](Tape& t, const Node& self) {
    auto& ga = t.node(table).adj;
    for (std::size_t c = 0; c < C; ++c) ga[row * C + c] += self.adj[c];
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.rows() != tb.rows())
    throw std::invalid_argument("concat_cols: shape mismatch " + shape_str(ta.shape) + " vs " +
                                shape_str(tb.shape));
  const std::size_t R = ta.rows(), Ca = ta.cols(), Cb = tb.cols();
  Tensor out({R, Ca + Cb});
  for (std::size_t r = 0; r < R; ++r) {
    std::copy(ta.values.begin() + r * Ca, ta.values.begin() + (r + 1) * Ca,
              out.values.begin() + r * (Ca + Cb));
    std::copy(tb.values.begin() + r * Cb, tb.values.begin() + (r + 1) * Cb,
              out.values.begin() + r * (Ca + Cb) + Ca);
  }
  return emit("concat_cols", std::move(out), [a, b, R, Ca, Cb](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    auto& gb = t.node(b).adj;
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < Ca; ++c) ga[r * Ca + c] += self.adj[r * (Ca + Cb) + c];
      for (std::size_t c = 0; c < Cb; ++c) gb[r * Cb + c] += self.adj[r * (Ca + Cb) + Ca + c];
    }
  });
}

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  double total = 0.0;
  for (double v : ta.values) total += v;
  return emit("sum", Tensor::scalar(total), [a](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (auto& g : ga) g += self.adj[0];
  });
}

Var Tape::mean(Var a) {
  const Tensor& ta = value(a);
  const double n = static_cast<double>(ta.numel());
  double total = 0.0;
  for (double v : ta.values) total += v;
  return emit("mean", Tensor::scalar(total / n), [a, n](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (auto& g : ga) g += self.adj[0] / n;
  });
}

Var Tape::affine(Var a, double k, double c) {
  Tensor out = value(a);
  for (auto& v : out.values) v = k * v + c;
  return emit("affine", std::move(out), [a, k](Tape& t, const Node& self) {
    auto& ga = t.node(a).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i) ga[i] += self.adj[i] * k;
  });
}

Var Tape::pick(Var a, std::size_t flat_index) {
  const Tensor& ta = value(a);
  if (flat_index >= ta.numel())
    throw std::invalid_argument("pick: index " + std::to_string(flat_index) +
                                " out of range for " + shape_str(ta.shape));
  return emit("pick", Tensor::scalar(ta.values[flat_index]),
              [a, flat_index](Tape& t, const Node& self) {
                t.node(a).adj[flat_index] += self.adj[0];
              });
}

Var Tape::clamp(Var a, double lo, double hi) {
  const Tensor& ta = value(a);
  Tensor out = ta;
  for (auto& v : out.values) v = std::min(hi, std::max(lo, v));
  return emit("clamp", std::move(out), [a, lo, hi](Tape& t, const Node& self) {
    const auto& va = t.node(a).val.values;
    auto& ga = t.node(a).adj;
    for (std::size_t i = 0; i < self.adj.size(); ++i)
      if (va[i] > lo && va[i] < hi) ga[i] += self.adj[i];
  });
}

void Tape::backward(Var output) {
  if (consumed_) throw std::logic_error("Tape::backward: recording already consumed");
  Node& out = node(output);
  if (out.val.numel() != 1) throw std::invalid_argument("Tape::backward: output is not scalar");
  consumed_ = true;
  out.adj[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.back) n.back(*this, n);
  }
  for (const auto& b : bindings_) {
    Tensor& p = b.store->at(b.name);
    p.ensure_grad();
    const auto& adj = nodes_[static_cast<std::size_t>(b.node)].adj;
    for (std::size_t i = 0; i < adj.size(); ++i) p.grad[i] += adj[i];
  }
}

}  // namespace maligan::ad
