#pragma once

#include <string>

#include "maligan/kernels.hpp"
#include "maligan/param_store.hpp"
#include "maligan/rng.hpp"
#include "maligan/tape.hpp"

namespace maligan {

/// Single GRU cell. Parameters live in a ParamStore under
/// prefix.{wz,uz,bz,wr,ur,br,wh,uh,bh}; the same weights drive both the plain
/// forward used for sampling/scoring and the taped forward used for grads.
struct GruCell {
  std::size_t input, hidden;
  std::string prefix;

  void init(ParamStore& store, Rng& rng, double scale = 0.08) const {
    auto mat = [&](const std::string& n, std::size_t r, std::size_t c) {
      Tensor& t = store.add(prefix + "." + n, {r, c});
      for (auto& v : t.values) v = rng.uniform(-scale, scale);
    };
    mat("wz", input, hidden);
    mat("uz", hidden, hidden);
    mat("bz", 1, hidden);
    mat("wr", input, hidden);
    mat("ur", hidden, hidden);
    mat("br", 1, hidden);
    mat("wh", input, hidden);
    mat("uh", hidden, hidden);
    mat("bh", 1, hidden);
  }

  /// h' = (1-z) o h + z o tanh(x Wh + (r o h) Uh + bh)
  std::vector<double> step(const ParamStore& store, std::span<const double> x,
                           std::span<const double> h) const {
    auto gate = [&](const char* w, const char* u, const char* b) {
      const Tensor& W = store.at(prefix + "." + w);
      const Tensor& U = store.at(prefix + "." + u);
      const Tensor& B = store.at(prefix + "." + b);
      auto y = kernels::matvec_row(x, W.values, input, hidden);
      auto hy = kernels::matvec_row(h, U.values, hidden, hidden);
      for (std::size_t i = 0; i < hidden; ++i) y[i] += hy[i] + B.values[i];
      return y;
    };
    auto z = gate("wz", "uz", "bz");
    auto r = gate("wr", "ur", "br");
    for (auto& v : z) v = kernels::sigmoid(v);
    for (auto& v : r) v = kernels::sigmoid(v);
    std::vector<double> rh(hidden);
    for (std::size_t i = 0; i < hidden; ++i) rh[i] = r[i] * h[i];
    const Tensor& Wh = store.at(prefix + ".wh");
    const Tensor& Uh = store.at(prefix + ".uh");
    const Tensor& Bh = store.at(prefix + ".bh");
    auto cand = kernels::matvec_row(x, Wh.values, input, hidden);
    auto hc = kernels::matvec_row(rh, Uh.values, hidden, hidden);
    std::vector<double> out(hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
      const double c = std::tanh(cand[i] + hc[i] + Bh.values[i]);
      out[i] = (1.0 - z[i]) * h[i] + z[i] * c;
    }
    return out;
  }

  struct TapeVars {
    ad::Var wz, uz, bz, wr, ur, br, wh, uh, bh;
  };

  TapeVars bind(ad::Tape& tape, ParamStore& store) const {
    auto p = [&](const char* n) { return tape.param(store, prefix + "." + n); };
    return {p("wz"), p("uz"), p("bz"), p("wr"), p("ur"), p("br"), p("wh"), p("uh"), p("bh")};
  }

  ad::Var step(ad::Tape& t, const TapeVars& v, ad::Var x, ad::Var h) const {
    ad::Var z = t.sigmoid(t.add(t.add(t.matmul(x, v.wz), t.matmul(h, v.uz)), v.bz));
    ad::Var r = t.sigmoid(t.add(t.add(t.matmul(x, v.wr), t.matmul(h, v.ur)), v.br));
    ad::Var cand =
        t.tanh_(t.add(t.add(t.matmul(x, v.wh), t.matmul(t.mul(r, h), v.uh)), v.bh));
    // (1-z) o h + z o cand
    return t.add(t.mul(t.affine(z, -1.0, 1.0), h), t.mul(z, cand));
  }
};

}  // namespace maligan
