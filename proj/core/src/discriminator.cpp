#include "maligan/discriminator.hpp"

#include <cmath>

namespace maligan {

Discriminator::Discriminator(const Options& opt)
    : opt_(opt), fwd_{opt.embed, opt.hidden, "fwd"}, bwd_{opt.embed, opt.hidden, "bwd"} {
  if (opt_.vocab < 1) throw std::invalid_argument("Discriminator: vocab must be >= 1");
  if (opt_.clamp_delta <= 0.0 || opt_.clamp_delta >= 0.5)
    throw std::invalid_argument("Discriminator: clamp_delta must be in (0, 0.5)");
  Rng rng(opt_.init_seed);
  Tensor& emb = store_.add("emb", {opt_.vocab, opt_.embed});
  for (auto& v : emb.values) v = rng.uniform(-opt_.init_scale, opt_.init_scale);
  fwd_.init(store_, rng, opt_.init_scale);
  bwd_.init(store_, rng, opt_.init_scale);
  Tensor& w = store_.add("head.w", {2 * opt_.hidden, 1});
  for (auto& v : w.values) v = rng.uniform(-opt_.init_scale, opt_.init_scale);
  store_.add("head.b", {1, 1});
}

void Discriminator::check_sequence(const Sequence& x) const {
  if (x.empty()) throw std::invalid_argument("Discriminator: empty sequence");
  for (Token t : x)
    if (t < 0 || static_cast<std::size_t>(t) >= opt_.vocab)
      throw std::out_of_range("Discriminator: token out of vocab: " + std::to_string(t));
}

std::vector<double> Discriminator::encode(const Sequence& x) const {
  const Tensor& emb = store_.at("emb");
  std::vector<double> hf(opt_.hidden, 0.0), hb(opt_.hidden, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    hf = fwd_.step(store_, {emb.values.data() + x[i] * static_cast<long>(opt_.embed), opt_.embed}, hf);
    const Token rt = x[x.size() - 1 - i];
    hb = bwd_.step(store_, {emb.values.data() + rt * static_cast<long>(opt_.embed), opt_.embed}, hb);
  }
  hf.insert(hf.end(), hb.begin(), hb.end());
  return hf;
}

double Discriminator::score(const Sequence& x) const {
  check_sequence(x);
  auto h = encode(x);
  const Tensor& w = store_.at("head.w");
  const Tensor& b = store_.at("head.b");
  double s = b.values[0];
  for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * w.values[i];
  const double d = kernels::sigmoid(s);
  return std::min(1.0 - opt_.clamp_delta, std::max(opt_.clamp_delta, d));
}

ad::Var Discriminator::score_var(ad::Tape& tape, const GruCell::TapeVars& fv,
                                 const GruCell::TapeVars& bv, ad::Var emb, ad::Var head_w,
                                 ad::Var head_b, const Sequence& x) const {
  check_sequence(x);
  ad::Var hf = tape.input(Tensor({1, opt_.hidden}));
  ad::Var hb = tape.input(Tensor({1, opt_.hidden}));
  for (std::size_t i = 0; i < x.size(); ++i) {
    hf = fwd_.step(tape, fv, tape.embedding_row(emb, static_cast<std::size_t>(x[i])), hf);
    hb = bwd_.step(tape, bv,
                   tape.embedding_row(emb, static_cast<std::size_t>(x[x.size() - 1 - i])), hb);
  }
  ad::Var s = tape.add(tape.matmul(tape.concat_cols(hf, hb), head_w), head_b);
  return tape.clamp(tape.sigmoid(s), opt_.clamp_delta, 1.0 - opt_.clamp_delta);
}

double Discriminator::accumulate_objective_grad(const std::vector<Sequence>& real,
                                                const std::vector<Sequence>& fake) {
  if (real.empty() || fake.empty())
    throw std::invalid_argument("Discriminator: real and fake batches must be nonempty");
  ad::Tape tape;
  ad::Var emb = tape.param(store_, "emb");
  auto fv = fwd_.bind(tape, store_);
  auto bv = bwd_.bind(tape, store_);
  ad::Var head_w = tape.param(store_, "head.w");
  ad::Var head_b = tape.param(store_, "head.b");

  ad::Var obj = tape.input(Tensor({1, 1}));  // zero accumulator, head-output shape
  for (const auto& y : real)
    obj = tape.add(obj, tape.log_(score_var(tape, fv, bv, emb, head_w, head_b, y)));
  for (const auto& x : fake)
    obj = tape.add(obj,
                   tape.log_(tape.affine(score_var(tape, fv, bv, emb, head_w, head_b, x), -1.0, 1.0)));

  const double value = tape.scalar(obj);
  if (!std::isfinite(value)) throw std::runtime_error("Discriminator: non-finite objective");
  tape.backward(tape.affine(obj, -1.0, 0.0));  // descend on -objective == ascend objective
  return value;
}

}  // namespace maligan
