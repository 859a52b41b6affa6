#include "maligan/recurrent_generator.hpp"

#include <cmath>

namespace maligan {

namespace {
constexpr double kMask = -1e30;
}

RecurrentGenerator::RecurrentGenerator(const Options& opt)
    : opt_(opt), gru_{opt.embed, opt.hidden, "gru"} {
  if (opt_.vocab <= kReservedCount)
    throw std::invalid_argument("RecurrentGenerator: vocab must include payload tokens");
  if (opt_.max_len < 1) throw std::invalid_argument("RecurrentGenerator: max_len must be >= 1");
  Rng rng(opt_.init_seed);
  Tensor& emb = store_.add("emb", {opt_.vocab, opt_.embed});
  for (auto& v : emb.values) v = rng.uniform(-opt_.init_scale, opt_.init_scale);
  gru_.init(store_, rng, opt_.init_scale);
  Tensor& w = store_.add("out.w", {opt_.hidden, opt_.vocab});
  for (auto& v : w.values) v = rng.uniform(-opt_.init_scale, opt_.init_scale);
  store_.add("out.b", {1, opt_.vocab});

  logit_mask_.assign(opt_.vocab, 0.0);
  logit_mask_[kBos] = kMask;
  logit_mask_[kPad] = kMask;
  if (!opt_.use_eos) logit_mask_[kEos] = kMask;
}

void RecurrentGenerator::check_token(Token t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= opt_.vocab)
    throw std::out_of_range("RecurrentGenerator: token out of vocab: " + std::to_string(t));
  if (logit_mask_[static_cast<std::size_t>(t)] != 0.0)
    throw std::invalid_argument("RecurrentGenerator: sequence contains non-emittable token " +
                                std::to_string(t));
}

std::vector<double> RecurrentGenerator::step_logits(std::span<const double> h) const {
  const Tensor& w = store_.at("out.w");
  const Tensor& b = store_.at("out.b");
  auto logits = kernels::matvec_row(h, w.values, opt_.hidden, opt_.vocab);
  for (std::size_t i = 0; i < opt_.vocab; ++i) logits[i] += b.values[i] + logit_mask_[i];
  return logits;
}

Sequence RecurrentGenerator::clamped_sample(const Sequence& prefix, std::size_t n, Rng& rng) const {
  if (n > prefix.size())
    throw std::invalid_argument("clamped_sample: clamp length exceeds prefix length");
  Sequence x;
  std::vector<double> h(opt_.hidden, 0.0);
  Token prev = kBos;
  for (std::size_t i = 0; i < std::min(n, opt_.max_len); ++i) {
    const Token tok = prefix[i];
    check_token(tok);
    x.push_back(tok);
    if (opt_.use_eos && tok == kEos) return x;
    h = gru_.step(store_, {store_.at("emb").values.data() + prev * opt_.embed, opt_.embed}, h);
    // advance with the clamped token next iteration
    prev = tok;
  }
  while (x.size() < opt_.max_len) {
    h = gru_.step(store_, {store_.at("emb").values.data() + prev * opt_.embed, opt_.embed}, h);
    auto probs = kernels::softmax(step_logits(h));
    const Token tok = static_cast<Token>(rng.categorical(probs));
    x.push_back(tok);
    if (opt_.use_eos && tok == kEos) break;
    prev = tok;
  }
  return x;
}

Sequence RecurrentGenerator::sample(Rng& rng) const { return clamped_sample({}, 0, rng); }

double RecurrentGenerator::log_prob(const Sequence& x) const {
  if (x.size() > opt_.max_len)
    throw std::invalid_argument("RecurrentGenerator: sequence longer than max_len");
  std::vector<double> h(opt_.hidden, 0.0);
  Token prev = kBos;
  double lp = 0.0;
  for (Token tok : x) {
    if (tok == kPad) break;  // tokens after EOS are PAD and contribute nothing
    check_token(tok);
    h = gru_.step(store_, {store_.at("emb").values.data() + prev * opt_.embed, opt_.embed}, h);
    auto lsm = kernels::log_softmax(step_logits(h));
    lp += lsm[static_cast<std::size_t>(tok)];
    if (opt_.use_eos && tok == kEos) break;
    prev = tok;
  }
  return lp;
}

GradientVector RecurrentGenerator::taped_grad(const Sequence& x,
                                              std::span<const double> step_weights,
                                              bool entropy) const {
  auto& store = const_cast<ParamStore&>(store_);
  ad::Tape tape;
  ad::Var emb = tape.param(store, "emb");
  ad::Var out_w = tape.param(store, "out.w");
  ad::Var out_b = tape.param(store, "out.b");
  auto gru_vars = gru_.bind(tape, store);
  ad::Var mask = tape.input(Tensor::from({1, opt_.vocab}, logit_mask_));
  ad::Var h = tape.input(Tensor({1, opt_.hidden}));
  ad::Var total = tape.constant(0.0);

  Token prev = kBos;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Token tok = x[i];
    if (tok == kPad) break;
    check_token(tok);
    h = gru_.step(tape, gru_vars, tape.embedding_row(emb, static_cast<std::size_t>(prev)), h);
    ad::Var logits = tape.add(tape.add(tape.matmul(h, out_w), out_b), mask);
    ad::Var lsm = tape.log_softmax_rows(logits);
    if (entropy) {
      ad::Var ht = tape.affine(tape.sum(tape.mul(tape.exp_(lsm), lsm)), -1.0, 0.0);
      total = tape.add(total, ht);
    } else if (step_weights[i] != 0.0) {
      total = tape.add(total, tape.affine(tape.pick(lsm, static_cast<std::size_t>(tok)),
                                          step_weights[i], 0.0));
    }
    if (opt_.use_eos && tok == kEos) break;
    prev = tok;
  }

  store.zero_grads();
  tape.backward(total);
  GradientVector g;
  g.values = store.flat_grads();
  store.zero_grads();
  return g;
}

GradientVector RecurrentGenerator::grad_log_prob_weighted(
    const Sequence& x, std::span<const double> step_weights) const {
  if (step_weights.size() != x.size())
    throw std::invalid_argument("grad_log_prob_weighted: one weight per token required");
  if (x.size() > opt_.max_len)
    throw std::invalid_argument("RecurrentGenerator: sequence longer than max_len");
  return taped_grad(x, step_weights, /*entropy=*/false);
}

GradientVector RecurrentGenerator::grad_entropy(const Sequence& x) const {
  std::vector<double> unused(x.size(), 0.0);
  return taped_grad(x, unused, /*entropy=*/true);
}

std::vector<double> RecurrentGenerator::step_entropies(const Sequence& x) const {
  std::vector<double> h(opt_.hidden, 0.0);
  std::vector<double> out;
  Token prev = kBos;
  for (Token tok : x) {
    if (tok == kPad) break;
    check_token(tok);
    h = gru_.step(store_, {store_.at("emb").values.data() + prev * opt_.embed, opt_.embed}, h);
    auto lsm = kernels::log_softmax(step_logits(h));
    double ent = 0.0;
    for (double l : lsm) {
      const double p = std::exp(l);
      if (p > 0.0) ent -= p * l;
    }
    out.push_back(ent);
    if (opt_.use_eos && tok == kEos) break;
    prev = tok;
  }
  return out;
}

std::unique_ptr<Generator> RecurrentGenerator::snapshot() const {
  return std::make_unique<RecurrentGenerator>(*this);
}

}  // namespace maligan
