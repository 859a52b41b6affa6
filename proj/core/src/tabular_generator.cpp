#include "maligan/tabular_generator.hpp"

#include <cmath>

#include "maligan/kernels.hpp"

namespace maligan {

TabularGenerator::TabularGenerator(std::size_t alphabet, std::size_t length, std::size_t order)
    : alphabet_(alphabet), length_(length) {
  if (alphabet < 1 || length < 1)
    throw std::invalid_argument("TabularGenerator: alphabet and length must be >= 1");
  order_ = std::min(order, length - 1);
  level_offset_.resize(order_ + 2, 0);
  std::size_t count = 0, level = 1;
  for (std::size_t l = 0; l <= order_; ++l) {
    level_offset_[l] = count;
    count += level;
    level *= alphabet_;
  }
  level_offset_[order_ + 1] = count;
  contexts_ = count;
  store_.add("logits", {contexts_, alphabet_});
}

TabularGenerator TabularGenerator::random(std::size_t alphabet, std::size_t length,
                                          std::size_t order, Rng& rng, double scale) {
  TabularGenerator g(alphabet, length, order);
  for (auto& v : g.logits().values) v = scale * rng.normal();
  return g;
}

TabularGenerator TabularGenerator::dirichlet(std::size_t alphabet, std::size_t length,
                                             std::size_t order, double concentration, Rng& rng) {
  TabularGenerator g(alphabet, length, order);
  Tensor& t = g.logits();
  for (std::size_t c = 0; c < g.contexts_; ++c) {
    auto p = rng.dirichlet(alphabet, concentration);
    for (std::size_t a = 0; a < alphabet; ++a)
      t.values[c * alphabet + a] = std::log(std::max(p[a], 1e-300));
  }
  return g;
}

std::size_t TabularGenerator::context_id(const Sequence& x, std::size_t t) const {
  const std::size_t l = std::min(t, order_);
  std::size_t code = 0;
  for (std::size_t i = t - l; i < t; ++i) {
    const Token tok = x[i];
    if (tok < 0 || static_cast<std::size_t>(tok) >= alphabet_)
      throw std::out_of_range("TabularGenerator: token out of alphabet: " + std::to_string(tok));
    code = code * alphabet_ + static_cast<std::size_t>(tok);
  }
  return level_offset_[l] + code;
}

std::vector<double> TabularGenerator::probs_for_context(std::size_t cid) const {
  const Tensor& t = logits();
  return kernels::softmax({t.values.data() + cid * alphabet_, alphabet_});
}

std::vector<double> TabularGenerator::next_token_probs(const Sequence& prefix) const {
  return probs_for_context(context_id(prefix, prefix.size()));
}

void TabularGenerator::check_tokens(const Sequence& x) const {
  if (x.size() > length_)
    throw std::invalid_argument("TabularGenerator: sequence longer than model length");
  for (Token tok : x)
    if (tok < 0 || static_cast<std::size_t>(tok) >= alphabet_)
      throw std::out_of_range("TabularGenerator: token out of alphabet: " + std::to_string(tok));
}

Sequence TabularGenerator::sample(Rng& rng) const {
  Sequence x;
  x.reserve(length_);
  for (std::size_t t = 0; t < length_; ++t) {
    auto p = probs_for_context(context_id(x, t));
    x.push_back(static_cast<Token>(rng.categorical(p)));
  }
  return x;
}

Sequence TabularGenerator::clamped_sample(const Sequence& prefix, std::size_t n, Rng& rng) const {
  if (n > prefix.size())
    throw std::invalid_argument("clamped_sample: clamp length exceeds prefix length");
  Sequence x(prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(std::min(n, length_)));
  check_tokens(x);
  for (std::size_t t = x.size(); t < length_; ++t) {
    auto p = probs_for_context(context_id(x, t));
    x.push_back(static_cast<Token>(rng.categorical(p)));
  }
  return x;
}

double TabularGenerator::log_prob(const Sequence& x) const {
  check_tokens(x);
  const Tensor& t = logits();
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t cid = context_id(x, i);
    auto lsm = kernels::log_softmax({t.values.data() + cid * alphabet_, alphabet_});
    lp += lsm[static_cast<std::size_t>(x[i])];
  }
  return lp;
}

GradientVector TabularGenerator::grad_log_prob_weighted(const Sequence& x,
                                                        std::span<const double> step_weights) const {
  check_tokens(x);
  if (step_weights.size() != x.size())
    throw std::invalid_argument("grad_log_prob_weighted: one weight per token required");
  GradientVector g(param_count());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (step_weights[i] == 0.0) continue;
    const std::size_t cid = context_id(x, i);
    auto p = probs_for_context(cid);
    // d log p / d logit(cid, a) = 1{a == x_i} - softmax(cid)_a
    for (std::size_t a = 0; a < alphabet_; ++a) g.values[cid * alphabet_ + a] -= step_weights[i] * p[a];
    g.values[cid * alphabet_ + static_cast<std::size_t>(x[i])] += step_weights[i];
  }
  return g;
}

GradientVector TabularGenerator::grad_entropy(const Sequence& x) const {
  check_tokens(x);
  GradientVector g(param_count());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t cid = context_id(x, i);
    auto p = probs_for_context(cid);
    double h = 0.0;
    for (double pa : p)
      if (pa > 0.0) h -= pa * std::log(pa);
    // dH/d logit_a = -p_a (log p_a + H)
    for (std::size_t a = 0; a < alphabet_; ++a)
      if (p[a] > 0.0) g.values[cid * alphabet_ + a] -= p[a] * (std::log(p[a]) + h);
  }
  return g;
}

std::vector<double> TabularGenerator::step_entropies(const Sequence& x) const {
  check_tokens(x);
  std::vector<double> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto p = probs_for_context(context_id(x, i));
    double h = 0.0;
    for (double pa : p)
      if (pa > 0.0) h -= pa * std::log(pa);
    out.push_back(h);
  }
  return out;
}

std::unique_ptr<Generator> TabularGenerator::snapshot() const {
  return std::make_unique<TabularGenerator>(*this);
}

}  // namespace maligan
