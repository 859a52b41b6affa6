#include "maligan/train_loop.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>

#include <json.hpp>

#include "maligan/metrics.hpp"
#include "maligan/model_io.hpp"
#include "maligan/recurrent_generator.hpp"
#include "maligan/rollout_q.hpp"
#include "maligan/synth.hpp"
#include "maligan/tabular_generator.hpp"

namespace maligan {

namespace {

constexpr double kZLow = 1e-3, kZHigh = 1e3;
constexpr std::size_t kZBadLimit = 50;

double now_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TrainTask load_task(const TrainConfig& cfg) {
  TrainTask task;
  if (!cfg.data_dir.empty()) {
    task.corpus = load_corpus(cfg.data_dir);
    return task;
  }
  if (cfg.task == "grammar") {
    GrammarTask g = synth_grammar(cfg.vocab, cfg.max_len, cfg.seed, cfg.concentration,
                                  cfg.samples, cfg.order);
    task.corpus = std::move(g.corpus);
    task.pd = std::move(g.pd);
    return task;
  }
  if (cfg.task == "grid") {
    task.corpus = synth_grid(cfg.grid_side, cfg.grid_patterns, cfg.grid_noise, cfg.seed,
                             cfg.samples);
    return task;
  }
  throw std::invalid_argument("load_task: unknown task '" + cfg.task + "'");
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path), out_(path) {
  if (!out_) throw std::runtime_error("MetricsWriter: cannot open " + path);
  out_ << kHeader << '\n';
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << std::setprecision(17) << row.iteration << ',' << row.disc_obj << ',' << row.z_hat
       << ',' << row.ess << ',' << row.b << ',' << row.clamp_n << ',' << row.kl_exact << ','
       << row.valid_nll << ',' << row.test_nll << ',' << row.wallclock_s << '\n';
  out_.flush();
}

void RunReport::save(const std::string& path) const {
  nlohmann::json j;
  j["config"] = config_echo;
  j["diverged"] = diverged;
  j["divergence_reason"] = divergence_reason;
  j["iterations_run"] = iterations_run;
  j["valid_nll"] = valid_nll;
  j["test_nll"] = test_nll;
  j["perplexity"] = perplexity;
  j["kl_exact"] = kl_exact;
  j["bleu2_vs_test"] = bleu2_vs_test;
  j["diagnostics"] = diagnostics;
  j["metrics_path"] = metrics_path;
  j["model_prefix"] = model_prefix;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("RunReport::save: cannot open " + path);
  out << j.dump(2) << '\n';
}

RunReport RunReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("RunReport::load: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  RunReport r;
  r.config_echo = j.at("config").get<std::map<std::string, std::string>>();
  r.diverged = j.at("diverged").get<bool>();
  r.divergence_reason = j.at("divergence_reason").get<std::string>();
  r.iterations_run = j.at("iterations_run").get<std::size_t>();
  r.valid_nll = j.at("valid_nll").get<double>();
  r.test_nll = j.at("test_nll").get<double>();
  r.perplexity = j.at("perplexity").get<double>();
  r.kl_exact = j.at("kl_exact").get<double>();
  r.bleu2_vs_test = j.at("bleu2_vs_test").get<double>();
  r.diagnostics = j.at("diagnostics").get<std::map<std::string, double>>();
  r.metrics_path = j.at("metrics_path").get<std::string>();
  r.model_prefix = j.at("model_prefix").get<std::string>();
  return r;
}

double disc_update_step(Discriminator& disc, const std::vector<Sequence>& real,
                        const std::vector<Sequence>& fake, double lr) {
  if (real.empty() || fake.empty())
    throw std::invalid_argument("disc_update_step: empty batch");
  const double obj = disc.accumulate_objective_grad(real, fake);
  if (!std::isfinite(obj)) throw std::runtime_error("disc_update_step: non-finite objective");
  disc.params().sgd_step(lr);
  return obj;
}

Trainer::Trainer(TrainConfig cfg, TrainTask task)
    : cfg_(std::move(cfg)),
      task_(std::move(task)),
      disc_([&] {
        Discriminator::Options o;
        o.vocab = task_.corpus.vocab.size();
        o.embed = cfg_.disc_embed;
        o.hidden = cfg_.disc_hidden;
        o.init_seed = Rng::mix(cfg_.seed, 12, 0);
        return o;
      }()),
      rng_data_(Rng::derive(cfg_.seed, 1)),
      rng_model_(Rng::derive(cfg_.seed, 2)),
      rng_disc_(Rng::derive(cfg_.seed, 3)) {
  cfg_.validate();
  if (task_.corpus.train.empty()) throw std::invalid_argument("Trainer: empty training split");
  if (cfg_.model == "tabular") {
    gen_ = std::make_unique<TabularGenerator>(task_.corpus.vocab.payload_size(), cfg_.max_len,
                                              cfg_.order);
  } else {
    RecurrentGenerator::Options o;
    o.vocab = task_.corpus.vocab.size();
    o.embed = cfg_.embed;
    o.hidden = cfg_.hidden;
    o.max_len = cfg_.max_len + 1;  // room for the EOS step
    o.use_eos = true;
    o.init_seed = Rng::mix(cfg_.seed, 11, 0);
    gen_ = std::make_unique<RecurrentGenerator>(o);
  }
  schedule_ = {cfg_.b_start, cfg_.b_end, cfg_.effective_b_ramp()};
  clamp_n_ = cfg_.effective_initial_clamp();
  snapshot_ = {gen_->snapshot(), 0};
}

std::vector<Sequence> Trainer::real_minibatch(Rng& rng, std::size_t count) const {
  const auto& train = task_.corpus.train;
  std::vector<Sequence> batch;
  batch.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    batch.push_back(model_view(*gen_, train[rng.index(train.size())]));
  return batch;
}

std::vector<Sequence> Trainer::fake_minibatch(std::size_t count) {
  std::vector<Sequence> batch;
  batch.reserve(count);
  for (std::size_t i = 0; i < count; ++i) batch.push_back(gen_->sample(rng_disc_));
  return batch;
}

Sequence Trainer::disc_input(const Sequence& model_seq) const {
  if (dynamic_cast<const TabularGenerator*>(gen_.get())) return from_alphabet(model_seq);
  return model_seq;
}

ScoreFn Trainer::score_fn() const {
  return [this](const Sequence& model_seq) { return disc_.score(disc_input(model_seq)); };
}

void Trainer::gen_ascent_step(const GradientVector& grad) {
  std::vector<double> descent(grad.values);
  for (auto& v : descent) v = -v;
  gen_->params().zero_grads();
  gen_->params().add_flat_to_grads(descent);
  if (cfg_.optimizer == "adam")
    gen_->params().adam_step(cfg_.lr_gen);
  else
    gen_->params().sgd_step(cfg_.lr_gen);
  ++updates_;
}

GradientVector Trainer::generator_step() {
  GradientVector grad;
  const double b = schedule_.at(updates_);
  if (cfg_.estimator == "mle") {
    grad = mle_grad(*gen_, real_minibatch(rng_data_, cfg_.m));
  } else if (cfg_.estimator == "reinforce") {
    std::vector<Sequence> batch;
    batch.reserve(cfg_.m);
    for (std::size_t i = 0; i < cfg_.m; ++i) batch.push_back(gen_->sample(rng_model_));
    grad = reinforce_grad(*gen_, score_fn(), batch, RewardKind::Score, reinforce_baseline_,
                          cfg_.entropy_weight);
  } else if (cfg_.estimator == "maligan-basic") {
    std::vector<Sequence> batch;
    batch.reserve(cfg_.m);
    for (std::size_t i = 0; i < cfg_.m; ++i) batch.push_back(gen_->sample(rng_model_));
    grad = maligan_grad(*gen_, score_fn(), batch, b);
  } else if (cfg_.estimator == "maligan-mcts") {
    std::vector<Sequence> batch;
    batch.reserve(cfg_.m);
    for (std::size_t i = 0; i < cfg_.m; ++i) batch.push_back(gen_->sample(rng_model_));
    grad = per_step_grad(*gen_, score_fn(), batch, cfg_.rollouts, rng_model_.raw());
  } else if (cfg_.estimator == "mixed") {
    grad = mixed_mle_mali_grad(*gen_, score_fn(), real_minibatch(rng_data_, cfg_.m), clamp_n_,
                               cfg_.n, b, rng_model_);
  } else {
    throw std::invalid_argument("Trainer: unknown estimator '" + cfg_.estimator + "'");
  }
  gen_ascent_step(grad);
  return grad;
}

bool Trainer::check_divergence(const GradientVector& grad, std::string& reason) {
  for (const auto& [name, tensor] : gen_->params().entries())
    if (!tensor.finite()) {
      reason = "non-finite parameter '" + name + "'";
      return true;
    }
  if (grad.z_hat > 0.0 && (grad.z_hat < kZLow || grad.z_hat > kZHigh)) {
    if (++z_bad_streak_ >= kZBadLimit) {
      reason = "partition estimate out of [1e-3, 1e3] for " + std::to_string(kZBadLimit) +
               " consecutive updates";
      return true;
    }
  } else {
    z_bad_streak_ = 0;
  }
  return false;
}

void Trainer::pretrain() {
  const auto& train = task_.corpus.train;
  for (std::size_t epoch = 0; epoch < cfg_.pretrain_gen_epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng_data_.index(i)]);
    for (std::size_t start = 0; start + cfg_.m <= order.size(); start += cfg_.m) {
      std::vector<Sequence> batch;
      batch.reserve(cfg_.m);
      for (std::size_t i = 0; i < cfg_.m; ++i)
        batch.push_back(model_view(*gen_, train[order[start + i]]));
      gen_ascent_step(mle_grad(*gen_, batch));
    }
  }
  updates_ = 0;  // adversarial schedules start fresh after pretraining
  for (std::size_t epoch = 0; epoch < cfg_.pretrain_disc_epochs; ++epoch) {
    for (std::size_t start = 0; start + cfg_.m <= train.size(); start += cfg_.m) {
      std::vector<Sequence> real;
      real.reserve(cfg_.m);
      for (std::size_t i = 0; i < cfg_.m; ++i)
        real.push_back(disc_input(model_view(*gen_, train[rng_disc_.index(train.size())])));
      std::vector<Sequence> fake;
      fake.reserve(cfg_.m);
      for (const Sequence& x : fake_minibatch(cfg_.m)) fake.push_back(disc_input(x));
      disc_update_step(disc_, real, fake, cfg_.lr_disc);
    }
  }
}

MetricsRow Trainer::evaluate(std::size_t iteration, double disc_obj, const GradientVector& grad,
                             double wallclock_s) const {
  MetricsRow row;
  row.iteration = iteration;
  row.disc_obj = disc_obj;
  row.z_hat = grad.z_hat;
  row.ess = grad.ess;
  row.b = schedule_.at(updates_ > 0 ? updates_ - 1 : 0);
  row.clamp_n = clamp_n_;
  row.kl_exact = std::numeric_limits<double>::quiet_NaN();
  if (task_.pd)
    if (const auto* tab = dynamic_cast<const TabularGenerator*>(gen_.get()))
      row.kl_exact = oracle::exact_kl(
          *task_.pd, oracle::enumerate_generator(*tab, tab->alphabet(), tab->max_len()));
  row.valid_nll = task_.corpus.valid.empty()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : mean_nll(*gen_, task_.corpus.valid);
  row.test_nll = task_.corpus.test.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : mean_nll(*gen_, task_.corpus.test);
  row.wallclock_s = wallclock_s;
  return row;
}

RunReport Trainer::run() {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(cfg_.out_dir);
  MetricsWriter metrics((fs::path(cfg_.out_dir) / "metrics.csv").string());
  const std::string model_prefix = (fs::path(cfg_.out_dir) / "model").string();

  RunReport report;
  report.config_echo = config_to_kv(cfg_);
  report.metrics_path = metrics.path();
  report.model_prefix = model_prefix;

  pretrain();
  save_model(model_prefix + "_pretrain", *gen_);

  MetricsRow row = evaluate(0, std::numeric_limits<double>::quiet_NaN(), {}, now_seconds(start));
  metrics.write(row);
  report.diagnostics["kl_pretrain"] = row.kl_exact;

  const bool sequential = cfg_.algorithm == "sequential";
  for (std::size_t iter = 1; iter <= cfg_.iterations; ++iter) {
    double disc_obj = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t step = 0; step < cfg_.k; ++step) {
      std::vector<Sequence> real, fake;
      real.reserve(cfg_.m);
      fake.reserve(cfg_.m);
      if (sequential) {
        // fakes follow p_f: real prefixes of length N completed by the model
        for (std::size_t i = 0; i < cfg_.m; ++i) {
          Sequence y = model_view(
              *gen_, task_.corpus.train[rng_disc_.index(task_.corpus.train.size())]);
          const std::size_t n = std::min(clamp_n_, y.size());
          fake.push_back(disc_input(gen_->clamped_sample(y, n, rng_disc_)));
        }
      } else {
        for (const Sequence& x : fake_minibatch(cfg_.m)) fake.push_back(disc_input(x));
      }
      for (std::size_t i = 0; i < cfg_.m; ++i)
        real.push_back(disc_input(
            model_view(*gen_, task_.corpus.train[rng_disc_.index(task_.corpus.train.size())])));
      disc_obj = disc_update_step(disc_, real, fake, cfg_.lr_disc);
    }

    snapshot_ = {gen_->snapshot(), updates_};
    GradientVector grad;
    std::string reason;
    try {
      grad = generator_step();
    } catch (const std::exception& e) {
      report.diverged = true;
      report.divergence_reason = e.what();
      break;
    }
    if (check_divergence(grad, reason)) {
      report.diverged = true;
      report.divergence_reason = reason;
      report.iterations_run = iter;
      break;
    }

    if (sequential) clamp_n_ = clamp_n_ > cfg_.clamp_step ? clamp_n_ - cfg_.clamp_step : 0;

    row = evaluate(iter, disc_obj, grad, now_seconds(start));
    metrics.write(row);
    report.iterations_run = iter;

    if (cfg_.checkpoint_every > 0 && iter % cfg_.checkpoint_every == 0)
      save_model(model_prefix, *gen_);
  }

  save_model(model_prefix, *gen_);
  disc_.params().save((fs::path(cfg_.out_dir) / "disc.ckpt").string());

  report.valid_nll = row.valid_nll;
  report.test_nll = row.test_nll;
  report.perplexity = std::exp(row.test_nll);
  report.kl_exact = row.kl_exact;
  report.diagnostics["z_hat_final"] = row.z_hat;
  report.diagnostics["ess_final"] = row.ess;
  if (!task_.corpus.test.empty()) {
    Rng rng_bleu = Rng::derive(cfg_.seed, 99);
    std::vector<Sequence> hyp;
    for (std::size_t i = 0; i < 200; ++i)
      hyp.push_back(corpus_view(*gen_, gen_->sample(rng_bleu)));
    report.bleu2_vs_test = bleu2(hyp, task_.corpus.test);
  }
  return report;
}

RunReport run_training(const TrainConfig& cfg) {
  TrainConfig resolved = cfg;
  if (const char* env = std::getenv("MALIGAN_OUT_DIR"); env && *env) resolved.out_dir = env;
  TrainTask task = load_task(resolved);
  Trainer trainer(std::move(resolved), std::move(task));
  RunReport report = trainer.run();
  report.save((std::filesystem::path(report.model_prefix).parent_path() / "report.json")
                  .string());
  return report;
}

}  // namespace maligan
