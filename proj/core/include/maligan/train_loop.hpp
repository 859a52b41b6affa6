#pragma once

#include <fstream>
#include <optional>

#include "maligan/config.hpp"
#include "maligan/corpus.hpp"
#include "maligan/discriminator.hpp"
#include "maligan/estimators.hpp"
#include "maligan/exact_oracle.hpp"

namespace maligan {

/// Training data plus, for enumerable synthetic tasks, the exact data
/// distribution the metrics report KL against.
struct TrainTask {
  Corpus corpus;
  std::optional<oracle::ExactDistribution> pd;
};

/// Materialize the task named by the config: a corpus directory, or an
/// inline synthetic grammar.
TrainTask load_task(const TrainConfig& cfg);

struct MetricsRow {
  std::size_t iteration = 0;
  double disc_obj = 0.0;
  double z_hat = 0.0;
  double ess = 0.0;
  double b = 0.0;
  std::size_t clamp_n = 0;
  double kl_exact = 0.0;
  double valid_nll = 0.0;
  double test_nll = 0.0;
  double wallclock_s = 0.0;
};

/// Append-only CSV sink. The column order is frozen:
/// iteration,disc_obj,z_hat,ess,b,N,kl_exact,valid_nll,test_nll,wallclock_s
class MetricsWriter {
 public:
  static constexpr const char* kHeader =
      "iteration,disc_obj,z_hat,ess,b,N,kl_exact,valid_nll,test_nll,wallclock_s";

  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

struct RunReport {
  std::map<std::string, std::string> config_echo;
  bool diverged = false;
  std::string divergence_reason;
  std::size_t iterations_run = 0;
  double valid_nll = 0.0;
  double test_nll = 0.0;
  double perplexity = 0.0;
  double kl_exact = std::numeric_limits<double>::quiet_NaN();
  double bleu2_vs_test = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, double> diagnostics;
  std::string metrics_path;
  std::string model_prefix;

  void save(const std::string& path) const;
  static RunReport load(const std::string& path);
};

/// One ascent step on sum log D(y) + sum log(1 - D(x)); returns the
/// pre-step objective.
double disc_update_step(Discriminator& disc, const std::vector<Sequence>& real,
                        const std::vector<Sequence>& fake, double lr);

/// Runs one training configuration end to end: MLE/disc pretraining, then
/// either the basic adversarial loop (fakes from p_theta) or the sequential
/// mixed loop (fakes are clamped completions of real prefixes, clamp length
/// N annealed by clamp_step per iteration).
class Trainer {
 public:
  Trainer(TrainConfig cfg, TrainTask task);

  RunReport run();

  const Generator& generator() const { return *gen_; }
  const Discriminator& discriminator() const { return disc_; }
  /// Number of generator updates applied so far.
  std::size_t generator_updates() const { return updates_; }
  /// Update count the delayed snapshot was taken at; lags updates() by one
  /// once training has started.
  const GeneratorSnapshot& delayed_snapshot() const { return snapshot_; }
  std::size_t current_clamp() const { return clamp_n_; }

 private:
  TrainConfig cfg_;
  TrainTask task_;
  std::unique_ptr<Generator> gen_;
  Discriminator disc_;
  GeneratorSnapshot snapshot_;
  Rng rng_data_, rng_model_, rng_disc_;
  BaselineSchedule schedule_;
  MovingBaseline reinforce_baseline_;
  std::size_t updates_ = 0;
  std::size_t clamp_n_ = 0;
  std::size_t z_bad_streak_ = 0;

  std::vector<Sequence> real_minibatch(Rng& rng, std::size_t count) const;
  std::vector<Sequence> fake_minibatch(std::size_t count);
  ScoreFn score_fn() const;
  Sequence disc_input(const Sequence& model_seq) const;
  void gen_ascent_step(const GradientVector& grad);
  GradientVector generator_step();  // returns the applied ascent direction
  bool check_divergence(const GradientVector& grad, std::string& reason);
  void pretrain();
  MetricsRow evaluate(std::size_t iteration, double disc_obj, const GradientVector& grad,
                      double wallclock_s) const;
};

/// load_task + Trainer::run with checkpoints, metrics CSV, and report.json
/// written under cfg.out_dir (MALIGAN_OUT_DIR overrides).
RunReport run_training(const TrainConfig& cfg);

}  // namespace maligan
