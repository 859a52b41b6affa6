#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "maligan/metrics.hpp"
#include "maligan/model_io.hpp"
#include "maligan/synth.hpp"
#include "maligan/train_loop.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDiverged = 2;
constexpr int kOracleFail = 3;

int cmd_train(const std::string& config_path, const std::string& out_override) {
  maligan::TrainConfig cfg = maligan::load_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  maligan::RunReport report = maligan::run_training(cfg);
  if (report.diverged) {
    std::cerr << "divergence guard tripped: " << report.divergence_reason << '\n';
    return kDiverged;
  }
  std::cout << "trained " << report.iterations_run << " iterations; valid_nll="
            << report.valid_nll << " test_nll=" << report.test_nll
            << " kl_exact=" << report.kl_exact << "; outputs in "
            << report.metrics_path << '\n';
  return kOk;
}

int cmd_eval(const std::string& model_prefix, const std::string& data_dir) {
  auto gen = maligan::load_model(model_prefix);
  maligan::Corpus corpus = maligan::load_corpus(data_dir);
  const double valid_nll =
      corpus.valid.empty() ? std::nan("") : maligan::mean_nll(*gen, corpus.valid);
  const double test_nll =
      corpus.test.empty() ? std::nan("") : maligan::mean_nll(*gen, corpus.test);
  std::cout.precision(17);
  std::cout << "valid_nll=" << valid_nll << '\n'
            << "test_nll=" << test_nll << '\n'
            << "perplexity=" << std::exp(test_nll) << '\n';
  return kOk;
}

int cmd_sample(const std::string& model_prefix, const std::string& vocab_path,
               std::size_t count, std::uint64_t seed) {
  auto gen = maligan::load_model(model_prefix);
  maligan::Vocab vocab = maligan::Vocab::load(vocab_path);
  maligan::Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    maligan::Sequence x = maligan::corpus_view(*gen, gen->sample(rng));
    for (std::size_t t = 0; t < x.size(); ++t) {
      if (t > 0) std::cout << ' ';
      std::cout << vocab.token(x[t]);
    }
    std::cout << '\n';
  }
  return kOk;
}

int cmd_oracle_check(std::uint64_t seed, std::size_t instances, std::size_t trials,
                     const std::string& report_path) {
  maligan::oracle::SuiteOptions opt;
  opt.instances = instances;
  opt.variance_trials = trials;
  auto results = maligan::oracle::run_oracle_suite(seed, opt);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-4s %-28s residual=%-14.6g %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.residual, r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  if (!report_path.empty()) {
    maligan::RunReport report;
    for (const auto& r : results) report.diagnostics[r.name] = r.residual;
    report.save(report_path);
  }
  if (!all_pass) {
    std::cerr << "oracle check failed\n";
    return kOracleFail;
  }
  return kOk;
}

int cmd_synth(const maligan::TrainConfig& cfg, const std::string& out_dir) {
  maligan::TrainTask task = maligan::load_task(cfg);
  maligan::save_corpus(out_dir, task.corpus);
  std::cout << "wrote " << task.corpus.train.size() << "/" << task.corpus.valid.size() << "/"
            << task.corpus.test.size() << " train/valid/test sequences to " << out_dir << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"importance-weighted adversarial training of discrete sequence generators"};
  app.require_subcommand(1);

  std::string config_path, out_dir, model_prefix, data_dir, vocab_path, report_path;
  std::size_t count = 10, instances = 100, trials = 2000;
  std::uint64_t seed = 1;

  auto* train = app.add_subcommand("train", "run a training configuration");
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--out", out_dir, "output directory override");

  auto* eval = app.add_subcommand("eval", "recompute metrics from a checkpoint");
  eval->add_option("--model", model_prefix, "model path prefix (.json/.ckpt)")->required();
  eval->add_option("--data", data_dir, "corpus directory")->required();

  auto* sample = app.add_subcommand("sample", "emit samples from a checkpoint");
  sample->add_option("--model", model_prefix, "model path prefix")->required();
  sample->add_option("--vocab", vocab_path, "vocab file")->required();
  sample->add_option("--count", count, "number of samples");
  sample->add_option("--seed", seed, "sampling seed");

  auto* oracle = app.add_subcommand("oracle-check", "run the enumeration oracle suite");
  oracle->add_option("--seed", seed, "suite seed");
  oracle->add_option("--instances", instances, "randomized instances per check");
  oracle->add_option("--trials", trials, "trials for the variance measurements");
  oracle->add_option("--report", report_path, "write residuals as a report file");

  maligan::TrainConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "materialize a synthetic corpus");
  synth->add_option("--task", synth_cfg.task, "grammar | grid");
  synth->add_option("--vocab-size", synth_cfg.vocab, "grammar alphabet size");
  synth->add_option("--max-len", synth_cfg.max_len, "grammar sequence length");
  synth->add_option("--order", synth_cfg.order, "grammar context order");
  synth->add_option("--concentration", synth_cfg.concentration, "grammar Dirichlet parameter");
  synth->add_option("--samples", synth_cfg.samples, "corpus size");
  synth->add_option("--side", synth_cfg.grid_side, "grid side length");
  synth->add_option("--patterns", synth_cfg.grid_patterns, "grid prototype count");
  synth->add_option("--noise", synth_cfg.grid_noise, "grid bit-flip probability");
  synth->add_option("--seed", synth_cfg.seed, "task seed");
  synth->add_option("--out", out_dir, "destination directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << '\n' << app.help() << '\n';
    return kUsage;
  }

  try {
    if (*train) return cmd_train(config_path, out_dir);
    if (*eval) return cmd_eval(model_prefix, data_dir);
    if (*sample) return cmd_sample(model_prefix, vocab_path, count, seed);
    if (*oracle) return cmd_oracle_check(seed, instances, trials, report_path);
    if (*synth) return cmd_synth(synth_cfg, out_dir);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
