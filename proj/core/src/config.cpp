#include "maligan/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace maligan {

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("TrainConfig: " + what);
  };
  require(algorithm == "maligan" || algorithm == "sequential",
          "algorithm must be 'maligan' or 'sequential'");
  static const std::set<std::string> kinds = {"mle", "reinforce", "maligan-basic",
                                             "maligan-mcts", "mixed"};
  require(kinds.count(estimator) != 0, "unknown estimator '" + estimator + "'");
  require(k >= 1, "k must be >= 1");
  require(m >= 2, "m must be >= 2");
  require(max_len >= 1, "max_len must be >= 1");
  require(clamp_step <= max_len, "clamp_step must be in [0, max_len]");
  require(effective_initial_clamp() <= max_len, "initial_clamp must be in [0, max_len]");
  if (estimator == "mixed" && (b_start > 0.0 || b_end > 0.0))
    require(n >= 2, "n must be >= 2 for the mixed estimator with b > 0");
  require(optimizer == "sgd" || optimizer == "adam", "optimizer must be 'sgd' or 'adam'");
  require(model == "tabular" || model == "recurrent", "model must be 'tabular' or 'recurrent'");
  require(lr_gen > 0.0 && lr_disc > 0.0, "learning rates must be positive");
  require(rollouts >= 1, "rollouts must be >= 1");
  require(b_start >= 0.0 && b_end >= 0.0 && b_start <= 1.0 && b_end <= 1.0,
          "baseline must stay in [0, 1]");
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                 ": empty key");
    if (kv.count(key))
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    kv[key] = val;
  }
  return kv;
}

TrainConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  std::set<std::string> seen;
  auto gets = [&](const std::string& key, std::string& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      out = it->second;
      seen.insert(key);
    }
  };
  auto getu = [&](const std::string& key, std::size_t& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      out = std::stoull(it->second);
      seen.insert(key);
    }
  };
  auto getl = [&](const std::string& key, long& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      out = std::stol(it->second);
      seen.insert(key);
    }
  };
  auto getd = [&](const std::string& key, double& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      out = std::stod(it->second);
      seen.insert(key);
    }
  };

  gets("algorithm", cfg.algorithm);
  gets("estimator", cfg.estimator);
  getu("k", cfg.k);
  getu("m", cfg.m);
  getu("n", cfg.n);
  getu("max_len", cfg.max_len);
  getu("clamp_step", cfg.clamp_step);
  getl("initial_clamp", cfg.initial_clamp);
  getd("b_start", cfg.b_start);
  getd("b_end", cfg.b_end);
  getl("b_ramp", cfg.b_ramp);
  getd("lr_gen", cfg.lr_gen);
  getd("lr_disc", cfg.lr_disc);
  gets("optimizer", cfg.optimizer);
  getu("pretrain_gen_epochs", cfg.pretrain_gen_epochs);
  getu("pretrain_disc_epochs", cfg.pretrain_disc_epochs);
  getu("iterations", cfg.iterations);
  if (auto it = kv.find("seed"); it != kv.end()) {
    cfg.seed = std::stoull(it->second);
    seen.insert("seed");
  }
  getu("checkpoint_every", cfg.checkpoint_every);
  getu("rollouts", cfg.rollouts);
  getd("entropy_weight", cfg.entropy_weight);
  gets("model", cfg.model);
  getu("order", cfg.order);
  getu("embed", cfg.embed);
  getu("hidden", cfg.hidden);
  getu("disc_embed", cfg.disc_embed);
  getu("disc_hidden", cfg.disc_hidden);
  gets("data_dir", cfg.data_dir);
  gets("task", cfg.task);
  getu("vocab", cfg.vocab);
  getd("concentration", cfg.concentration);
  getu("samples", cfg.samples);
  getu("grid_side", cfg.grid_side);
  getu("grid_patterns", cfg.grid_patterns);
  getd("grid_noise", cfg.grid_noise);
  gets("out_dir", cfg.out_dir);

  for (const auto& [key, value] : kv)
    if (!seen.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return config_from_kv(parse_kv(text.str()));
}

void write_config(std::ostream& out, const TrainConfig& cfg) {
  out << "algorithm = " << cfg.algorithm << '\n'
      << "estimator = " << cfg.estimator << '\n'
      << "k = " << cfg.k << '\n'
      << "m = " << cfg.m << '\n'
      << "n = " << cfg.n << '\n'
      << "max_len = " << cfg.max_len << '\n'
      << "clamp_step = " << cfg.clamp_step << '\n'
      << "initial_clamp = " << cfg.initial_clamp << '\n'
      << "b_start = " << cfg.b_start << '\n'
      << "b_end = " << cfg.b_end << '\n'
      << "b_ramp = " << cfg.b_ramp << '\n'
      << "lr_gen = " << cfg.lr_gen << '\n'
      << "lr_disc = " << cfg.lr_disc << '\n'
      << "optimizer = " << cfg.optimizer << '\n'
      << "pretrain_gen_epochs = " << cfg.pretrain_gen_epochs << '\n'
      << "pretrain_disc_epochs = " << cfg.pretrain_disc_epochs << '\n'
      << "iterations = " << cfg.iterations << '\n'
      << "seed = " << cfg.seed << '\n'
      << "checkpoint_every = " << cfg.checkpoint_every << '\n'
      << "rollouts = " << cfg.rollouts << '\n'
      << "entropy_weight = " << cfg.entropy_weight << '\n'
      << "model = " << cfg.model << '\n'
      << "order = " << cfg.order << '\n'
      << "embed = " << cfg.embed << '\n'
      << "hidden = " << cfg.hidden << '\n'
      << "disc_embed = " << cfg.disc_embed << '\n'
      << "disc_hidden = " << cfg.disc_hidden << '\n'
      << "data_dir = " << cfg.data_dir << '\n'
      << "task = " << cfg.task << '\n'
      << "vocab = " << cfg.vocab << '\n'
      << "concentration = " << cfg.concentration << '\n'
      << "samples = " << cfg.samples << '\n'
      << "grid_side = " << cfg.grid_side << '\n'
      << "grid_patterns = " << cfg.grid_patterns << '\n'
      << "grid_noise = " << cfg.grid_noise << '\n'
      << "out_dir = " << cfg.out_dir << '\n';
}

void save_config(const std::string& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  write_config(out, cfg);
}

std::map<std::string, std::string> config_to_kv(const TrainConfig& cfg) {
  std::ostringstream text;
  write_config(text, cfg);
  return parse_kv(text.str());
}

}  // namespace maligan
