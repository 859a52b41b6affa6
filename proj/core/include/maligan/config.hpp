#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace maligan {

/// Flat key=value training configuration. Unknown keys are errors so typos
/// fail fast; every field has a documented default.
struct TrainConfig {
  std::string algorithm = "maligan";  // maligan | sequential
  std::string estimator = "maligan-basic";
  // mle | reinforce | maligan-basic | maligan-mcts | mixed

  std::size_t k = 1;           // discriminator steps per outer iteration
  std::size_t m = 32;          // minibatch size
  std::size_t n = 8;           // completion multiplicity (mixed estimator)
  std::size_t max_len = 6;     // T
  std::size_t clamp_step = 1;  // K
  long initial_clamp = -1;     // N0; -1 means T

  double b_start = 0.0;
  double b_end = 1.0;
  long b_ramp = -1;  // generator updates; -1 means half of `iterations`

  double lr_gen = 0.05;
  double lr_disc = 0.05;
  std::string optimizer = "sgd";  // sgd | adam

  std::size_t pretrain_gen_epochs = 20;
  std::size_t pretrain_disc_epochs = 5;
  std::size_t iterations = 100;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 50;
  std::size_t rollouts = 16;
  double entropy_weight = 0.0;  // reinforce only

  std::string model = "tabular";  // tabular | recurrent
  std::size_t order = 2;          // tabular context order
  std::size_t embed = 8;
  std::size_t hidden = 16;
  std::size_t disc_embed = 8;
  std::size_t disc_hidden = 16;

  // data: a corpus directory, or an inline synthetic task
  std::string data_dir;
  std::string task = "grammar";  // grammar | grid
  std::size_t vocab = 4;
  double concentration = 0.5;
  std::size_t samples = 2000;
  std::size_t grid_side = 4;
  std::size_t grid_patterns = 3;
  double grid_noise = 0.05;

  std::string out_dir = "run";

  std::size_t effective_initial_clamp() const {
    return initial_clamp < 0 ? max_len : static_cast<std::size_t>(initial_clamp);
  }
  std::size_t effective_b_ramp() const {
    return b_ramp < 0 ? std::max<std::size_t>(1, iterations / 2)
                      : static_cast<std::size_t>(b_ramp);
  }

  void validate() const;
};

std::map<std::string, std::string> parse_kv(const std::string& text);
TrainConfig config_from_kv(const std::map<std::string, std::string>& kv);
TrainConfig load_config(const std::string& path);
void write_config(std::ostream& out, const TrainConfig& cfg);
void save_config(const std::string& path, const TrainConfig& cfg);
std::map<std::string, std::string> config_to_kv(const TrainConfig& cfg);

}  // namespace maligan
