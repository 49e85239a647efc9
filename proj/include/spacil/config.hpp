#pragma once

// Flat key=value run configuration. Every key has a default; files and
// command-line overrides replace defaults in order.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spacil {

struct RunConfig {
  std::string env = "pendulum";
  std::string algo = "spacil";  // trpo-expert | gail | spacil
  std::uint64_t seed = 0;
  int seeds = 5;
  int iterations = 500;
  double gamma = 0.995;
  double tau = 0.97;
  double eval_gamma = 1.0;

  double lambda1 = 0.001;
  double lambda2 = 0.001;
  double eps = 0.01;
  double pgd_lr = 0.02;
  int pgd_steps = 10;
  std::string eps_space = "normalized";  // normalized | raw
  bool perturb_state = false;
  bool reg_in_direction = true;

  int agent_trajectories = 6;
  int expert_trajectories = 6;
  int batch_steps = 50000;  // expert TRPO batch
  int disc_steps_per_iter = 1;
  int cost_reg_samples = 0;  // 0: one mixed state per agent step

  std::vector<int> policy_hidden{400, 300};
  std::vector<int> value_hidden{100, 100};
  std::vector<int> disc_hidden{100, 100};
  double init_log_std = 0.0;
  double value_lr = 1e-3;
  double disc_lr = 0.01;
  int value_epochs = 5;
  int value_minibatch = 64;
  bool normalize_advantages = true;

  double max_kl = 0.01;
  double cg_damping = 0.01;
  int cg_iterations = 10;
  double backtrack_coeff = 0.8;
  int backtrack_steps = 10;

  int eval_interval = 1;
  int eval_steps = 20000;
  int metric_max_states = 2000;
  double metric_eps = 0.01;
  double metric_step = 0.25;
  int metric_steps = 20;

  int workers = 1;
  std::string out_dir = "runs/default";
  std::string demos;
  std::string expert;

  std::map<std::string, double> env_params;  // keys "env.<name>"

  /// Applies one key=value assignment; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Zeroes the regularizer weights under algo=gail.
  RunConfig resolved() const;
  void validate() const;
  std::map<std::string, std::string> to_map() const;
};

/// Reads `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
/// Applies "key=value" strings in order.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);
void write_config(const RunConfig& cfg, const std::string& path);

std::vector<int> parse_int_list(const std::string& s);
std::vector<double> parse_double_list(const std::string& s);

}  // namespace spacil
