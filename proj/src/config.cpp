#include "spacil/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace spacil {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  }
  if (pos != v.size()) throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return x;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int x{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::string join(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_int<int>("list", item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double("list", item));
  }
  return out;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key.rfind("env.", 0) == 0) {
    env_params[key.substr(4)] = to_double(key, v);
    return;
  }
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> table = {
      {"env", [](RunConfig& c, const std::string& x) { c.env = x; }},
      {"algo", [](RunConfig& c, const std::string& x) { c.algo = x; }},
      {"seed", [](RunConfig& c, const std::string& x) { c.seed = to_int<std::uint64_t>("seed", x); }},
      {"seeds", [](RunConfig& c, const std::string& x) { c.seeds = to_int<int>("seeds", x); }},
      {"iterations", [](RunConfig& c, const std::string& x) { c.iterations = to_int<int>("iterations", x); }},
      {"gamma", [](RunConfig& c, const std::string& x) { c.gamma = to_double("gamma", x); }},
      {"tau", [](RunConfig& c, const std::string& x) { c.tau = to_double("tau", x); }},
      {"eval_gamma", [](RunConfig& c, const std::string& x) { c.eval_gamma = to_double("eval_gamma", x); }},
      {"lambda1", [](RunConfig& c, const std::string& x) { c.lambda1 = to_double("lambda1", x); }},
      {"lambda2", [](RunConfig& c, const std::string& x) { c.lambda2 = to_double("lambda2", x); }},
      {"eps", [](RunConfig& c, const std::string& x) { c.eps = to_double("eps", x); }},
      {"pgd_lr", [](RunConfig& c, const std::string& x) { c.pgd_lr = to_double("pgd_lr", x); }},
      {"pgd_steps", [](RunConfig& c, const std::string& x) { c.pgd_steps = to_int<int>("pgd_steps", x); }},
      {"eps_space", [](RunConfig& c, const std::string& x) { c.eps_space = x; }},
      {"perturb_state", [](RunConfig& c, const std::string& x) { c.perturb_state = to_bool("perturb_state", x); }},
      {"reg_in_direction", [](RunConfig& c, const std::string& x) { c.reg_in_direction = to_bool("reg_in_direction", x); }},
      {"agent_trajectories", [](RunConfig& c, const std::string& x) { c.agent_trajectories = to_int<int>("agent_trajectories", x); }},
      {"expert_trajectories", [](RunConfig& c, const std::string& x) { c.expert_trajectories = to_int<int>("expert_trajectories", x); }},
      {"batch_steps", [](RunConfig& c, const std::string& x) { c.batch_steps = to_int<int>("batch_steps", x); }},
      {"disc_steps_per_iter", [](RunConfig& c, const std::string& x) { c.disc_steps_per_iter = to_int<int>("disc_steps_per_iter", x); }},
      {"cost_reg_samples", [](RunConfig& c, const std::string& x) { c.cost_reg_samples = to_int<int>("cost_reg_samples", x); }},
      {"policy_hidden", [](RunConfig& c, const std::string& x) { c.policy_hidden = parse_int_list(x); }},
      {"value_hidden", [](RunConfig& c, const std::string& x) { c.value_hidden = parse_int_list(x); }},
      {"disc_hidden", [](RunConfig& c, const std::string& x) { c.disc_hidden = parse_int_list(x); }},
      {"init_log_std", [](RunConfig& c, const std::string& x) { c.init_log_std = to_double("init_log_std", x); }},
      {"value_lr", [](RunConfig& c, const std::string& x) { c.value_lr = to_double("value_lr", x); }},
      {"disc_lr", [](RunConfig& c, const std::string& x) { c.disc_lr = to_double("disc_lr", x); }},
      {"value_epochs", [](RunConfig& c, const std::string& x) { c.value_epochs = to_int<int>("value_epochs", x); }},
      {"value_minibatch", [](RunConfig& c, const std::string& x) { c.value_minibatch = to_int<int>("value_minibatch", x); }},
      {"normalize_advantages", [](RunConfig& c, const std::string& x) { c.normalize_advantages = to_bool("normalize_advantages", x); }},
      {"max_kl", [](RunConfig& c, const std::string& x) { c.max_kl = to_double("max_kl", x); }},
      {"cg_damping", [](RunConfig& c, const std::string& x) { c.cg_damping = to_double("cg_damping", x); }},
      {"cg_iterations", [](RunConfig& c, const std::string& x) { c.cg_iterations = to_int<int>("cg_iterations", x); }},
      {"backtrack_coeff", [](RunConfig& c, const std::string& x) { c.backtrack_coeff = to_double("backtrack_coeff", x); }},
      {"backtrack_steps", [](RunConfig& c, const std::string& x) { c.backtrack_steps = to_int<int>("backtrack_steps", x); }},
      {"eval_interval", [](RunConfig& c, const std::string& x) { c.eval_interval = to_int<int>("eval_interval", x); }},
      {"eval_steps", [](RunConfig& c, const std::string& x) { c.eval_steps = to_int<int>("eval_steps", x); }},
      {"metric_max_states", [](RunConfig& c, const std::string& x) { c.metric_max_states = to_int<int>("metric_max_states", x); }},
      {"metric_eps", [](RunConfig& c, const std::string& x) { c.metric_eps = to_double("metric_eps", x); }},
      {"metric_step", [](RunConfig& c, const std::string& x) { c.metric_step = to_double("metric_step", x); }},
      {"metric_steps", [](RunConfig& c, const std::string& x) { c.metric_steps = to_int<int>("metric_steps", x); }},
      {"workers", [](RunConfig& c, const std::string& x) { c.workers = to_int<int>("workers", x); }},
      {"out_dir", [](RunConfig& c, const std::string& x) { c.out_dir = x; }},
      {"demos", [](RunConfig& c, const std::string& x) { c.demos = x; }},
      {"expert", [](RunConfig& c, const std::string& x) { c.expert = x; }},
  };
  const auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second(*this, v);
}

RunConfig RunConfig::resolved() const {
  RunConfig c = *this;
  if (c.algo == "gail") c.lambda1 = c.lambda2 = 0.0;
  return c;
}

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("config: " + msg);
  };
  need(env == "pendulum" || env == "point-reacher", "env must be pendulum or point-reacher");
  need(algo == "trpo-expert" || algo == "gail" || algo == "spacil", "algo must be trpo-expert, gail or spacil");
  need(algo != "gail" || (lambda1 == 0.0 && lambda2 == 0.0), "gail requires lambda1 = lambda2 = 0");
  need(iterations >= 1 && seeds >= 1, "iterations and seeds must be >= 1");
  need(gamma >= 0.0 && gamma <= 1.0 && tau >= 0.0 && tau <= 1.0, "gamma and tau must lie in [0, 1]");
  need(eval_gamma >= 0.0 && eval_gamma <= 1.0, "eval_gamma must lie in [0, 1]");
  need(lambda1 >= 0.0 && lambda2 >= 0.0, "lambdas must be >= 0");
  need(eps > 0.0 && pgd_lr > 0.0 && pgd_steps >= 1, "eps, pgd_lr must be > 0 and pgd_steps >= 1");
  need(eps_space == "normalized" || eps_space == "raw", "eps_space must be normalized or raw");
  need(agent_trajectories >= 1 && expert_trajectories >= 1 && batch_steps >= 1, "trajectory counts must be >= 1");
  need(disc_steps_per_iter >= 1 && cost_reg_samples >= 0, "disc_steps_per_iter >= 1, cost_reg_samples >= 0");
  need(!policy_hidden.empty() && !value_hidden.empty() && !disc_hidden.empty(), "hidden layer lists must be non-empty");
  need(value_lr > 0.0 && disc_lr > 0.0, "learning rates must be > 0");
  need(value_epochs >= 1 && value_minibatch >= 1, "value_epochs and value_minibatch must be >= 1");
  need(max_kl > 0.0 && cg_damping >= 0.0 && cg_iterations >= 1, "trust region settings out of range");
  need(backtrack_coeff > 0.0 && backtrack_coeff < 1.0 && backtrack_steps >= 1, "backtracking settings out of range");
  need(eval_interval >= 1 && eval_steps >= 1 && metric_max_states >= 1, "evaluation settings must be >= 1");
  need(metric_eps > 0.0 && metric_step > 0.0 && metric_steps >= 1, "metric settings out of range");
  need(workers >= 1, "workers must be >= 1");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m = {
      {"env", env},
      {"algo", algo},
      {"seed", std::to_string(seed)},
      {"seeds", std::to_string(seeds)},
      {"iterations", std::to_string(iterations)},
      {"gamma", fmt(gamma)},
      {"tau", fmt(tau)},
      {"eval_gamma", fmt(eval_gamma)},
      {"lambda1", fmt(lambda1)},
      {"lambda2", fmt(lambda2)},
      {"eps", fmt(eps)},
      {"pgd_lr", fmt(pgd_lr)},
      {"pgd_steps", std::to_string(pgd_steps)},
      {"eps_space", eps_space},
      {"perturb_state", perturb_state ? "1" : "0"},
      {"reg_in_direction", reg_in_direction ? "1" : "0"},
      {"agent_trajectories", std::to_string(agent_trajectories)},
      {"expert_trajectories", std::to_string(expert_trajectories)},
      {"batch_steps", std::to_string(batch_steps)},
      {"disc_steps_per_iter", std::to_string(disc_steps_per_iter)},
      {"cost_reg_samples", std::to_string(cost_reg_samples)},
      {"policy_hidden", join(policy_hidden)},
      {"value_hidden", join(value_hidden)},
      {"disc_hidden", join(disc_hidden)},
      {"init_log_std", fmt(init_log_std)},
      {"value_lr", fmt(value_lr)},
      {"disc_lr", fmt(disc_lr)},
      {"value_epochs", std::to_string(value_epochs)},
      {"value_minibatch", std::to_string(value_minibatch)},
      {"normalize_advantages", normalize_advantages ? "1" : "0"},
      {"max_kl", fmt(max_kl)},
      {"cg_damping", fmt(cg_damping)},
      {"cg_iterations", std::to_string(cg_iterations)},
      {"backtrack_coeff", fmt(backtrack_coeff)},
      {"backtrack_steps", std::to_string(backtrack_steps)},
      {"eval_interval", std::to_string(eval_interval)},
      {"eval_steps", std::to_string(eval_steps)},
      {"metric_max_states", std::to_string(metric_max_states)},
      {"metric_eps", fmt(metric_eps)},
      {"metric_step", fmt(metric_step)},
      {"metric_steps", std::to_string(metric_steps)},
      {"workers", std::to_string(workers)},
      {"out_dir", out_dir},
      {"demos", demos},
      {"expert", expert},
  };
  for (const auto& [k, v] : env_params) m["env." + k] = fmt(v);
  return m;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override '" + o + "': expected key=value");
    cfg.set(trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(ss.str())) cfg.set(k, v);
  }
  apply_overrides(cfg, overrides);
  return cfg;
}

void write_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& [k, v] : cfg.to_map()) out << k << " = " << v << '\n';
}

}  // namespace spacil
