// spacil command-line interface.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spacil/config.hpp"
#include "spacil/harness.hpp"
#include "spacil/theory.hpp"

using namespace spacil;

namespace {

struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string env;
  std::string out;
  long long seed = -1;
  int seeds = 0;
  int iterations = 0;
  int workers = 0;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config,-c", o.config, "key=value config file");
  app->add_option("--set,-s", o.sets, "override, key=value (repeatable)");
  app->add_option("--env", o.env, "pendulum | point-reacher");
  app->add_option("--out,-o", o.out, "output directory or file");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--seeds", o.seeds, "number of consecutive seeds to train");
  app->add_option("--iterations", o.iterations, "training iterations");
  app->add_option("--workers", o.workers, "rollout threads");
}

RunConfig build_config(const CommonOpts& o, std::vector<std::string> extra = {}) {
  std::vector<std::string> ov = o.sets;
  if (!o.env.empty()) ov.push_back("env=" + o.env);
  if (!o.out.empty()) ov.push_back("out_dir=" + o.out);
  if (o.seed >= 0) ov.push_back("seed=" + std::to_string(o.seed));
  if (o.seeds > 0) ov.push_back("seeds=" + std::to_string(o.seeds));
  if (o.iterations > 0) ov.push_back("iterations=" + std::to_string(o.iterations));
  if (o.workers > 0) ov.push_back("workers=" + std::to_string(o.workers));
  ov.insert(ov.end(), extra.begin(), extra.end());
  RunConfig cfg = load_config(o.config, ov);
  return cfg;
}

std::string num(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

void print_eval(const EvalResult& ev) {
  std::cout << std::setprecision(6) << "G = " << ev.g_mean << " +- " << ev.g_std << "  J = " << ev.j_mean << " +- "
            << ev.j_std << "  (" << ev.returns.size() << " episodes)\n";
}

void report_seeds(const RunConfig& cfg, const std::vector<TrainResult>& runs) {
  for (std::size_t k = 0; k < runs.size(); ++k)
    std::cout << "seed " << cfg.seed + k << ": best eval return " << runs[k].best_return << " at iteration "
              << runs[k].best_iteration << "\n";
  std::cout << "outputs in " << cfg.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth adversarial imitation learning toolkit"};
  app.require_subcommand(1);

  // expert train
  CommonOpts expert_o;
  auto* expert = app.add_subcommand("expert", "expert policy");
  auto* expert_train = expert->add_subcommand("train", "TRPO on the true cost");
  expert->require_subcommand(1);
  add_common(expert_train, expert_o);

  // demos generate
  CommonOpts demos_o;
  std::string demos_ckpt, demos_file;
  int demos_n = 0;
  auto* demos = app.add_subcommand("demos", "demonstrations");
  auto* demos_gen = demos->add_subcommand("generate", "sample expert episodes");
  demos->require_subcommand(1);
  add_common(demos_gen, demos_o);
  demos_gen->add_option("--expert", demos_ckpt, "expert checkpoint")->required();
  demos_gen->add_option("--n", demos_n, "number of trajectories (default: expert_trajectories)");
  demos_gen->add_option("--file", demos_file, "demo file to write")->required();

  // il train
  CommonOpts il_o;
  std::string il_algo = "spacil", il_demos;
  double il_eps = 0, il_lr = 0;
  int il_steps = 0;
  auto* il = app.add_subcommand("il", "imitation learning");
  auto* il_train = il->add_subcommand("train", "adversarial imitation");
  il->require_subcommand(1);
  add_common(il_train, il_o);
  il_train->add_option("--algo", il_algo, "gail | spacil")->check(CLI::IsMember({"gail", "spacil"}));
  il_train->add_option("--demos", il_demos, "demo file");
  il_train->add_option("--eps", il_eps, "regularizer ball radius");
  il_train->add_option("--pgd-lr", il_lr, "inner ascent step");
  il_train->add_option("--pgd-steps", il_steps, "inner ascent steps");

  // eval / smoothness
  CommonOpts eval_o;
  std::string eval_ckpt;
  int eval_episodes = 0;
  double eval_eps = 0, eval_lr = 0;
  int eval_steps = 0;
  auto* evalc = app.add_subcommand("eval", "mean-action evaluation (G and J)");
  add_common(evalc, eval_o);
  evalc->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
  evalc->add_option("--episodes", eval_episodes, "episodes (default: eval_steps / horizon)");

  CommonOpts sm_o;
  std::string sm_ckpt;
  int sm_episodes = 0;
  auto* smooth = app.add_subcommand("smoothness", "smoothness metric J");
  add_common(smooth, sm_o);
  smooth->add_option("--checkpoint", sm_ckpt, "policy checkpoint")->required();
  smooth->add_option("--episodes", sm_episodes, "episodes");
  smooth->add_option("--eps", eval_eps, "metric ball radius");
  smooth->add_option("--pgd-lr", eval_lr, "metric ascent step (fraction of eps)");
  smooth->add_option("--pgd-steps", eval_steps, "metric ascent steps");

  // perturb
  CommonOpts pt_o;
  std::string pt_ckpt, pt_stds, pt_csv;
  int pt_draws = 5, pt_episodes = 0;
  auto* perturb = app.add_subcommand("perturb", "parameter-noise study");
  add_common(perturb, pt_o);
  perturb->add_option("--checkpoint", pt_ckpt, "policy checkpoint")->required();
  perturb->add_option("--stds", pt_stds, "comma-separated noise stds");
  perturb->add_option("--draws", pt_draws, "noise draws per std");
  perturb->add_option("--episodes", pt_episodes, "episodes");
  perturb->add_option("--csv", pt_csv, "output CSV (default stdout)");

  // sweep
  CommonOpts sw_o;
  std::string sw_l1, sw_l2, sw_demos, sw_csv;
  auto* sweep = app.add_subcommand("sweep", "lambda1 x lambda2 grid");
  add_common(sweep, sw_o);
  sweep->add_option("--demos", sw_demos, "demo file");
  sweep->add_option("--lambda1", sw_l1, "comma-separated lambda1 values");
  sweep->add_option("--lambda2", sw_l2, "comma-separated lambda2 values");
  sweep->add_option("--csv", sw_csv, "output CSV (default stdout)");

  // theory verify
  double th_lc = 1.0, th_gamma = 0.9, th_temp = 0.0;
  int th_res = 201;
  std::string th_csv;
  auto* theory = app.add_subcommand("theory", "Lipschitz value-function checks");
  auto* verify = theory->add_subcommand("verify", "value bound and greedy-map constant");
  theory->require_subcommand(1);
  verify->add_option("--lc", th_lc, "cost Lipschitz constant");
  verify->add_option("--gamma", th_gamma, "discount");
  verify->add_option("--resolution", th_res, "state grid nodes");
  verify->add_option("--temperature", th_temp, "Boltzmann temperature for the greedy map");
  verify->add_option("--csv", th_csv, "CSV output (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (expert_train->parsed()) {
      RunConfig cfg = build_config(expert_o, {"algo=trpo-expert"});
      report_seeds(cfg, run_seeds(cfg, run_expert));
    } else if (demos_gen->parsed()) {
      RunConfig cfg = build_config(demos_o);
      Normalizer norm;
      const GaussianPolicy pi = load_policy(demos_ckpt, &norm);
      const EnvPtr env = make_env(cfg.env, cfg.env_params);
      const int n = demos_n > 0 ? demos_n : cfg.expert_trajectories;
      const DemoSet d = generate_demos(*env, pi, norm, n, cfg.seed, cfg.workers);
      write_demos(d, demos_file);
      const EvalResult ev = evaluate(*env, pi, norm, eval_options(cfg, *env));
      std::cout << "wrote " << n << " trajectories to " << demos_file << "; demo return " << demo_return(*env, d)
                << ", expert eval return " << ev.g_mean << "\n";
    } else if (il_train->parsed()) {
      std::vector<std::string> extra{"algo=" + il_algo};
      if (!il_demos.empty()) extra.push_back("demos=" + il_demos);
      if (il_eps > 0) extra.push_back("eps=" + num(il_eps));
      if (il_lr > 0) extra.push_back("pgd_lr=" + num(il_lr));
      if (il_steps > 0) extra.push_back("pgd_steps=" + std::to_string(il_steps));
      const RunConfig cfg = build_config(il_o, extra);
      report_seeds(cfg, run_seeds(cfg, run_il));
    } else if (evalc->parsed() || smooth->parsed()) {
      const bool is_eval = evalc->parsed();
      std::vector<std::string> extra;
      if (!is_eval) {
        if (eval_eps > 0) extra.push_back("metric_eps=" + num(eval_eps));
        if (eval_lr > 0) extra.push_back("metric_step=" + num(eval_lr));
        if (eval_steps > 0) extra.push_back("metric_steps=" + std::to_string(eval_steps));
      }
      const RunConfig cfg = build_config(is_eval ? eval_o : sm_o, extra);
      Normalizer norm;
      const GaussianPolicy pi = load_policy(is_eval ? eval_ckpt : sm_ckpt, &norm);
      const EnvPtr env = make_env(cfg.env, cfg.env_params);
      EvalOptions eo = eval_options(cfg, *env);
      const int eps_n = is_eval ? eval_episodes : sm_episodes;
      if (eps_n > 0) eo.episodes = eps_n;
      print_eval(evaluate(*env, pi, norm, eo));
    } else if (perturb->parsed()) {
      const RunConfig cfg = build_config(pt_o);
      Normalizer norm;
      const GaussianPolicy pi = load_policy(pt_ckpt, &norm);
      const EnvPtr env = make_env(cfg.env, cfg.env_params);
      EvalOptions eo = eval_options(cfg, *env);
      if (pt_episodes > 0) eo.episodes = pt_episodes;
      const auto stds = pt_stds.empty() ? kDefaultPerturbStds : parse_double_list(pt_stds);
      const auto rows = perturb_study(*env, pi, norm, stds, pt_draws, cfg.seed, eo);
      if (pt_csv.empty()) {
        write_perturb_csv(std::cout, rows);
      } else {
        std::ofstream f(pt_csv);
        write_perturb_csv(f, rows);
      }
    } else if (sweep->parsed()) {
      std::vector<std::string> extra;
      if (!sw_demos.empty()) extra.push_back("demos=" + sw_demos);
      const RunConfig cfg = build_config(sw_o, extra);
      if (cfg.demos.empty()) throw std::invalid_argument("sweep: --demos or config key 'demos' is required");
      const DemoSet demos_set = read_demos(cfg.demos);
      const auto l1 = sw_l1.empty() ? kDefaultSweepLambda1 : parse_double_list(sw_l1);
      const auto l2 = sw_l2.empty() ? kDefaultSweepLambda2 : parse_double_list(sw_l2);
      const auto cells = lambda_sweep(cfg, make_env(cfg.env, cfg.env_params), demos_set, l1, l2);
      if (sw_csv.empty()) {
        write_sweep_csv(std::cout, cells);
      } else {
        std::ofstream f(sw_csv);
        write_sweep_csv(f, cells);
      }
    } else if (verify->parsed()) {
      const theory::LipschitzMdp mdp = theory::LipschitzMdp::tent(th_lc, th_gamma, th_res);
      const auto t1 = theory::verify_theorem1(mdp);
      theory::GreedyMapReport t2;
      if (th_temp > 0) t2 = theory::verify_theorem2(mdp, th_temp);
      std::ostringstream csv;
      theory::write_report(std::cout, csv, mdp, t1, th_temp > 0 ? &t2 : nullptr);
      if (th_csv.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream(th_csv) << csv.str();
      }
      return t1.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
