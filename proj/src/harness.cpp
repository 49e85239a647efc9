#include "spacil/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "spacil/random.hpp"
#include "spacil/trpo.hpp"

namespace spacil {

namespace {

// Stream tags for derive_seed(master, {tag, ...}).
enum : std::uint64_t {
  kTagPolicyInit = 1,
  kTagValueInit,
  kTagDiscInit,
  kTagRollout,
  kTagEval,
  kTagValueFit,
  kTagPolicyReg,
  kTagMix,
  kTagCostReg,
  kTagPerturb,
};

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

void require_finite(double x, const char* what, int iteration) {
  if (!std::isfinite(x)) {
    std::ostringstream os;
    os << "non-finite " << what << " at iteration " << iteration;
    throw std::runtime_error(os.str());
  }
}

TrpoConfig trpo_config(const RunConfig& cfg) {
  TrpoConfig t;
  t.max_kl = cfg.max_kl;
  t.cg_damping = cfg.cg_damping;
  t.cg_iterations = cfg.cg_iterations;
  t.backtrack_coeff = cfg.backtrack_coeff;
  t.backtrack_steps = cfg.backtrack_steps;
  t.lambda1 = cfg.lambda1;
  t.reg_in_direction = cfg.reg_in_direction;
  return t;
}

struct Learner {
  GaussianPolicy pi;
  FlatParams value;
  AdamState value_adam;
};

Learner make_learner(const RunConfig& cfg, const EnvSpec& spec) {
  Learner l;
  l.pi = GaussianPolicy::make(MlpSpec::make(spec.state_dim, cfg.policy_hidden, spec.action_dim), derive_seed(cfg.seed, {kTagPolicyInit}),
                              cfg.init_log_std);
  l.value = init_params<double>(MlpSpec::make(spec.state_dim, cfg.value_hidden, 1), derive_seed(cfg.seed, {kTagValueInit}));
  l.value_adam = AdamState::fresh(l.value.values.size(), cfg.value_lr);
  return l;
}

// GAE, value regression and the policy batch; fills the row's value/return fields.
PolicyBatch prepare_policy_batch(const RunConfig& cfg, Learner& l, Batch& batch, int k, MetricsRow& row) {
  gae(batch, l.value, cfg.gamma, cfg.tau, cfg.normalize_advantages);
  ValueFitConfig vf;
  vf.epochs = cfg.value_epochs;
  vf.minibatch = cfg.value_minibatch;
  row.value_mse = fit_value(l.value, batch.obs, batch.value_targets, l.value_adam, vf,
                            derive_seed(cfg.seed, {kTagValueFit, static_cast<std::uint64_t>(k)}));
  std::vector<double> rets;
  for (const auto& tr : batch.trajectories) rets.push_back(discounted_return(tr, 1.0));
  row.train_return = mean_of(rets);
  return make_policy_batch(l.pi, batch);
}

void record_step(const TrpoResult& step, TrainResult& out, MetricsRow& row, int k) {
  row.kl = step.kl;
  row.accepted = step.accepted;
  row.surrogate = step.objective_after;
  require_finite(step.objective_before, "policy objective", k);
  if (step.accepted) out.accepted_kls.push_back(step.kl);
}

void maybe_evaluate(const RunConfig& cfg, const Env& env, const GaussianPolicy& pi, const Normalizer& norm, int k,
                    TrainResult& out, MetricsRow& row) {
  if ((k + 1) % cfg.eval_interval != 0 && k + 1 != cfg.iterations) return;
  const EvalResult ev = evaluate(env, pi, norm, eval_options(cfg, env));
  row.evaluated = true;
  row.g_mean = ev.g_mean;
  row.g_std = ev.g_std;
  row.j_mean = ev.j_mean;
  row.j_std = ev.j_std;
  if (out.best_iteration < 0 || ev.g_mean > out.best_return) {
    out.best_return = ev.g_mean;
    out.best_iteration = k;
    out.best_policy = pi;
  }
}

}  // namespace

// --- metrics ---------------------------------------------------------------

void write_metrics_header(std::ostream& os) {
  os << "# spacil-metrics v" << kMetricsSchemaVersion << '\n';
  os << "iteration,G_mean,G_std,J_mean,J_std,train_return,disc_loss,disc_accuracy,mean_kl,accepted,surrogate,"
        "policy_reg,cost_reg,value_mse\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  std::ostringstream s;
  s << std::setprecision(17) << r.iteration << ',';
  if (r.evaluated)
    s << r.g_mean << ',' << r.g_std << ',' << r.j_mean << ',' << r.j_std << ',';
  else
    s << ",,,,";
  s << r.train_return << ',' << r.disc_loss << ',' << r.disc_accuracy << ',' << r.kl << ',' << (r.accepted ? 1 : 0)
    << ',' << r.surrogate << ',' << r.policy_reg << ',' << r.cost_reg << ',' << r.value_mse << '\n';
  os << s.str();
}

// --- evaluation ------------------------------------------------------------

PgdConfig regularizer_pgd(const RunConfig& cfg) {
  PgdConfig p;
  p.eps = cfg.eps;
  p.step = cfg.pgd_lr;
  p.steps = cfg.pgd_steps;
  return p;
}

BallGeometry ball_geometry(const RunConfig& cfg, const Normalizer& norm) {
  BallGeometry g;
  if (cfg.eps_space == "raw") g.scale = norm.stddev().cwiseInverse();
  return g;
}

EvalOptions eval_options(const RunConfig& cfg, const Env& env) {
  EvalOptions o;
  const int h = env.spec().horizon;
  o.episodes = std::max(1, (cfg.eval_steps + h - 1) / h);
  o.seed = derive_seed(cfg.seed, {kTagEval});
  o.gamma = cfg.eval_gamma;
  o.metric.eps = cfg.metric_eps;
  o.metric.step = cfg.metric_step;
  o.metric.steps = cfg.metric_steps;
  o.metric.normalized_step = true;
  o.metric_max_states = cfg.metric_max_states;
  o.raw_space = cfg.eps_space == "raw";
  o.workers = cfg.workers;
  return o;
}

EvalResult evaluate(const Env& env, const GaussianPolicy& pi, const Normalizer& norm, const EvalOptions& opts) {
  SampleOptions so;
  so.stochastic = false;
  so.use_true_cost = true;
  so.workers = opts.workers;
  const Batch b = sample_trajectories(env, pi, norm, opts.episodes, opts.seed, 0, so);
  EvalResult r;
  Eigen::Index total = 0;
  for (const auto& tr : b.trajectories) {
    r.returns.push_back(true_return(tr, opts.gamma));
    total += tr.length();
  }
  r.g_mean = mean_of(r.returns);
  r.g_std = std_of(r.returns);

  // Every stride-th visited state, so at most metric_max_states in total.
  const Eigen::Index stride = std::max<Eigen::Index>(1, (total + opts.metric_max_states - 1) / opts.metric_max_states);
  std::vector<Eigen::Index> owner;
  std::vector<Eigen::Index> cols;
  Mat all(pi.state_dim(), total);
  Eigen::Index off = 0;
  for (std::size_t e = 0; e < b.trajectories.size(); ++e) {
    const auto& tr = b.trajectories[e];
    for (Eigen::Index t = 0; t < tr.length(); t += stride) {
      all.col(off) = tr.obs.col(t);
      owner.push_back(static_cast<Eigen::Index>(e));
      ++off;
    }
  }
  all.conservativeResize(Eigen::NoChange, off);
  BallGeometry geom;
  if (opts.raw_space) geom.scale = norm.stddev().cwiseInverse();
  const MetricResult m = smoothness_metric(pi, all, opts.metric, opts.seed, geom);
  std::vector<double> sum(b.trajectories.size(), 0.0), cnt(b.trajectories.size(), 0.0);
  for (Eigen::Index j = 0; j < off; ++j) {
    sum[static_cast<std::size_t>(owner[static_cast<std::size_t>(j)])] += m.per_state[j];
    cnt[static_cast<std::size_t>(owner[static_cast<std::size_t>(j)])] += 1.0;
  }
  for (std::size_t e = 0; e < sum.size(); ++e)
    if (cnt[e] > 0) r.episode_j.push_back(sum[e] / cnt[e]);
  r.j_mean = mean_of(r.episode_j);
  r.j_std = std_of(r.episode_j);
  return r;
}

// --- expert ----------------------------------------------------------------

TrainResult train_expert(const RunConfig& cfg_in, const EnvPtr& env, const RowSink& sink) {
  RunConfig cfg = cfg_in;
  cfg.lambda1 = cfg.lambda2 = 0.0;
  cfg.validate();
  const auto& spec = env->spec();
  Learner l = make_learner(cfg, spec);
  TrainResult out;
  out.normalizer = Normalizer(spec.state_dim);
  const TrpoConfig tc = trpo_config(cfg);
  const int n = std::max(1, (cfg.batch_steps + spec.horizon - 1) / spec.horizon);
  SampleOptions so;
  so.workers = cfg.workers;
  for (int k = 0; k < cfg.iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsRow row;
    row.iteration = k;
    Batch batch = sample_trajectories(*env, l.pi, out.normalizer, n, derive_seed(cfg.seed, {kTagRollout}),
                                      static_cast<std::uint64_t>(k), so);
    for (const auto& tr : batch.trajectories)
      for (Eigen::Index t = 0; t < tr.length(); ++t) out.normalizer.observe(tr.states.col(t));
    const PolicyBatch pb = prepare_policy_batch(cfg, l, batch, k, row);
    const TrpoResult step = trpo_update(l.pi, pb, tc);
    record_step(step, out, row, k);
    l.pi = step.policy;
    maybe_evaluate(cfg, *env, l.pi, out.normalizer, k, out, row);
    if (row.evaluated && out.best_iteration == k) out.best_normalizer = out.normalizer;
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.rows.push_back(row);
    if (sink) sink(row);
  }
  out.policy = l.pi;
  return out;
}

DemoSet generate_demos(const Env& env, const GaussianPolicy& expert, const Normalizer& norm, int n, std::uint64_t seed,
                       int workers) {
  if (n < 1) throw std::invalid_argument("generate_demos: n must be >= 1");
  SampleOptions so;
  so.stochastic = true;
  so.use_true_cost = true;
  so.workers = workers;
  Batch b = sample_trajectories(env, expert, norm, n, seed, 0, so);
  DemoSet d;
  d.state_dim = env.spec().state_dim;
  d.action_dim = env.spec().action_dim;
  d.normalizer = norm;
  d.seed = seed;
  for (auto& tr : b.trajectories) {
    Trajectory t;
    t.states = std::move(tr.states);
    t.actions = std::move(tr.actions);
    d.trajectories.push_back(std::move(t));
  }
  return d;
}

double demo_return(const Env& env, const DemoSet& demos) {
  std::vector<double> rets;
  for (const auto& tr : demos.trajectories) {
    double g = 0.0;
    for (Eigen::Index t = 0; t < tr.length(); ++t) g -= env.step(tr.states.col(t), tr.actions.col(t)).true_cost;
    rets.push_back(g);
  }
  return mean_of(rets);
}

// --- imitation -------------------------------------------------------------

TrainResult train_il(const RunConfig& cfg_in, const EnvPtr& env, const DemoSet& demos, const RowSink& sink) {
  const RunConfig cfg = cfg_in.resolved();
  cfg.validate();
  const auto& spec = env->spec();
  if (demos.state_dim != spec.state_dim || demos.action_dim != spec.action_dim)
    throw std::invalid_argument("train_il: demonstration dimensions do not match the environment");
  if (demos.trajectories.empty()) throw std::invalid_argument("train_il: no demonstrations");
  if (demos.normalizer.dim() != spec.state_dim) throw std::invalid_argument("train_il: demo normalizer dimension mismatch");

  Learner l = make_learner(cfg, spec);
  Discriminator disc = Discriminator::make(spec.state_dim, spec.action_dim, cfg.disc_hidden,
                                           derive_seed(cfg.seed, {kTagDiscInit}), cfg.disc_lr);
  TrainResult out;
  out.normalizer = demos.normalizer;  // frozen
  out.best_normalizer = demos.normalizer;
  const Normalizer& norm = out.normalizer;
  const Mat expert_obs = norm.normalize_batch(demos.all_states());
  const Mat expert_actions = demos.all_actions();
  const TrpoConfig tc = trpo_config(cfg);
  const PgdConfig pgd = regularizer_pgd(cfg);
  const BallGeometry geom = ball_geometry(cfg, norm);
  SampleOptions so;
  so.use_true_cost = false;
  so.workers = cfg.workers;

  for (int k = 0; k < cfg.iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto uk = static_cast<std::uint64_t>(k);
    MetricsRow row;
    row.iteration = k;

    Batch batch = sample_trajectories(*env, l.pi, norm, cfg.agent_trajectories, derive_seed(cfg.seed, {kTagRollout}), uk, so);
    for (auto& tr : batch.trajectories) tr.costs = costs(disc, tr.obs, tr.actions);
    const PolicyBatch pb = prepare_policy_batch(cfg, l, batch, k, row);

    PolicyRegularizerEstimate preg;
    const bool use_preg = cfg.lambda1 > 0.0;
    if (use_preg) {
      preg = policy_regularizer(l.pi, batch.obs, discount_weights(batch.time_index, cfg.gamma), pgd,
                                derive_seed(cfg.seed, {kTagPolicyReg, uk}), geom);
      row.policy_reg = preg.value;
    }
    const TrpoResult step = trpo_update(l.pi, pb, tc, use_preg ? &preg : nullptr);
    record_step(step, out, row, k);
    l.pi = step.policy;

    for (int d = 0; d < cfg.disc_steps_per_iter; ++d) {
      CostRegularizerEstimate creg;
      const bool use_creg = cfg.lambda2 > 0.0;
      if (use_creg) {
        Rng mix_rng(derive_seed(cfg.seed, {kTagMix, uk, static_cast<std::uint64_t>(d)}));
        const int K = cfg.cost_reg_samples > 0 ? cfg.cost_reg_samples : static_cast<int>(batch.steps());
        const MixedBatch mixed = mix_states(batch.obs, expert_obs, K, mix_rng);
        creg = cost_regularizer(disc, l.pi, mixed.states, pgd, derive_seed(cfg.seed, {kTagCostReg, uk, static_cast<std::uint64_t>(d)}),
                                cfg.perturb_state, geom);
      }
      const DiscriminatorUpdate du =
          update_discriminator(disc, batch.obs, batch.actions, expert_obs, expert_actions, cfg.lambda2, use_creg ? &creg : nullptr);
      require_finite(du.loss, "discriminator loss", k);
      row.disc_loss = du.loss;
      row.disc_accuracy = du.accuracy;
      row.cost_reg = du.regularizer;
    }

    maybe_evaluate(cfg, *env, l.pi, norm, k, out, row);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.rows.push_back(row);
    if (sink) sink(row);
  }
  out.policy = l.pi;
  return out;
}

// --- perturbation study ----------------------------------------------------

std::vector<PerturbRow> perturb_study(const Env& env, const GaussianPolicy& pi, const Normalizer& norm,
                                      const std::vector<double>& stds, int draws, std::uint64_t seed,
                                      const EvalOptions& opts) {
  if (draws < 1) throw std::invalid_argument("perturb_study: draws must be >= 1");
  const EvalResult base = evaluate(env, pi, norm, opts);
  std::vector<PerturbRow> rows;
  for (std::size_t i = 0; i < stds.size(); ++i) {
    if (stds[i] < 0.0) throw std::invalid_argument("perturb_study: std must be >= 0");
    for (int d = 0; d < draws; ++d) {
      PerturbRow r;
      r.std = stds[i];
      r.draw = d;
      EvalResult ev = base;
      if (stds[i] > 0.0) {
        Rng rng(derive_seed(seed, {kTagPerturb, i, static_cast<std::uint64_t>(d)}));
        GaussianPolicy noisy = pi;
        noisy.set_flat(pi.flat() + stds[i] * standard_normal<double>(pi.flat_size(), rng));
        ev = evaluate(env, noisy, norm, opts);
      }
      r.g = ev.g_mean;
      r.j = ev.j_mean;
      r.scaled_g = base.g_mean != 0.0 ? ev.g_mean / base.g_mean : 1.0;
      r.scaled_j = base.j_mean != 0.0 ? ev.j_mean / base.j_mean : 1.0;
      rows.push_back(r);
    }
  }
  return rows;
}

void write_perturb_csv(std::ostream& os, const std::vector<PerturbRow>& rows) {
  os << "std,draw,G,J,scaled_G,scaled_J\n" << std::setprecision(17);
  for (const auto& r : rows) os << r.std << ',' << r.draw << ',' << r.g << ',' << r.j << ',' << r.scaled_g << ',' << r.scaled_j << '\n';
}

// --- sweep -----------------------------------------------------------------

std::vector<SweepCell> lambda_sweep(const RunConfig& cfg, const EnvPtr& env, const DemoSet& demos,
                                    const std::vector<double>& lambda1s, const std::vector<double>& lambda2s) {
  std::vector<SweepCell> cells;
  for (double l1 : lambda1s) {
    for (double l2 : lambda2s) {
      RunConfig c = cfg;
      c.algo = "spacil";
      c.lambda1 = l1;
      c.lambda2 = l2;
      TrainResult tr = train_il(c, env, demos);
      const EvalResult ev = evaluate(*env, tr.best_policy, tr.best_normalizer, eval_options(c, *env));
      cells.push_back({l1, l2, ev.g_mean, ev.j_mean, std::move(tr.rows)});
    }
  }
  return cells;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "lambda1,lambda2,G,J\n" << std::setprecision(17);
  for (const auto& c : cells) os << c.lambda1 << ',' << c.lambda2 << ',' << c.g << ',' << c.j << '\n';
}

// --- file-level runs -------------------------------------------------------

namespace {

struct RunFiles {
  std::ofstream metrics;
  std::ofstream timing;
};

RunFiles open_run_files(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  write_config(cfg, cfg.out_dir + "/config.txt");
  RunFiles f{std::ofstream(cfg.out_dir + "/metrics.csv"), std::ofstream(cfg.out_dir + "/timing.csv")};
  if (!f.metrics || !f.timing) throw std::runtime_error("cannot write run files under '" + cfg.out_dir + "'");
  write_metrics_header(f.metrics);
  f.timing << "iteration,wall_seconds\n";
  return f;
}

RowSink file_sink(RunFiles& f) {
  return [&f](const MetricsRow& r) {
    write_metrics_row(f.metrics, r);
    f.metrics.flush();
    f.timing << r.iteration << ',' << r.wall_seconds << '\n';
  };
}

}  // namespace

TrainResult run_expert(const RunConfig& cfg) {
  RunFiles f = open_run_files(cfg);
  TrainResult r = train_expert(cfg, make_env(cfg.env, cfg.env_params), file_sink(f));
  save_policy(cfg.out_dir + "/best.ckpt", r.best_policy, &r.best_normalizer);
  save_policy(cfg.out_dir + "/final.ckpt", r.policy, &r.normalizer);
  return r;
}

TrainResult run_il(const RunConfig& cfg) {
  if (cfg.demos.empty()) throw std::invalid_argument("il: config key 'demos' is required");
  const DemoSet demos = read_demos(cfg.demos);
  RunFiles f = open_run_files(cfg.resolved());
  TrainResult r = train_il(cfg, make_env(cfg.env, cfg.env_params), demos, file_sink(f));
  save_policy(cfg.out_dir + "/best.ckpt", r.best_policy, &r.best_normalizer);
  save_policy(cfg.out_dir + "/final.ckpt", r.policy, &r.normalizer);
  return r;
}

std::vector<TrainResult> run_seeds(const RunConfig& cfg, const std::function<TrainResult(const RunConfig&)>& run) {
  if (cfg.seeds <= 1) return {run(cfg)};
  std::vector<TrainResult> out;
  for (int k = 0; k < cfg.seeds; ++k) {
    RunConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(k);
    c.seeds = 1;
    c.out_dir = cfg.out_dir + "/seed-" + std::to_string(k);
    out.push_back(run(c));
  }
  std::ofstream os(cfg.out_dir + "/seeds.csv");
  os << "seed,best_iteration,best_return\n" << std::setprecision(17);
  for (int k = 0; k < cfg.seeds; ++k)
    os << cfg.seed + static_cast<std::uint64_t>(k) << ',' << out[static_cast<std::size_t>(k)].best_iteration << ','
       << out[static_cast<std::size_t>(k)].best_return << '\n';
  if (!os) throw std::runtime_error("cannot write " + cfg.out_dir + "/seeds.csv");
  return out;
}

}  // namespace spacil
