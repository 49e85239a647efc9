#pragma once

// Orchestration: expert training, demonstrations, the imitation loop,
// evaluation, the parameter-noise study and the regularization sweep.

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "spacil/adversary.hpp"
#include "spacil/config.hpp"
#include "spacil/envs.hpp"
#include "spacil/policy.hpp"
#include "spacil/rollout.hpp"
#include "spacil/smooth.hpp"

namespace spacil {

inline constexpr int kMetricsSchemaVersion = 1;

struct MetricsRow {
  int iteration = 0;
  bool evaluated = false;
  double g_mean = 0.0;
  double g_std = 0.0;
  double j_mean = 0.0;
  double j_std = 0.0;
  double train_return = 0.0;  // mean undiscounted learning-signal return of the batch
  double disc_loss = 0.0;
  double disc_accuracy = 0.0;
  double kl = 0.0;
  bool accepted = false;
  double surrogate = 0.0;
  double policy_reg = 0.0;
  double cost_reg = 0.0;
  double value_mse = 0.0;
  double wall_seconds = 0.0;  // written to the timing file only
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  double gamma = 1.0;
  PgdConfig metric;
  int metric_max_states = 2000;
  bool raw_space = false;
  int workers = 1;
};

/// Eval settings derived from a run configuration (episodes = ceil(eval_steps / horizon)).
EvalOptions eval_options(const RunConfig& cfg, const Env& env);
PgdConfig regularizer_pgd(const RunConfig& cfg);
BallGeometry ball_geometry(const RunConfig& cfg, const Normalizer& norm);

struct EvalResult {
  double g_mean = 0.0;
  double g_std = 0.0;
  double j_mean = 0.0;  // mean over episodes of the per-episode metric
  double j_std = 0.0;
  std::vector<double> returns;
  std::vector<double> episode_j;
};

/// Mean-action rollouts on a fixed episode set; G from the true cost, J
/// from the smoothness metric on (sub-sampled) visited states.
EvalResult evaluate(const Env& env, const GaussianPolicy& pi, const Normalizer& norm, const EvalOptions& opts);

struct TrainResult {
  GaussianPolicy policy;       // after the last iteration
  GaussianPolicy best_policy;  // best evaluation return
  Normalizer normalizer;       // at the last iteration
  Normalizer best_normalizer;  // paired with best_policy
  double best_return = 0.0;
  int best_iteration = -1;
  std::vector<MetricsRow> rows;
  std::vector<double> accepted_kls;
};

/// Called after every iteration; may stream rows to disk.
using RowSink = std::function<void(const MetricsRow&)>;

/// TRPO on the true environment cost with a running state normalizer.
TrainResult train_expert(const RunConfig& cfg, const EnvPtr& env, const RowSink& sink = {});

/// n stochastic expert episodes with the expert's normalizer attached.
DemoSet generate_demos(const Env& env, const GaussianPolicy& expert, const Normalizer& norm, int n, std::uint64_t seed,
                       int workers = 1);
/// Mean undiscounted true-cost return of the demo episodes re-simulated on `env`.
double demo_return(const Env& env, const DemoSet& demos);

/// The adversarial imitation loop. Regularizers are estimated only when
/// their weight is positive. The learner never reads StepResult::true_cost;
/// evaluation reporting does.
TrainResult train_il(const RunConfig& cfg, const EnvPtr& env, const DemoSet& demos, const RowSink& sink = {});

struct PerturbRow {
  double std = 0.0;
  int draw = 0;
  double g = 0.0;
  double j = 0.0;
  double scaled_g = 1.0;
  double scaled_j = 1.0;
};

inline const std::vector<double> kDefaultPerturbStds{0.001, 0.01, 0.005, 0.009, 0.1};

/// Adds N(0, std^2) noise to every policy parameter and re-evaluates. A
/// std of 0 evaluates the unperturbed policy.
std::vector<PerturbRow> perturb_study(const Env& env, const GaussianPolicy& pi, const Normalizer& norm,
                                      const std::vector<double>& stds, int draws, std::uint64_t seed,
                                      const EvalOptions& opts);
void write_perturb_csv(std::ostream& os, const std::vector<PerturbRow>& rows);

struct SweepCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double g = 0.0;
  double j = 0.0;
  std::vector<MetricsRow> rows;
};

inline const std::vector<double> kDefaultSweepLambda1{0.0, 0.001, 0.01};
inline const std::vector<double> kDefaultSweepLambda2{0.0, 0.001, 1.0};

std::vector<SweepCell> lambda_sweep(const RunConfig& cfg, const EnvPtr& env, const DemoSet& demos,
                                    const std::vector<double>& lambda1s, const std::vector<double>& lambda2s);
void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells);

/// Test stub: forwards to `inner` but reports `sentinel` as the true cost.
class PoisonedCostEnv final : public Env {
 public:
  PoisonedCostEnv(EnvPtr inner, double sentinel) : inner_(std::move(inner)), sentinel_(sentinel) {}
  const EnvSpec& spec() const override { return inner_->spec(); }
  Vec reset(std::uint64_t seed) const override { return inner_->reset(seed); }
  StepResult step(const Vec& state, const Vec& action) const override {
    StepResult r = inner_->step(state, action);
    r.true_cost = sentinel_;
    return r;
  }

 private:
  EnvPtr inner_;
  double sentinel_;
};

/// Writes metrics.csv, timing.csv, config.txt and checkpoints under cfg.out_dir.
TrainResult run_expert(const RunConfig& cfg);
TrainResult run_il(const RunConfig& cfg);

/// Calls `run` for seeds seed .. seed+seeds-1. With more than one seed each
/// run writes under out_dir/seed-<k>, and out_dir/seeds.csv lists the best
/// evaluation return of every seed.
std::vector<TrainResult> run_seeds(const RunConfig& cfg, const std::function<TrainResult(const RunConfig&)>& run);

}  // namespace spacil
