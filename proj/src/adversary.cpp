#include "spacil/adversary.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace spacil {

Discriminator Discriminator::make(int state_dim, int action_dim, const std::vector<int>& hidden, std::uint64_t seed,
                                  double lr) {
  Discriminator d;
  d.net = init_params(MlpSpec::make(state_dim + action_dim, hidden, 1), seed);
  d.adam = AdamState::fresh(d.net.values.size(), lr);
  d.state_dim_ = state_dim;
  return d;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  const double v = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  return std::min(v, -std::numeric_limits<double>::denorm_min());
}

Mat stack_inputs(const Mat& states, const Mat& actions) {
  if (states.cols() != actions.cols()) throw std::invalid_argument("discriminator: state/action count mismatch");
  Mat X(states.rows() + actions.rows(), states.cols());
  X.topRows(states.rows()) = states;
  X.bottomRows(actions.rows()) = actions;
  return X;
}

Vec logits(const Discriminator& d, const Mat& states, const Mat& actions) {
  return forward_batch(d.net, stack_inputs(states, actions)).row(0).transpose();
}

Vec costs(const Discriminator& d, const Mat& states, const Mat& actions) {
  return logits(d, states, actions).unaryExpr([](double x) { return log_sigmoid(x); });
}

double cost(const Discriminator& d, const Vec& s, const Vec& a) { return costs(d, Mat(s), Mat(a))[0]; }

MixedBatch mix_states(const Mat& agent_states, const Mat& expert_states, int samples, Rng& rng,
                      std::optional<double> forced_zeta) {
  if (agent_states.cols() == 0 || expert_states.cols() == 0) throw std::invalid_argument("mix_states: empty batch");
  if (agent_states.rows() != expert_states.rows()) throw std::invalid_argument("mix_states: dimension mismatch");
  MixedBatch mb;
  mb.states.resize(agent_states.rows(), samples);
  mb.zeta.resize(samples);
  mb.expert_index.resize(static_cast<std::size_t>(samples));
  mb.agent_index.resize(static_cast<std::size_t>(samples));
  std::uniform_int_distribution<Eigen::Index> pick_e(0, expert_states.cols() - 1), pick_a(0, agent_states.cols() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < samples; ++k) {
    const auto ie = pick_e(rng);
    const auto ia = pick_a(rng);
    double z = forced_zeta ? *forced_zeta : u(rng);
    if (z >= 1.0) z = std::nextafter(1.0, 0.0);
    mb.zeta[k] = z;
    mb.expert_index[static_cast<std::size_t>(k)] = static_cast<int>(ie);
    mb.agent_index[static_cast<std::size_t>(k)] = static_cast<int>(ia);
    mb.states.col(k) = z * expert_states.col(ie) + (1.0 - z) * agent_states.col(ia);
  }
  return mb;
}

// --- cost regularizer ------------------------------------------------------

namespace {

/// dc/dx for c = log S(x) is 1 - S(x) = S(-x).
Vec cost_slope(const Vec& x) {
  return x.unaryExpr([](double v) { return sigmoid(-v); });
}

double sign_nonneg(double v) { return v >= 0.0 ? 1.0 : -1.0; }

}  // namespace

CostRegularizerEstimate cost_regularizer(const Discriminator& d, const GaussianPolicy& pi, const Mat& mixed_states,
                                         const PgdConfig& cfg, std::uint64_t seed, bool perturb_state,
                                         const BallGeometry& geom) {
  CostRegularizerEstimate est;
  est.states = mixed_states;
  est.perturb_state = perturb_state;
  if (mixed_states.cols() == 0) return est;
  const int ds = static_cast<int>(mixed_states.rows());
  est.actions_clean = mean_actions(pi, mixed_states);
  const Vec c0 = costs(d, mixed_states, est.actions_clean);
  BatchObjective obj = [&](const Mat& deltas) {
    const Mat sp = geom.apply(mixed_states, deltas);
    const Mat ap = mean_actions(pi, sp);
    const Mat X1 = stack_inputs(perturb_state ? sp : mixed_states, ap);
    const Vec x1 = forward_batch(d.net, X1).row(0).transpose();
    const Vec c1 = x1.unaryExpr([](double v) { return log_sigmoid(v); });
    const Vec diff = c1 - c0;
    Vec up = cost_slope(x1);
    for (Eigen::Index j = 0; j < up.size(); ++j) up[j] *= sign_nonneg(diff[j]);
    const Mat g_in = backward_batch(d.net, X1, Mat(up.transpose())).input;
    Mat g = backward_batch(pi.mean_net, sp, Mat(g_in.bottomRows(g_in.rows() - ds))).input;
    if (perturb_state) g += g_in.topRows(ds);
    return std::pair<Vec, Mat>{diff.cwiseAbs(), geom.pull_back(g)};
  };
  const auto r = pgd_max_batch(obj, initial_deltas(mixed_states, cfg, seed), cfg);
  est.perturbed = geom.apply(mixed_states, r.deltas);
  est.actions_perturbed = mean_actions(pi, est.perturbed);
  est.per_state = r.values;
  est.value = r.values.mean();
  return est;
}

namespace {

struct FixedPair {
  Mat x0_in, x1_in;
};

FixedPair fixed_inputs(const CostRegularizerEstimate& est) {
  return {stack_inputs(est.states, est.actions_clean),
          stack_inputs(est.perturb_state ? est.perturbed : est.states, est.actions_perturbed)};
}

}  // namespace

double cost_regularizer_fixed(const FlatParams& net, const CostRegularizerEstimate& est) {
  if (est.states.cols() == 0) return 0.0;
  const auto in = fixed_inputs(est);
  const Vec x0 = forward_batch(net, in.x0_in).row(0).transpose();
  const Vec x1 = forward_batch(net, in.x1_in).row(0).transpose();
  double total = 0.0;
  for (Eigen::Index j = 0; j < x0.size(); ++j) total += std::abs(log_sigmoid(x1[j]) - log_sigmoid(x0[j]));
  return total / static_cast<double>(x0.size());
}

Vec cost_regularizer_gradient(const FlatParams& net, const CostRegularizerEstimate& est) {
  if (est.states.cols() == 0) return Vec::Zero(net.values.size());
  const auto in = fixed_inputs(est);
  const Vec x0 = forward_batch(net, in.x0_in).row(0).transpose();
  const Vec x1 = forward_batch(net, in.x1_in).row(0).transpose();
  const auto K = static_cast<double>(x0.size());
  Mat up0(1, x0.size()), up1(1, x0.size());
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    const double sg = sign_nonneg(log_sigmoid(x1[j]) - log_sigmoid(x0[j]));
    up1(0, j) = sg * sigmoid(-x1[j]) / K;
    up0(0, j) = -sg * sigmoid(-x0[j]) / K;
  }
  return backward_batch(net, in.x1_in, up1).params + backward_batch(net, in.x0_in, up0).params;
}

// --- discriminator objective ----------------------------------------------

double discriminator_objective(const FlatParams& net, const Mat& agent_in, const Mat& expert_in) {
  const Vec xa = forward_batch(net, agent_in).row(0).transpose();
  const Vec xe = forward_batch(net, expert_in).row(0).transpose();
  double a = 0.0, e = 0.0;
  for (Eigen::Index j = 0; j < xa.size(); ++j) a += log_sigmoid(xa[j]);
  for (Eigen::Index j = 0; j < xe.size(); ++j) e += log_sigmoid(-xe[j]);
  return a / static_cast<double>(xa.size()) + e / static_cast<double>(xe.size());
}

Vec discriminator_objective_gradient(const FlatParams& net, const Mat& agent_in, const Mat& expert_in) {
  const Vec xa = forward_batch(net, agent_in).row(0).transpose();
  const Vec xe = forward_batch(net, expert_in).row(0).transpose();
  const auto na = static_cast<double>(xa.size());
  const auto ne = static_cast<double>(xe.size());
  Mat ua(1, xa.size()), ue(1, xe.size());
  for (Eigen::Index j = 0; j < xa.size(); ++j) ua(0, j) = sigmoid(-xa[j]) / na;
  for (Eigen::Index j = 0; j < xe.size(); ++j) ue(0, j) = -sigmoid(xe[j]) / ne;
  return backward_batch(net, agent_in, ua).params + backward_batch(net, expert_in, ue).params;
}

DiscriminatorUpdate update_discriminator(Discriminator& d, const Mat& agent_states, const Mat& agent_actions,
                                         const Mat& expert_states, const Mat& expert_actions, double lambda2,
                                         const CostRegularizerEstimate* reg) {
  if (agent_states.cols() == 0 || expert_states.cols() == 0) throw std::invalid_argument("update_discriminator: empty batch");
  const Mat agent_in = stack_inputs(agent_states, agent_actions);
  const Mat expert_in = stack_inputs(expert_states, expert_actions);
  DiscriminatorUpdate out;
  out.objective = discriminator_objective(d.net, agent_in, expert_in);
  Vec ascent = discriminator_objective_gradient(d.net, agent_in, expert_in);
  if (reg != nullptr && lambda2 > 0.0) {
    out.regularizer = cost_regularizer_fixed(d.net, *reg);
    ascent -= lambda2 * cost_regularizer_gradient(d.net, *reg);
  }
  out.loss = -(out.objective - lambda2 * out.regularizer);
  if (!std::isfinite(out.loss)) throw std::domain_error("update_discriminator: non-finite loss");
  {
    const Vec xa = forward_batch(d.net, agent_in).row(0).transpose();
    const Vec xe = forward_batch(d.net, expert_in).row(0).transpose();
    const double correct = static_cast<double>((xa.array() > 0.0).count() + (xe.array() < 0.0).count());
    out.accuracy = correct / static_cast<double>(xa.size() + xe.size());
  }
  adam_step(d.adam, d.net.values, Vec(-ascent));
  return out;
}

}  // namespace spacil
