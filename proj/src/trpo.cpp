#include "spacil/trpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spacil {

void TrpoConfig::validate() const {
  if (!(max_kl > 0.0)) throw std::invalid_argument("trpo: max_kl must be > 0");
  if (!(cg_damping >= 0.0)) throw std::invalid_argument("trpo: cg_damping must be >= 0");
  if (cg_iterations < 1) throw std::invalid_argument("trpo: cg_iterations must be >= 1");
  if (!(backtrack_coeff > 0.0 && backtrack_coeff < 1.0)) throw std::invalid_argument("trpo: backtrack_coeff must lie in (0,1)");
  if (backtrack_steps < 1) throw std::invalid_argument("trpo: backtrack_steps must be >= 1");
  if (!(lambda1 >= 0.0)) throw std::invalid_argument("trpo: lambda1 must be >= 0");
}

PolicyBatch make_policy_batch(const GaussianPolicy& old_pi, const Mat& obs, const Mat& actions, const Vec& advantages) {
  if (obs.cols() != actions.cols() || obs.cols() != advantages.size())
    throw std::invalid_argument("make_policy_batch: size mismatch");
  PolicyBatch pb;
  pb.obs = obs;
  pb.actions = actions;
  pb.advantages = advantages;
  pb.mu_old = mean_actions(old_pi, obs);
  pb.log_std_old = old_pi.log_std;
  pb.logp_old = log_prob_batch(pb.mu_old, pb.log_std_old, actions);
  return pb;
}

PolicyBatch make_policy_batch(const GaussianPolicy& old_pi, const Batch& batch) {
  return make_policy_batch(old_pi, batch.obs, batch.actions, batch.advantages);
}

double surrogate_loss(const GaussianPolicy& pi, const PolicyBatch& pb) {
  if (pb.size() == 0) return 0.0;
  const Vec logp = log_prob_batch(mean_actions(pi, pb.obs), pi.log_std, pb.actions);
  const Vec ratio = (logp - pb.logp_old).array().exp().matrix();
  return -ratio.dot(pb.advantages) / static_cast<double>(pb.size());
}

double surrogate_loss(const GaussianPolicy& pi, const GaussianPolicy& old_pi, const Batch& batch) {
  return surrogate_loss(pi, make_policy_batch(old_pi, batch));
}

Vec surrogate_gradient(const GaussianPolicy& pi, const PolicyBatch& pb) {
  Vec g = Vec::Zero(pi.flat_size());
  const Eigen::Index N = pb.size();
  if (N == 0) return g;
  const Mat mu = mean_actions(pi, pb.obs);
  const Vec logp = log_prob_batch(mu, pi.log_std, pb.actions);
  const Vec inv_var = (-2.0 * pi.log_std.array()).exp().matrix();
  // coefficient on d log pi: -ratio * A / N
  const Vec coef = -((logp - pb.logp_old).array().exp() * pb.advantages.array()).matrix() / static_cast<double>(N);
  const Mat d = pb.actions - mu;
  // d log pi / d mu = (a - mu) / sigma^2
  Mat up = d.array().colwise() * inv_var.array();
  up = (up.array().rowwise() * coef.transpose().array()).matrix();
  g.head(pi.mean_net.values.size()) = backward_batch(pi.mean_net, pb.obs, up).params;
  // d log pi / d r = (a - mu)^2 / sigma^2 - 1
  const Mat z2 = d.cwiseAbs2().array().colwise() * inv_var.array();
  g.tail(pi.log_std.size()) = ((z2.array() - 1.0).rowwise() * coef.transpose().array()).rowwise().sum().matrix();
  return g;
}

double mean_kl(const GaussianPolicy& pi, const PolicyBatch& pb) {
  if (pb.size() == 0) return 0.0;
  return kl_batch(pb.mu_old, pb.log_std_old, mean_actions(pi, pb.obs), pi.log_std).mean();
}

Vec mean_kl_gradient(const GaussianPolicy& pi, const PolicyBatch& pb) {
  Vec g = Vec::Zero(pi.flat_size());
  const Eigen::Index N = pb.size();
  if (N == 0) return g;
  const Mat mu = mean_actions(pi, pb.obs);
  const Vec inv_var = (-2.0 * pi.log_std.array()).exp().matrix();
  const Vec var_old = (2.0 * pb.log_std_old.array()).exp().matrix();
  const Mat diff = mu - pb.mu_old;
  const Mat up = (diff.array().colwise() * inv_var.array()) / static_cast<double>(N);
  g.head(pi.mean_net.values.size()) = backward_batch(pi.mean_net, pb.obs, up).params;
  const Vec mean_sq = diff.cwiseAbs2().rowwise().mean();
  g.tail(pi.log_std.size()) = (1.0 - ((var_old + mean_sq).array() * inv_var.array())).matrix();
  return g;
}

FisherOperator::FisherOperator(const GaussianPolicy& pi, const PolicyBatch& pb, double damping)
    : pi_(pi), damping_(damping), inv_var_((-2.0 * pi.log_std.array()).exp().matrix()) {
  if (pb.size() > 0) tape_ = forward_tape(pi.mean_net, pb.obs);
}

Vec FisherOperator::operator()(const Vec& v) const {
  if (v.size() != pi_.flat_size()) throw std::invalid_argument("fisher_vector_product: length mismatch");
  Vec out = damping_ * v;
  if (tape_.empty()) return out;
  const Eigen::Index N = tape_.front().cols();
  const Eigen::Index P = pi_.mean_net.values.size();
  // At pi = old the KL Hessian is the Gauss-Newton form J^T M J with
  // M = diag(1/sigma^2) for the means and 2 for each log-std.
  const Mat jv = jvp_tape(pi_.mean_net, tape_, Vec(v.head(P)));
  const Mat up = (jv.array().colwise() * inv_var_.array()) / static_cast<double>(N);
  out.head(P) += backward_tape(pi_.mean_net, tape_, up).params;
  out.tail(pi_.log_std.size()) += 2.0 * v.tail(pi_.log_std.size());
  return out;
}

Vec fisher_vector_product(const GaussianPolicy& pi, const PolicyBatch& pb, const Vec& v, double damping) {
  return FisherOperator(pi, pb, damping)(v);
}

Vec conjugate_gradient(const std::function<Vec(const Vec&)>& apply_a, const Vec& b, int iterations,
                       double residual_tol) {
  Vec x = Vec::Zero(b.size());
  Vec r = b;
  Vec p = r;
  double rr = r.squaredNorm();
  for (int i = 0; i < iterations && std::sqrt(rr) > residual_tol; ++i) {
    const Vec ap = apply_a(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap)) throw std::domain_error("conjugate_gradient: non-finite curvature");
    if (pap <= 0.0) break;
    const double alpha = rr / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    if (!std::isfinite(rr_next)) throw std::domain_error("conjugate_gradient: non-finite residual");
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

double regularized_objective(const GaussianPolicy& pi, const GaussianPolicy& old_pi, const Batch& batch, double lambda1,
                             double gamma, const PgdConfig& pgd, std::uint64_t seed) {
  const double surr = surrogate_loss(pi, old_pi, batch);
  if (lambda1 == 0.0) return surr;
  const auto est = policy_regularizer(pi, batch.obs, discount_weights(batch.time_index, gamma), pgd, seed);
  return surr + lambda1 * est.value;
}

TrpoResult trpo_update(const GaussianPolicy& pi, const PolicyBatch& pb, const TrpoConfig& cfg,
                       const PolicyRegularizerEstimate* reg) {
  cfg.validate();
  const bool use_reg = reg != nullptr && cfg.lambda1 > 0.0;
  auto objective = [&](const GaussianPolicy& cand) {
    double obj = surrogate_loss(cand, pb);
    if (use_reg) obj += cfg.lambda1 * policy_regularizer_fixed(cand, *reg);
    return obj;
  };

  TrpoResult res{pi, false, 0.0, 0.0, 0.0, 0};
  res.objective_before = objective(pi);
  res.objective_after = res.objective_before;

  Vec g = surrogate_gradient(pi, pb);
  if (use_reg && cfg.reg_in_direction) g += cfg.lambda1 * policy_regularizer_gradient(pi, *reg);
  if (!g.allFinite()) throw std::domain_error("trpo: non-finite gradient");
  if (g.squaredNorm() == 0.0) return res;

  const FisherOperator fvp(pi, pb, cfg.cg_damping);
  const Vec dir = conjugate_gradient(fvp, Vec(-g), cfg.cg_iterations, cfg.cg_residual_tol);
  const double shs = dir.dot(fvp(dir));
  if (!(shs > 0.0) || !std::isfinite(shs)) return res;
  const Vec full_step = std::sqrt(2.0 * cfg.max_kl / shs) * dir;

  const Vec theta0 = pi.flat();
  double frac = 1.0;
  for (int k = 0; k < cfg.backtrack_steps; ++k, frac *= cfg.backtrack_coeff) {
    GaussianPolicy cand = pi;
    cand.set_flat(theta0 + frac * full_step);
    const double kl = mean_kl(cand, pb);
    const double obj = objective(cand);
    if (std::isfinite(obj) && kl <= cfg.max_kl && obj < res.objective_before) {
      res.policy = std::move(cand);
      res.accepted = true;
      res.kl = kl;
      res.objective_after = obj;
      res.backtracks = k;
      return res;
    }
  }
  res.backtracks = cfg.backtrack_steps;
  return res;
}

double value_mse(const FlatParams& value_net, const Mat& obs, const Vec& targets) {
  if (obs.cols() == 0) return 0.0;
  const Vec v = forward_batch(value_net, obs).row(0).transpose();
  return (v - targets).squaredNorm() / static_cast<double>(obs.cols());
}

double fit_value(FlatParams& value_net, const Mat& obs, const Vec& targets, AdamState& adam, const ValueFitConfig& cfg,
                 std::uint64_t seed) {
  const Eigen::Index N = obs.cols();
  if (targets.size() != N) throw std::invalid_argument("fit_value: target count mismatch");
  if (N == 0 || cfg.epochs <= 0) return value_mse(value_net, obs, targets);
  const Eigen::Index mb = cfg.minibatch <= 0 ? N : std::min<Eigen::Index>(cfg.minibatch, N);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  for (int e = 0; e < cfg.epochs; ++e) {
    if (mb < N) std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < N; start += mb) {
      const Eigen::Index len = std::min(mb, N - start);
      Mat X(obs.rows(), len);
      Vec y(len);
      for (Eigen::Index j = 0; j < len; ++j) {
        X.col(j) = obs.col(order[static_cast<std::size_t>(start + j)]);
        y[j] = targets[order[static_cast<std::size_t>(start + j)]];
      }
      const Vec v = forward_batch(value_net, X).row(0).transpose();
      const Mat up = (2.0 / static_cast<double>(len)) * (v - y).transpose();
      adam_step(adam, value_net.values, backward_batch(value_net, X, up).params);
    }
  }
  return value_mse(value_net, obs, targets);
}

}  // namespace spacil
