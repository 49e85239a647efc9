#pragma once

#include <cstdint>
#include <functional>

#include "spacil/net.hpp"
#include "spacil/policy.hpp"
#include "spacil/rollout.hpp"
#include "spacil/smooth.hpp"

namespace spacil {

struct TrpoConfig {
  double max_kl = 0.01;
  double cg_damping = 0.01;
  int cg_iterations = 10;
  double cg_residual_tol = 1e-10;
  double backtrack_coeff = 0.8;
  int backtrack_steps = 10;
  double lambda1 = 0.0;
  /// Add the regularizer gradient to the step direction (it always enters
  /// the line-search objective when lambda1 > 0).
  bool reg_in_direction = true;

  void validate() const;
};

/// Sampled data frozen at the pre-update policy.
struct PolicyBatch {
  Mat obs;
  Mat actions;
  Vec advantages;
  Mat mu_old;
  Vec log_std_old;
  Vec logp_old;

  Eigen::Index size() const { return obs.cols(); }
};

PolicyBatch make_policy_batch(const GaussianPolicy& old_pi, const Batch& batch);
PolicyBatch make_policy_batch(const GaussianPolicy& old_pi, const Mat& obs, const Mat& actions, const Vec& advantages);

/// -mean_j exp(logp(a_j|s_j) - logp_old) * A_j
double surrogate_loss(const GaussianPolicy& pi, const PolicyBatch& pb);
double surrogate_loss(const GaussianPolicy& pi, const GaussianPolicy& old_pi, const Batch& batch);
Vec surrogate_gradient(const GaussianPolicy& pi, const PolicyBatch& pb);

/// Mean over the batch states of KL(old || pi).
double mean_kl(const GaussianPolicy& pi, const PolicyBatch& pb);
Vec mean_kl_gradient(const GaussianPolicy& pi, const PolicyBatch& pb);

/// (H + damping I) v, H the Hessian of mean_kl at pi = old policy.
/// Records the forward tape once; apply it many times.
class FisherOperator {
 public:
  FisherOperator(const GaussianPolicy& pi, const PolicyBatch& pb, double damping);
  Vec operator()(const Vec& v) const;

 private:
  const GaussianPolicy& pi_;
  double damping_;
  Vec inv_var_;
  Tape tape_;
};

Vec fisher_vector_product(const GaussianPolicy& pi, const PolicyBatch& pb, const Vec& v, double damping);

/// Solves A x = b for symmetric positive-definite A given as an operator.
Vec conjugate_gradient(const std::function<Vec(const Vec&)>& apply_a, const Vec& b, int iterations,
                       double residual_tol = 1e-10);

/// surrogate + lambda1 * (discount-weighted policy regularizer), with the
/// inner maximization run at `pi`.
double regularized_objective(const GaussianPolicy& pi, const GaussianPolicy& old_pi, const Batch& batch, double lambda1,
                             double gamma, const PgdConfig& pgd, std::uint64_t seed);

struct TrpoResult {
  GaussianPolicy policy;
  bool accepted = false;
  double kl = 0.0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  int backtracks = 0;
};

/// One trust-region step. `reg` (inner maximizers at the old policy) is
/// used when cfg.lambda1 > 0. Returns the old policy when no candidate
/// satisfies KL <= max_kl with a strict objective improvement.
TrpoResult trpo_update(const GaussianPolicy& pi, const PolicyBatch& pb, const TrpoConfig& cfg,
                       const PolicyRegularizerEstimate* reg = nullptr);

struct ValueFitConfig {
  int epochs = 5;
  int minibatch = 64;
};

/// MSE regression of V(obs) onto targets with Adam. Returns the final full-batch MSE.
double fit_value(FlatParams& value_net, const Mat& obs, const Vec& targets, AdamState& adam, const ValueFitConfig& cfg,
                 std::uint64_t seed);
double value_mse(const FlatParams& value_net, const Mat& obs, const Vec& targets);

}  // namespace spacil
