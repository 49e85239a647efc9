#pragma once

// epsilon-ball maximization by projected gradient ascent, the policy
// smoothness regularizer, and the local-Lipschitz smoothness metric.

#include <cstdint>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "spacil/net.hpp"
#include "spacil/policy.hpp"
#include "spacil/random.hpp"

namespace spacil {

struct PgdConfig {
  double eps = 0.01;
  double step = 0.02;
  int steps = 10;
  /// delta_0 is drawn uniformly from the ball of radius init_fraction * eps.
  double init_fraction = 0.1;
  /// Use steps of length step * eps along the normalized gradient instead of
  /// step * gradient.
  bool normalized_step = false;

  void validate() const;
};

/// delta * min(1, eps / ||delta||).
template <typename Derived>
VecT<typename Derived::Scalar> project_ball(const Eigen::MatrixBase<Derived>& delta, typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = delta.norm();
  if (n <= eps) return delta;
  return delta * (eps / n);
}

/// Column-wise projection.
template <typename Derived>
MatT<typename Derived::Scalar> project_ball_columns(const Eigen::MatrixBase<Derived>& deltas, typename Derived::Scalar eps) {
  MatT<typename Derived::Scalar> out(deltas.rows(), deltas.cols());
  for (Eigen::Index j = 0; j < deltas.cols(); ++j) out.col(j) = project_ball(deltas.col(j), eps);
  return out;
}

/// Values and gradients (w.r.t. delta) of K independent objectives at the
/// columns of a D x K perturbation matrix.
using BatchObjective = std::function<std::pair<Vec, Mat>(const Mat& deltas)>;

struct PgdBatchResult {
  Mat deltas;   // best iterate per column, all inside the ball
  Vec values;   // objective at the best iterate
  Vec initial;  // objective at delta_0
};

/// Runs projected gradient ascent on every column independently; returns
/// the best iterate seen. `init_deltas` holds delta_0 (already in the ball).
PgdBatchResult pgd_max_batch(const BatchObjective& objective, const Mat& init_deltas, const PgdConfig& cfg);

/// delta_0 for each column of `states`, seeded from (seed, state contents),
/// so results do not depend on column order.
Mat initial_deltas(const Mat& states, const PgdConfig& cfg, std::uint64_t seed);

struct PgdResult {
  Vec perturbed;  // s + delta
  double value = 0.0;
  double initial_value = 0.0;
};

/// Maximizes f(s, s') over ||s' - s|| <= eps. grad_f returns the gradient
/// with respect to s'.
PgdResult pgd_max(const std::function<double(const Vec& s, const Vec& s_prime)>& f,
                  const std::function<Vec(const Vec& s, const Vec& s_prime)>& grad_f, const Vec& s,
                  const PgdConfig& cfg, Rng& rng);

/// Ball coordinates to network-input coordinates: s' = s + scale .* delta.
/// An empty scale is the identity.
struct BallGeometry {
  Vec scale;
  Mat apply(const Mat& S, const Mat& deltas) const;
  Mat pull_back(const Mat& grad_s) const;  // gradient w.r.t. delta
};

/// Points found by the inner maximization; held fixed when differentiating
/// with respect to the outer parameters.
struct PolicyRegularizerEstimate {
  Mat states;
  Mat perturbed;
  Vec weights;
  Vec per_state;
  double value = 0.0;
};

/// Weighted mean over states of max_{s~ in ball} ||mu(s) - mu(s~)||^2 / sigma^2.
PolicyRegularizerEstimate policy_regularizer(const GaussianPolicy& pi, const Mat& states, const Vec& weights,
                                             const PgdConfig& cfg, std::uint64_t seed, const BallGeometry& geom = {});

/// Regularizer value at `pi` with the perturbed points of `est` held fixed.
double policy_regularizer_fixed(const GaussianPolicy& pi, const PolicyRegularizerEstimate& est);
/// Gradient of policy_regularizer_fixed w.r.t. the flat policy parameters.
Vec policy_regularizer_gradient(const GaussianPolicy& pi, const PolicyRegularizerEstimate& est);

/// gamma^t for each step of a batch given its per-step time indices.
Vec discount_weights(const std::vector<int>& time_index, double gamma);

struct MetricResult {
  double mean = 0.0;
  Vec per_state;
};

inline constexpr double kRatioGuard = 1e-9;

/// Mean over states of max_{s~} ||mu(s) - mu(s~)|| / ||s - s~||, the ratio
/// itself being the ascent target.
MetricResult smoothness_metric(const GaussianPolicy& pi, const Mat& states, const PgdConfig& cfg, std::uint64_t seed,
                               const BallGeometry& geom = {});

/// Mean over states of the largest singular value of the mean-function
/// Jacobian, by power iteration on J^T J.
double jacobian_spectral_norm(const GaussianPolicy& pi, const Mat& states, int min_iterations = 30);
/// Largest singular value of one matrix by power iteration on A^T A.
double spectral_norm_power(const Mat& A, int min_iterations = 30);

}  // namespace spacil
