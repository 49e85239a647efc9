#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spacil/net.hpp"
#include "spacil/policy.hpp"
#include "spacil/smooth.hpp"

namespace spacil {

/// Logistic discriminator over (s, a); the learned cost is log S(x) for logit x.
struct Discriminator {
  FlatParams net;  // (D_s + D_a) -> ... -> 1
  AdamState adam;

  static Discriminator make(int state_dim, int action_dim, const std::vector<int>& hidden, std::uint64_t seed,
                            double lr = 0.01);
  int state_dim() const { return state_dim_; }
  int action_dim() const { return net.spec.input_size() - state_dim_; }
  void set_state_dim(int d) { state_dim_ = d; }

 private:
  int state_dim_ = 0;
};

double sigmoid(double x);
/// log(1 / (1 + e^-x)), stable for large |x|; always < 0.
double log_sigmoid(double x);

Mat stack_inputs(const Mat& states, const Mat& actions);
Vec logits(const Discriminator& d, const Mat& states, const Mat& actions);
double cost(const Discriminator& d, const Vec& s, const Vec& a);
Vec costs(const Discriminator& d, const Mat& states, const Mat& actions);

struct MixedBatch {
  Mat states;               // zeta * s_E + (1 - zeta) * s_agent
  Vec zeta;                 // in [0, 1)
  std::vector<int> expert_index;
  std::vector<int> agent_index;
};

/// K interpolated states between uniformly drawn expert and agent states.
/// `forced_zeta` pins every mixing coefficient (test hook).
MixedBatch mix_states(const Mat& agent_states, const Mat& expert_states, int samples, Rng& rng,
                      std::optional<double> forced_zeta = std::nullopt);

struct CostRegularizerEstimate {
  Mat states;
  Mat perturbed;
  Mat actions_clean;      // mu(s^)
  Mat actions_perturbed;  // mu(s~)
  Vec per_state;
  double value = 0.0;
  bool perturb_state = false;
};

/// Mean over mixed states of max_{s~ in ball} |c(s^, mu(s^)) - c(s^, mu(s~))|.
/// With perturb_state the second cost also takes s~ as its state argument.
CostRegularizerEstimate cost_regularizer(const Discriminator& d, const GaussianPolicy& pi, const Mat& mixed_states,
                                         const PgdConfig& cfg, std::uint64_t seed, bool perturb_state = false,
                                         const BallGeometry& geom = {});
/// Regularizer at discriminator parameters `net`, maximizers held fixed.
double cost_regularizer_fixed(const FlatParams& net, const CostRegularizerEstimate& est);
Vec cost_regularizer_gradient(const FlatParams& net, const CostRegularizerEstimate& est);

/// E_agent[log D] + E_expert[log(1 - D)], D = S(x): the quantity the
/// discriminator ascends.
double discriminator_objective(const FlatParams& net, const Mat& agent_in, const Mat& expert_in);
Vec discriminator_objective_gradient(const FlatParams& net, const Mat& agent_in, const Mat& expert_in);

struct DiscriminatorUpdate {
  double objective = 0.0;  // GAIL term before the step
  double regularizer = 0.0;
  double loss = 0.0;       // -(objective - lambda2 * regularizer)
  double accuracy = 0.0;   // agent classified D > 0.5, expert D < 0.5
};

/// One Adam ascent step on objective - lambda2 * regularizer.
DiscriminatorUpdate update_discriminator(Discriminator& d, const Mat& agent_states, const Mat& agent_actions,
                                         const Mat& expert_states, const Mat& expert_actions, double lambda2,
                                         const CostRegularizerEstimate* reg = nullptr);

}  // namespace spacil
