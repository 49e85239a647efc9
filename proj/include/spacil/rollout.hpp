#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spacil/envs.hpp"
#include "spacil/net.hpp"
#include "spacil/policy.hpp"

namespace spacil {

/// One episode; column t of each matrix is step t.
struct Trajectory {
  Mat states;      // raw environment states, D_s x T
  Mat obs;         // normalized states seen by the policy, D_s x T
  Mat actions;     // D_a x T (as sampled, before clipping)
  Vec costs;       // learning signal (true or learned cost)
  Vec true_costs;  // environment cost; reporting only
  Vec final_state;
  Vec final_obs;
  bool terminal = false;

  Eigen::Index length() const { return states.cols(); }
};

struct Batch {
  std::vector<Trajectory> trajectories;
  Mat obs;      // all steps, trajectory-major
  Mat actions;
  Vec advantages;
  Vec value_targets;
  std::vector<int> time_index;  // step index within its trajectory

  Eigen::Index steps() const { return obs.cols(); }
  /// Rebuilds obs/actions/time_index from the trajectory list.
  void assemble();
};

struct SampleOptions {
  bool stochastic = true;
  /// Expert/RL training reads the true cost; imitation leaves costs at zero
  /// for relabelling by the learned cost.
  bool use_true_cost = true;
  int workers = 1;
};

/// n complete episodes. Episode i is seeded by derive_seed(seed, {iteration, i})
/// and results are placed by index, so the batch is independent of `workers`.
Batch sample_trajectories(const Env& env, const GaussianPolicy& pi, const Normalizer& norm, int n, std::uint64_t seed,
                          std::uint64_t iteration, const SampleOptions& opts = {});

/// sum_t gamma^t * (-cost_t); gamma in [0, 1] (1 gives the undiscounted score).
double discounted_return(const Vec& costs, double gamma);
double discounted_return(const Trajectory& traj, double gamma);
double true_return(const Trajectory& traj, double gamma = 1.0);

/// Fills batch.advantages and batch.value_targets with reward r_t = -cost_t.
void gae(Batch& batch, const FlatParams& value_net, double gamma, double tau, bool normalize = true);
/// Advantage normalization to zero mean / unit variance (no-op on constant input).
void normalize_advantages(Vec& adv);

struct DemoSet {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<Trajectory> trajectories;  // states and actions only
  Normalizer normalizer;
  std::uint64_t seed = 0;

  Eigen::Index total_steps() const;
  Mat all_states() const;
  Mat all_actions() const;
};

void write_demos(const DemoSet& set, const std::string& path);
DemoSet read_demos(const std::string& path);
void write_demos(const DemoSet& set, std::ostream& os);
DemoSet read_demos(std::istream& is);

}  // namespace spacil
