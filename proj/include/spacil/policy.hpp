#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "spacil/envs.hpp"
#include "spacil/net.hpp"
#include "spacil/random.hpp"

namespace spacil {

/// Diagonal Gaussian policy N(mu(s), exp(log_std)^2). `reg_sigma` is the
/// fixed scale used by the smoothness regularizer and metric.
struct GaussianPolicy {
  FlatParams mean_net;
  Vec log_std;
  double reg_sigma = 1.0;

  static GaussianPolicy make(const MlpSpec& spec, std::uint64_t seed, double init_log_std = 0.0);

  int state_dim() const { return mean_net.spec.input_size(); }
  int action_dim() const { return mean_net.spec.output_size(); }

  /// [mean_net params, log_std]
  Vec flat() const;
  void set_flat(const Vec& theta);
  Eigen::Index flat_size() const { return mean_net.values.size() + log_std.size(); }
};

Vec mean_action(const GaussianPolicy& pi, const Vec& s);
Mat mean_actions(const GaussianPolicy& pi, const Mat& S);
Vec sample_action(const GaussianPolicy& pi, const Vec& s, Rng& rng);

double log_prob(const GaussianPolicy& pi, const Vec& s, const Vec& a);
/// Log densities of columns of A under the means `mu` (precomputed).
Vec log_prob_batch(const Mat& mu, const Vec& log_std, const Mat& A);

/// KL(old(.|s) || updated(.|s)), summed over action dimensions.
double kl(const GaussianPolicy& old_pi, const GaussianPolicy& new_pi, const Vec& s);
/// Per-column KL given precomputed means.
Vec kl_batch(const Mat& mu_old, const Vec& log_std_old, const Mat& mu_new, const Vec& log_std_new);

/// Equal-variance Jeffrey's divergence in reduced form ||mu(s1)-mu(s2)||^2 / sigma^2.
double jeffreys(const GaussianPolicy& pi, const Vec& s1, const Vec& s2);

// Policy checkpoint: SPCLNET1 block | u32 D_a | f64 log_std[D_a] | u32 has_norm | normalizer block
void write_policy(std::ostream& os, const GaussianPolicy& pi, const Normalizer* norm);
GaussianPolicy read_policy(std::istream& is, Normalizer* norm_out);
void save_policy(const std::string& path, const GaussianPolicy& pi, const Normalizer* norm);
GaussianPolicy load_policy(const std::string& path, Normalizer* norm_out);

}  // namespace spacil
