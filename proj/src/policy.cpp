#include "spacil/policy.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace spacil {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

GaussianPolicy GaussianPolicy::make(const MlpSpec& spec, std::uint64_t seed, double init_log_std) {
  GaussianPolicy pi;
  pi.mean_net = init_params(spec, seed);
  pi.log_std = Vec::Constant(spec.output_size(), init_log_std);
  return pi;
}

Vec GaussianPolicy::flat() const {
  Vec theta(flat_size());
  theta << mean_net.values, log_std;
  return theta;
}

void GaussianPolicy::set_flat(const Vec& theta) {
  if (theta.size() != flat_size()) throw std::invalid_argument("policy: flat size mismatch");
  mean_net.values = theta.head(mean_net.values.size());
  log_std = theta.tail(log_std.size());
}

Vec mean_action(const GaussianPolicy& pi, const Vec& s) { return forward(pi.mean_net, s); }

Mat mean_actions(const GaussianPolicy& pi, const Mat& S) { return forward_batch(pi.mean_net, S); }

Vec sample_action(const GaussianPolicy& pi, const Vec& s, Rng& rng) {
  const Vec z = standard_normal(pi.action_dim(), rng);
  return mean_action(pi, s) + pi.log_std.array().exp().matrix().cwiseProduct(z);
}

Vec log_prob_batch(const Mat& mu, const Vec& log_std, const Mat& A) {
  const Vec inv_var = (-2.0 * log_std.array()).exp().matrix();
  const Mat d = A - mu;
  const double norm_const = -log_std.sum() - 0.5 * static_cast<double>(log_std.size()) * kLog2Pi;
  Vec lp(A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) lp[j] = norm_const - 0.5 * d.col(j).cwiseAbs2().dot(inv_var);
  return lp;
}

double log_prob(const GaussianPolicy& pi, const Vec& s, const Vec& a) {
  if (a.size() != pi.action_dim()) throw std::invalid_argument("log_prob: action size mismatch");
  return log_prob_batch(Mat(mean_action(pi, s)), pi.log_std, Mat(a))[0];
}

Vec kl_batch(const Mat& mu_old, const Vec& log_std_old, const Mat& mu_new, const Vec& log_std_new) {
  const Vec var_old = (2.0 * log_std_old.array()).exp().matrix();
  const Vec inv_var_new = (-2.0 * log_std_new.array()).exp().matrix();
  const double log_term = (log_std_new - log_std_old).sum();
  const double var_term = 0.5 * var_old.dot(inv_var_new);
  const double dims = static_cast<double>(log_std_old.size());
  Vec out(mu_old.cols());
  for (Eigen::Index j = 0; j < mu_old.cols(); ++j) {
    const double mean_term = 0.5 * (mu_old.col(j) - mu_new.col(j)).cwiseAbs2().dot(inv_var_new);
    out[j] = log_term + var_term + mean_term - 0.5 * dims;
  }
  return out;
}

double kl(const GaussianPolicy& old_pi, const GaussianPolicy& new_pi, const Vec& s) {
  if (&old_pi == &new_pi) return 0.0;
  return kl_batch(Mat(mean_action(old_pi, s)), old_pi.log_std, Mat(mean_action(new_pi, s)), new_pi.log_std)[0];
}

double jeffreys(const GaussianPolicy& pi, const Vec& s1, const Vec& s2) {
  const Vec d = mean_action(pi, s1) - mean_action(pi, s2);
  return d.squaredNorm() / (pi.reg_sigma * pi.reg_sigma);
}

void write_policy(std::ostream& os, const GaussianPolicy& pi, const Normalizer* norm) {
  write_net_block(os, pi.mean_net);
  bin::write_u32(os, static_cast<std::uint32_t>(pi.log_std.size()));
  bin::write_f64s(os, pi.log_std);
  bin::write_u32(os, norm ? 1U : 0U);
  if (norm) norm->write(os);
}

GaussianPolicy read_policy(std::istream& is, Normalizer* norm_out) {
  GaussianPolicy pi;
  pi.mean_net = read_net_block(is);
  const auto da = bin::read_u32(is, "log_std size");
  if (static_cast<int>(da) != pi.mean_net.spec.output_size()) throw FormatError("log_std size does not match network output");
  pi.log_std = bin::read_f64s(is, da, "log_std");
  const auto has_norm = bin::read_u32(is, "normalizer flag");
  if (has_norm > 1) throw FormatError("bad normalizer flag");
  if (has_norm == 1) {
    Normalizer n = Normalizer::read(is);
    if (n.dim() != pi.state_dim()) throw FormatError("normalizer dimension does not match network input");
    if (norm_out) *norm_out = std::move(n);
  } else if (norm_out) {
    *norm_out = Normalizer(pi.state_dim());
  }
  return pi;
}

void save_policy(const std::string& path, const GaussianPolicy& pi, const Normalizer* norm) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_policy(os, pi, norm);
  if (!os) throw std::runtime_error("write failed: " + path);
}

GaussianPolicy load_policy(const std::string& path, Normalizer* norm_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_policy(is, norm_out);
}

}  // namespace spacil
