#include "spacil/smooth.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace spacil {

void PgdConfig::validate() const {
  if (!(eps > 0.0)) throw std::invalid_argument("pgd: eps must be > 0");
  if (!(step > 0.0)) throw std::invalid_argument("pgd: step must be > 0");
  if (steps < 1) throw std::invalid_argument("pgd: steps must be >= 1");
  if (!(init_fraction >= 0.0 && init_fraction <= 1.0)) throw std::invalid_argument("pgd: init_fraction must lie in [0, 1]");
}

namespace {

std::uint64_t hash_column(const Mat& S, Eigen::Index j) {
  std::uint64_t h = 0x51ed270b27e1a4c3ULL;
  for (Eigen::Index i = 0; i < S.rows(); ++i) h = mix64(h ^ std::bit_cast<std::uint64_t>(S(i, j)));
  return h;
}

}  // namespace

Mat initial_deltas(const Mat& states, const PgdConfig& cfg, std::uint64_t seed) {
  Mat d(states.rows(), states.cols());
  const double r0 = cfg.init_fraction * cfg.eps;
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    Rng rng(derive_seed(seed, {hash_column(states, j)}));
    d.col(j) = uniform_in_ball<double>(states.rows(), r0, rng);
  }
  return d;
}

PgdBatchResult pgd_max_batch(const BatchObjective& objective, const Mat& init_deltas, const PgdConfig& cfg) {
  cfg.validate();
  Mat delta = project_ball_columns(init_deltas, cfg.eps);
  auto [values, grads] = objective(delta);
  if (!values.allFinite()) throw std::domain_error("pgd: non-finite objective");
  PgdBatchResult out{delta, values, values};
  for (int it = 0; it < cfg.steps; ++it) {
    for (Eigen::Index j = 0; j < delta.cols(); ++j) {
      if (cfg.normalized_step) {
        const double gn = grads.col(j).norm();
        if (gn > 0.0) delta.col(j) += (cfg.step * cfg.eps / gn) * grads.col(j);
      } else {
        delta.col(j) += cfg.step * grads.col(j);
      }
      delta.col(j) = project_ball(delta.col(j), cfg.eps);
    }
    std::tie(values, grads) = objective(delta);
    if (!values.allFinite()) throw std::domain_error("pgd: non-finite objective");
    for (Eigen::Index j = 0; j < delta.cols(); ++j) {
      if (values[j] > out.values[j]) {
        out.values[j] = values[j];
        out.deltas.col(j) = delta.col(j);
      }
    }
  }
  return out;
}

PgdResult pgd_max(const std::function<double(const Vec&, const Vec&)>& f,
                  const std::function<Vec(const Vec&, const Vec&)>& grad_f, const Vec& s, const PgdConfig& cfg,
                  Rng& rng) {
  cfg.validate();
  const Mat d0 = uniform_in_ball<double>(s.size(), cfg.init_fraction * cfg.eps, rng);
  BatchObjective obj = [&](const Mat& deltas) {
    const Vec sp = s + deltas.col(0);
    return std::pair<Vec, Mat>{Vec::Constant(1, f(s, sp)), Mat(grad_f(s, sp))};
  };
  const auto r = pgd_max_batch(obj, d0, cfg);
  return {s + r.deltas.col(0), r.values[0], r.initial[0]};
}

Mat BallGeometry::apply(const Mat& S, const Mat& deltas) const {
  if (scale.size() == 0) return S + deltas;
  return S + (deltas.array().colwise() * scale.array()).matrix();
}

Mat BallGeometry::pull_back(const Mat& grad_s) const {
  if (scale.size() == 0) return grad_s;
  return (grad_s.array().colwise() * scale.array()).matrix();
}

// --- policy regularizer ----------------------------------------------------

PolicyRegularizerEstimate policy_regularizer(const GaussianPolicy& pi, const Mat& states, const Vec& weights,
                                             const PgdConfig& cfg, std::uint64_t seed, const BallGeometry& geom) {
  if (weights.size() != states.cols()) throw std::invalid_argument("policy_regularizer: weight count mismatch");
  PolicyRegularizerEstimate est;
  est.states = states;
  est.weights = weights;
  if (states.cols() == 0) return est;
  const double inv_var = 1.0 / (pi.reg_sigma * pi.reg_sigma);
  const Mat mu = mean_actions(pi, states);
  BatchObjective obj = [&](const Mat& deltas) {
    const Mat sp = geom.apply(states, deltas);
    const Mat diff = mean_actions(pi, sp) - mu;
    const Vec vals = inv_var * diff.colwise().squaredNorm().transpose();
    // d/ds' ||mu(s') - mu(s)||^2 = 2 J(s')^T (mu(s') - mu(s))
    const Mat g = backward_batch(pi.mean_net, sp, Mat(2.0 * inv_var * diff)).input;
    return std::pair<Vec, Mat>{vals, geom.pull_back(g)};
  };
  const auto r = pgd_max_batch(obj, initial_deltas(states, cfg, seed), cfg);
  est.perturbed = geom.apply(states, r.deltas);
  est.per_state = r.values;
  const double wsum = weights.sum();
  est.value = wsum > 0.0 ? weights.dot(r.values) / wsum : 0.0;
  return est;
}

double policy_regularizer_fixed(const GaussianPolicy& pi, const PolicyRegularizerEstimate& est) {
  if (est.states.cols() == 0) return 0.0;
  const double wsum = est.weights.sum();
  if (!(wsum > 0.0)) return 0.0;
  const Mat diff = mean_actions(pi, est.states) - mean_actions(pi, est.perturbed);
  const Vec per = diff.colwise().squaredNorm().transpose() / (pi.reg_sigma * pi.reg_sigma);
  return est.weights.dot(per) / wsum;
}

Vec policy_regularizer_gradient(const GaussianPolicy& pi, const PolicyRegularizerEstimate& est) {
  Vec g = Vec::Zero(pi.flat_size());
  const double wsum = est.weights.sum();
  if (est.states.cols() == 0 || !(wsum > 0.0)) return g;
  const Mat diff = mean_actions(pi, est.states) - mean_actions(pi, est.perturbed);
  const Eigen::RowVectorXd w = est.weights.transpose() * (2.0 / (pi.reg_sigma * pi.reg_sigma * wsum));
  const Mat up = (diff.array().rowwise() * w.array()).matrix();
  const Vec g_s = backward_batch(pi.mean_net, est.states, up).params;
  const Vec g_p = backward_batch(pi.mean_net, est.perturbed, Mat(-up)).params;
  g.head(pi.mean_net.values.size()) = g_s + g_p;
  return g;
}

Vec discount_weights(const std::vector<int>& time_index, double gamma) {
  Vec w(static_cast<Eigen::Index>(time_index.size()));
  for (std::size_t i = 0; i < time_index.size(); ++i)
    w[static_cast<Eigen::Index>(i)] = time_index[i] == 0 ? 1.0 : std::pow(gamma, time_index[i]);
  return w;
}

// --- smoothness metric -----------------------------------------------------

MetricResult smoothness_metric(const GaussianPolicy& pi, const Mat& states, const PgdConfig& cfg, std::uint64_t seed,
                               const BallGeometry& geom) {
  if (states.cols() == 0) throw std::invalid_argument("smoothness_metric: no states");
  const Mat mu = mean_actions(pi, states);
  BatchObjective obj = [&](const Mat& deltas) {
    const Mat sp = geom.apply(states, deltas);
    const Mat diff = mean_actions(pi, sp) - mu;
    const Eigen::Index K = deltas.cols();
    Vec vals(K);
    Mat up(diff.rows(), K);
    Vec r(K), n(K);
    for (Eigen::Index j = 0; j < K; ++j) {
      r[j] = std::max(deltas.col(j).norm(), kRatioGuard);
      n[j] = diff.col(j).norm();
      vals[j] = n[j] / r[j];
      // d||diff||/ds' = J^T diff / ||diff||, scaled by 1/r
      up.col(j) = n[j] > 0.0 ? Vec(diff.col(j) / (n[j] * r[j])) : Vec::Zero(diff.rows());
    }
    Mat g = geom.pull_back(backward_batch(pi.mean_net, sp, up).input);
    for (Eigen::Index j = 0; j < K; ++j) g.col(j) -= (n[j] / (r[j] * r[j] * r[j])) * deltas.col(j);
    return std::pair<Vec, Mat>{vals, g};
  };
  const auto res = pgd_max_batch(obj, initial_deltas(states, cfg, seed), cfg);
  return {res.values.mean(), res.values};
}

double spectral_norm_power(const Mat& A, int min_iterations) {
  if (A.size() == 0) return 0.0;
  const Mat G = A.transpose() * A;
  Vec v(G.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7) + 0.01 * static_cast<double>(i);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < std::max(min_iterations, 10000); ++it) {
    Vec w = G * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = v.dot(w);
    w /= nw;
    const bool converged = it + 1 >= min_iterations && std::abs(next - lambda) <= 4e-16 * std::abs(next);
    v = std::move(w);
    lambda = next;
    if (converged) break;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double jacobian_spectral_norm(const GaussianPolicy& pi, const Mat& states, int min_iterations) {
  if (states.cols() == 0) return 0.0;
  const int da = pi.action_dim();
  const Eigen::Index K = states.cols();
  // Row i of every per-state Jacobian from one batched reverse pass.
  std::vector<Mat> rows(static_cast<std::size_t>(da));
  for (int i = 0; i < da; ++i) {
    Mat up = Mat::Zero(da, K);
    up.row(i).setOnes();
    rows[static_cast<std::size_t>(i)] = backward_batch(pi.mean_net, states, up).input;
  }
  double total = 0.0;
  Mat J(da, states.rows());
  for (Eigen::Index j = 0; j < K; ++j) {
    for (int i = 0; i < da; ++i) J.row(i) = rows[static_cast<std::size_t>(i)].col(j).transpose();
    total += spectral_norm_power(J, min_iterations);
  }
  return total / static_cast<double>(K);
}

}  // namespace spacil
