// Small hand-computed cases, one per documented example.

#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "spacil/adversary.hpp"
#include "spacil/envs.hpp"
#include "spacil/rollout.hpp"
#include "spacil/smooth.hpp"
#include "spacil/trpo.hpp"

using namespace spacil;

namespace {

FlatParams linear_net(const Mat& W, const Vec& b) {
  FlatParams p;
  p.spec = MlpSpec{{static_cast<int>(W.cols()), static_cast<int>(W.rows())}};
  p.values.resize(p.spec.param_count());
  p.weight(0) = W;
  p.bias(0) = b;
  return p;
}

GaussianPolicy linear_policy(const Mat& W) {
  GaussianPolicy pi;
  pi.mean_net = linear_net(W, Vec::Zero(W.rows()));
  pi.log_std = Vec::Zero(W.rows());
  return pi;
}

}  // namespace

TEST_CASE("linear layer forward and input gradient") {
  Mat W(2, 2);
  W << 2, 0, 0, 3;
  const auto p = linear_net(W, Vec::Zero(2));
  const Vec y = forward(p, Vec(Vec::Ones(2)));
  CHECK(y[0] == 2.0);
  CHECK(y[1] == 3.0);
  Mat W2(2, 3);
  W2 << 1, 2, 3, 4, 5, 6;
  const auto q = linear_net(W2, Vec::Zero(2));
  const auto g = backward(q, Vec(Vec::Ones(3)), Vec(Vec::Unit(2, 0)));
  CHECK(g.input == W2.row(0).transpose());
}

TEST_CASE("adam first step size") {
  for (double gv : {0.5, 1e-9, -3.0}) {
    auto st = AdamState::fresh(1, 0.01);
    Vec theta = Vec::Zero(1);
    adam_step(st, theta, Vec(Vec::Constant(1, gv)));
    CHECK(std::abs(theta[0]) == doctest::Approx(0.01 * std::abs(gv) / (std::abs(gv) + st.eps)).epsilon(1e-9));
  }
}

TEST_CASE("normalizer on two samples") {
  Normalizer n(2);
  n.observe(Vec::Zero(2));
  n.observe(Vec::Constant(2, 2.0));
  CHECK(n.mean() == Vec::Ones(2));
  CHECK(n.variance() == Vec::Ones(2));
}

TEST_CASE("linear policy mean and densities") {
  Mat W(2, 2);
  W << 1, 0, 0, -1;
  const auto pi = linear_policy(W);
  Vec s(2);
  s << 2, 3;
  CHECK(mean_action(pi, s) == Vec((Vec(2) << 2, -3).finished()));
  const double l2pi = std::log(2 * std::numbers::pi);
  CHECK(log_prob(pi, s, mean_action(pi, s)) == doctest::Approx(-l2pi).epsilon(1e-14));
  const auto one = linear_policy(Mat::Ones(1, 1));
  CHECK(log_prob(one, Vec::Zero(1), Vec::Ones(1)) == doctest::Approx(-0.5 - 0.5 * l2pi).epsilon(1e-14));
  CHECK(kl_batch(Mat::Zero(1, 1), Vec::Zero(1), Mat::Ones(1, 1), Vec::Zero(1))[0] == doctest::Approx(0.5));
}

TEST_CASE("jeffreys reduced form examples") {
  auto pi = linear_policy(Mat::Identity(2, 2));
  const Vec s1 = Vec::Unit(2, 0), s2 = Vec::Zero(2);
  CHECK(jeffreys(pi, s1, s2) == doctest::Approx(1.0));
  pi.reg_sigma = 2.0;
  CHECK(jeffreys(pi, s1, s2) == doctest::Approx(0.25));
}

TEST_CASE("return and advantage hand sums") {
  CHECK(discounted_return(Vec(Vec::Ones(3)), 0.5) == doctest::Approx(-1.75));
  Batch b;
  Trajectory tr;
  tr.states = tr.obs = Mat::Zero(1, 2);
  tr.actions = Mat::Zero(1, 2);
  tr.costs = Vec::Constant(2, -1.0);  // reward 1 per step
  tr.true_costs = tr.costs;
  tr.final_state = tr.final_obs = Vec::Zero(1);
  tr.terminal = true;
  b.trajectories.push_back(tr);
  b.assemble();
  auto v = init_params<double>(MlpSpec::make(1, {4}, 1), 1);
  v.values.setZero();
  gae(b, v, 0.5, 1.0, false);
  CHECK(b.advantages[0] == doctest::Approx(1.5));
  CHECK(b.advantages[1] == doctest::Approx(1.0));
}

TEST_CASE("surrogate on one sample with ratio two") {
  const auto pi = linear_policy(Mat::Ones(1, 1));
  auto pb = make_policy_batch(pi, Mat::Ones(1, 1), Mat::Ones(1, 1), Vec::Ones(1));
  pb.logp_old[0] -= std::log(2.0);
  CHECK(surrogate_loss(pi, pb) == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("conjugate gradient on a 2x2 system") {
  Mat A(2, 2);
  A << 4, 1, 1, 3;
  Vec b(2);
  b << 1, 2;
  const Vec x = conjugate_gradient([&](const Vec& p) { return Vec(A * p); }, b, 10);
  CHECK(x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-9));
  CHECK(x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-9));
}

TEST_CASE("value fit to zero targets") {
  auto net = init_params<double>(MlpSpec::make(2, {8}, 1), 3);
  Rng rng(4);
  Mat X(2, 16);
  for (int j = 0; j < 16; ++j) X.col(j) = standard_normal<double>(2, rng);
  auto adam = AdamState::fresh(net.values.size(), 1e-2);
  ValueFitConfig cfg;
  cfg.epochs = 300;
  cfg.minibatch = 16;
  CHECK(fit_value(net, X, Vec::Zero(16), adam, cfg, 5) <= 1e-3);
}

TEST_CASE("log-sigmoid at zero and far left") {
  CHECK(log_sigmoid(0.0) == doctest::Approx(-0.6931).epsilon(1e-4));
  CHECK(log_sigmoid(-50.0) == doctest::Approx(-50.0).epsilon(1e-12));
}

TEST_CASE("midpoint mixing") {
  Rng rng(1);
  const auto m = mix_states(Mat::Zero(2, 1), Mat::Ones(2, 1), 1, rng, 0.5);
  CHECK(m.states.col(0) == Vec::Constant(2, 0.5));
}

TEST_CASE("pgd on a diagonal quadratic") {
  Mat W(2, 2);
  W << 2, 0, 0, 1;
  PgdConfig cfg;
  cfg.eps = 0.1;
  cfg.step = 0.25;
  cfg.steps = 50;
  cfg.normalized_step = true;
  Rng rng(6);
  const auto r = pgd_max([&](const Vec& s, const Vec& sp) { return (W * (sp - s)).squaredNorm(); },
                         [&](const Vec& s, const Vec& sp) { return Vec(2.0 * W.transpose() * W * (sp - s)); },
                         Vec::Zero(2), cfg, rng);
  CHECK(r.value == doctest::Approx(0.04).epsilon(0.05));
}

TEST_CASE("metric and spectral norm agree at small radius") {
  Rng rng(7);
  PgdConfig cfg;
  cfg.eps = 1e-4;
  cfg.step = 0.25;
  cfg.steps = 20;
  cfg.normalized_step = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto pi = GaussianPolicy::make(MlpSpec::make(3, {8}, 2, 1.0), seed);
    Mat S(3, 10);
    for (int j = 0; j < 10; ++j) S.col(j) = standard_normal<double>(3, rng);
    const double j = smoothness_metric(pi, S, cfg, seed).mean;
    CHECK(j == doctest::Approx(jacobian_spectral_norm(pi, S)).epsilon(0.1));
  }
}

TEST_CASE("cost regularizer against grid search") {
  // linear discriminator, linear policy, action-only perturbation; the bias
  // keeps log S(x) ~ x - e^x in its linear range, so the cost is linear in a
  Mat w(1, 3);
  w << 0.7, -0.4, 1.3;
  Discriminator d;
  d.net = linear_net(w, Vec::Constant(1, -20.0));
  Mat W(1, 2);
  W << 1.5, -0.8;
  const auto pi = linear_policy(W);
  Mat S(2, 3);
  S << 0.1, -0.5, 0.9, 0.3, 0.2, -1.0;
  PgdConfig cfg;
  cfg.eps = 0.2;
  cfg.step = 0.05;
  cfg.steps = 50;
  const auto est = cost_regularizer(d, pi, S, cfg, 3);
  for (int j = 0; j < S.cols(); ++j) {
    const Vec s = S.col(j);
    const double c0 = cost(d, s, mean_action(pi, s));
    double best = 0.0;
    const int n = 201;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        Vec dl(2);
        dl << cfg.eps * (2.0 * a / (n - 1) - 1.0), cfg.eps * (2.0 * b / (n - 1) - 1.0);
        if (dl.norm() > cfg.eps) continue;
        best = std::max(best, std::abs(cost(d, s, mean_action(pi, Vec(s + dl))) - c0));
      }
    CHECK(est.per_state[j] == doctest::Approx(best).epsilon(0.02));
  }
}
