#include <doctest.h>

#include <cmath>

#include "fd.hpp"
#include "spacil/adversary.hpp"

using namespace spacil;

namespace {

Mat random_cols(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat M(rows, cols);
  for (int j = 0; j < cols; ++j) M.col(j) = scale * standard_normal<double>(rows, rng);
  return M;
}

Discriminator small_disc(std::uint64_t seed) {
  auto d = Discriminator::make(3, 2, {8, 6}, seed);
  Rng rng(seed + 7);
  d.net.values += 0.3 * standard_normal<double>(d.net.values.size(), rng);
  return d;
}

}  // namespace

TEST_CASE("cost is log-sigmoid of the logit") {
  CHECK(log_sigmoid(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(log_sigmoid(-1000.0) == doctest::Approx(-1000.0));
  CHECK(log_sigmoid(1000.0) < 0.0);
  CHECK(std::isfinite(log_sigmoid(1000.0)));
  CHECK(log_sigmoid(40.0) == doctest::Approx(-std::exp(-40.0)).epsilon(1e-10));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("cost function wires state and action") {
  auto d = small_disc(1);
  Rng rng(2);
  const Mat S = random_cols(3, 4, rng), A = random_cols(2, 4, rng);
  const Vec c = costs(d, S, A);
  for (int j = 0; j < 4; ++j) {
    Vec x(5);
    x << S.col(j), A.col(j);
    CHECK(c[j] == doctest::Approx(log_sigmoid(forward(d.net, x)[0])).epsilon(1e-14));
    CHECK(c[j] < 0.0);
  }
  CHECK(cost(d, S.col(1), A.col(1)) == c[1]);
  CHECK_THROWS_AS(stack_inputs(S, Mat::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("discriminator objective gradient matches finite differences") {
  auto d = small_disc(3);
  Rng rng(4);
  const Mat ai = random_cols(5, 9, rng), ei = random_cols(5, 7, rng);
  const auto f = [&](const Vec& t) { return discriminator_objective(FlatParams{t, d.net.spec}, ai, ei); };
  CHECK(fd::rel_err(discriminator_objective_gradient(d.net, ai, ei), fd::gradient(f, d.net.values)) < 1e-6);
}

TEST_CASE("mixing is a convex combination") {
  Rng rng(5);
  const Mat agent = random_cols(3, 6, rng), expert = random_cols(3, 4, rng);
  Rng r1(8);
  const auto m = mix_states(agent, expert, 50, r1);
  for (int k = 0; k < 50; ++k) {
    CHECK(m.zeta[k] >= 0.0);
    CHECK(m.zeta[k] < 1.0);
    const Vec expect = m.zeta[k] * expert.col(m.expert_index[static_cast<std::size_t>(k)]) +
                       (1 - m.zeta[k]) * agent.col(m.agent_index[static_cast<std::size_t>(k)]);
    CHECK((m.states.col(k) - expect).norm() < 1e-14);
  }
  Rng r2(8);
  const auto zero = mix_states(agent, expert, 10, r2, 0.0);
  for (int k = 0; k < 10; ++k) CHECK(zero.states.col(k) == agent.col(zero.agent_index[static_cast<std::size_t>(k)]));
  Rng r3(8);
  const auto one = mix_states(agent, expert, 10, r3, 1.0);
  CHECK(one.zeta.maxCoeff() < 1.0);
  for (int k = 0; k < 10; ++k)
    CHECK((one.states.col(k) - expert.col(one.expert_index[static_cast<std::size_t>(k)])).norm() < 1e-12);
  CHECK_THROWS_AS(mix_states(Mat(3, 0), expert, 1, r3), std::invalid_argument);
}

TEST_CASE("cost regularizer gradient matches finite differences") {
  auto d = small_disc(9);
  const auto pi = GaussianPolicy::make(MlpSpec::make(3, {6}, 2, 1.0), 10);
  Rng rng(11);
  const Mat S = random_cols(3, 12, rng);
  PgdConfig cfg;
  cfg.eps = 0.3;
  cfg.step = 0.1;
  for (bool perturb_state : {false, true}) {
    const auto est = cost_regularizer(d, pi, S, cfg, 12, perturb_state);
    CHECK(est.value == doctest::Approx(cost_regularizer_fixed(d.net, est)).epsilon(1e-12));
    CHECK(est.value >= 0.0);
    const auto f = [&](const Vec& t) { return cost_regularizer_fixed(FlatParams{t, d.net.spec}, est); };
    CHECK(fd::rel_err(cost_regularizer_gradient(d.net, est), fd::gradient(f, d.net.values)) < 1e-6);
    for (int j = 0; j < S.cols(); ++j) CHECK((est.perturbed.col(j) - S.col(j)).norm() <= cfg.eps + 1e-12);
  }
}

TEST_CASE("ascent on the inner cost change beats the random start") {
  auto d = small_disc(13);
  const auto pi = GaussianPolicy::make(MlpSpec::make(3, {6}, 2, 1.0), 14);
  Rng rng(15);
  const Mat S = random_cols(3, 20, rng);
  PgdConfig cfg;
  cfg.eps = 0.2;
  cfg.step = 0.5;
  cfg.steps = 30;
  const auto est = cost_regularizer(d, pi, S, cfg, 1);
  PgdConfig none = cfg;
  none.steps = 1;
  none.step = 1e-12;
  CHECK(est.value > cost_regularizer(d, pi, S, none, 1).value);
}

TEST_CASE("discriminator update separates agent from expert") {
  auto d = Discriminator::make(2, 1, {16}, 3, 0.01);
  Rng rng(4);
  const Mat as = random_cols(2, 100, rng, 0.3).array() + 1.0, aa = random_cols(1, 100, rng);
  const Mat es = random_cols(2, 100, rng, 0.3).array() - 1.0, ea = random_cols(1, 100, rng);
  DiscriminatorUpdate first, last;
  for (int i = 0; i < 200; ++i) {
    last = update_discriminator(d, as, aa, es, ea, 0.0);
    if (i == 0) first = last;
  }
  CHECK(last.objective > first.objective);
  CHECK(last.accuracy > 0.95);
  // Learned cost is lower on expert data: the agent is pushed towards it.
  CHECK(costs(d, es, ea).mean() < costs(d, as, aa).mean());
}

TEST_CASE("regularized discriminator update reports the penalty") {
  auto d = small_disc(20);
  const auto pi = GaussianPolicy::make(MlpSpec::make(3, {6}, 2), 21);
  Rng rng(22);
  const Mat as = random_cols(3, 30, rng), aa = random_cols(2, 30, rng);
  const Mat es = random_cols(3, 30, rng), ea = random_cols(2, 30, rng);
  PgdConfig cfg;
  const auto est = cost_regularizer(d, pi, as, cfg, 5);
  const auto u = update_discriminator(d, as, aa, es, ea, 0.5, &est);
  CHECK(u.regularizer == doctest::Approx(est.value));
  CHECK(u.loss == doctest::Approx(-(u.objective - 0.5 * u.regularizer)));
}
