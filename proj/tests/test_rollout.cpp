#include <doctest.h>

#include <cmath>
#include <sstream>

#include "spacil/rollout.hpp"

using namespace spacil;

namespace {

GaussianPolicy pendulum_policy(std::uint64_t seed) { return GaussianPolicy::make(MlpSpec::make(3, {16}, 1), seed, -0.5); }

}  // namespace

TEST_CASE("sampling is independent of worker count") {
  const auto env = make_env("pendulum", {{"horizon", 40}});
  const auto pi = pendulum_policy(1);
  Normalizer norm(3);
  SampleOptions one, four;
  four.workers = 4;
  const Batch a = sample_trajectories(*env, pi, norm, 7, 123, 5, one);
  const Batch b = sample_trajectories(*env, pi, norm, 7, 123, 5, four);
  CHECK(a.obs == b.obs);
  CHECK(a.actions == b.actions);
  CHECK(a.time_index == b.time_index);
  const Batch c = sample_trajectories(*env, pi, norm, 7, 123, 6, one);
  CHECK(c.obs != a.obs);
}

TEST_CASE("trajectory shape and horizon") {
  const auto env = make_env("point-reacher");
  const auto pi = GaussianPolicy::make(MlpSpec::make(4, {8}, 2), 2);
  Normalizer norm(4);
  const Batch b = sample_trajectories(*env, pi, norm, 3, 9, 0);
  REQUIRE(b.trajectories.size() == 3);
  for (const auto& tr : b.trajectories) {
    CHECK(tr.length() == 50);
    CHECK(tr.terminal);
    CHECK(tr.costs == tr.true_costs);
  }
  CHECK(b.steps() == 150);
  CHECK(b.time_index[50] == 0);
  CHECK(b.time_index[149] == 49);
}

TEST_CASE("imitation sampling leaves the learning signal empty") {
  const auto env = make_env("pendulum", {{"horizon", 10}});
  SampleOptions so;
  so.use_true_cost = false;
  const Batch b = sample_trajectories(*env, pendulum_policy(1), Normalizer(3), 2, 1, 0, so);
  CHECK(b.trajectories[0].costs.isZero());
  CHECK(b.trajectories[0].true_costs.cwiseAbs().sum() > 0);
}

TEST_CASE("deterministic sampling follows the mean") {
  const auto env = make_env("pendulum", {{"horizon", 10}});
  const auto pi = pendulum_policy(3);
  SampleOptions so;
  so.stochastic = false;
  const Batch b = sample_trajectories(*env, pi, Normalizer(3), 1, 1, 0, so);
  CHECK((b.actions - mean_actions(pi, b.obs)).norm() <= 1e-12);
}

TEST_CASE("discounted return") {
  Vec c(3);
  c << 1.0, 2.0, 3.0;
  CHECK(discounted_return(c, 0.5) == doctest::Approx(-(1.0 + 1.0 + 0.75)));
  CHECK(discounted_return(c, 1.0) == -6.0);
  CHECK(discounted_return(c, 0.0) == -1.0);
  CHECK_THROWS_AS(discounted_return(c, 1.5), std::invalid_argument);
}

TEST_CASE("gae matches a direct sum") {
  const auto env = make_env("pendulum", {{"horizon", 12}});
  Batch b = sample_trajectories(*env, pendulum_policy(5), Normalizer(3), 2, 4, 0);
  b.trajectories[1].terminal = false;  // exercise bootstrap
  const auto value = init_params<double>(MlpSpec::make(3, {8}, 1, 1.0), 3);
  const double g = 0.9, tau = 0.8;
  gae(b, value, g, tau, false);

  Eigen::Index off = 0;
  for (const auto& tr : b.trajectories) {
    const auto T = tr.length();
    std::vector<double> v(static_cast<std::size_t>(T + 1));
    for (Eigen::Index t = 0; t < T; ++t) v[static_cast<std::size_t>(t)] = forward(value, Vec(tr.obs.col(t)))[0];
    v[static_cast<std::size_t>(T)] = tr.terminal ? 0.0 : forward(value, tr.final_obs)[0];
    for (Eigen::Index t = 0; t < T; ++t) {
      double a = 0.0;
      for (Eigen::Index l = 0; t + l < T; ++l) {
        const auto i = static_cast<std::size_t>(t + l);
        const double delta = -tr.costs[t + l] + g * v[i + 1] - v[i];
        a += std::pow(g * tau, static_cast<double>(l)) * delta;
      }
      CHECK(b.advantages[off + t] == doctest::Approx(a).epsilon(1e-10));
      CHECK(b.value_targets[off + t] == doctest::Approx(a + v[static_cast<std::size_t>(t)]).epsilon(1e-10));
    }
    off += T;
  }
}

TEST_CASE("advantage normalization") {
  Vec a(5);
  a << 1.0, 4.0, -2.0, 0.5, 3.0;
  normalize_advantages(a);
  CHECK(std::abs(a.mean()) <= 1e-10);
  CHECK(std::abs(std::sqrt(a.squaredNorm() / 5.0) - 1.0) <= 1e-8);
  Vec c = Vec::Constant(4, 2.0);
  normalize_advantages(c);
  CHECK(c.isZero());
  Vec one = Vec::Constant(1, 7.0);
  normalize_advantages(one);
  CHECK(one[0] == 7.0);
}

TEST_CASE("demo file round trip") {
  const auto env = make_env("point-reacher", {{"horizon", 5}});
  const auto pi = GaussianPolicy::make(MlpSpec::make(4, {8}, 2), 2);
  Normalizer norm(4);
  norm.observe(Vec::Ones(4));
  norm.observe(Vec::Zero(4));
  const Batch b = sample_trajectories(*env, pi, norm, 3, 1, 0);
  DemoSet d;
  d.state_dim = 4;
  d.action_dim = 2;
  d.normalizer = norm;
  d.seed = 77;
  for (const auto& tr : b.trajectories) d.trajectories.push_back(tr);
  std::stringstream ss;
  write_demos(d, ss);
  const DemoSet e = read_demos(ss);
  CHECK(e.state_dim == 4);
  CHECK(e.action_dim == 2);
  CHECK(e.seed == 77);
  CHECK(e.normalizer == norm);
  CHECK(e.all_states() == d.all_states());
  CHECK(e.all_actions() == d.all_actions());
  CHECK(e.total_steps() == 15);

  const std::string bytes = ss.str();
  std::stringstream trunc(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(read_demos(trunc), FormatError);
  std::string wrong = bytes;
  wrong[0] = 'X';
  std::stringstream bad(wrong);
  CHECK_THROWS_AS(read_demos(bad), FormatError);
}
