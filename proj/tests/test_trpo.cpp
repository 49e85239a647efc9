#include <doctest.h>

#include <cmath>

#include "fd.hpp"
#include "spacil/trpo.hpp"

using namespace spacil;

namespace {

struct Fixture {
  GaussianPolicy pi;
  PolicyBatch pb;
};

// ~100-parameter policy on random data.
Fixture fixture(std::uint64_t seed, int n = 40) {
  Fixture f;
  f.pi = GaussianPolicy::make(MlpSpec::make(3, {10, 5}, 2, 1.0), seed, -0.3);
  Rng rng(seed + 1);
  Mat obs(3, n), act(2, n);
  Vec adv(n);
  for (int j = 0; j < n; ++j) {
    obs.col(j) = standard_normal<double>(3, rng);
    act.col(j) = standard_normal<double>(2, rng);
    adv[j] = standard_normal<double>(1, rng)[0];
  }
  f.pb = make_policy_batch(f.pi, obs, act, adv);
  return f;
}

GaussianPolicy with_flat(GaussianPolicy pi, const Vec& theta) {
  pi.set_flat(theta);
  return pi;
}

}  // namespace

TEST_CASE("surrogate at the old policy is -mean(A)") {
  auto f = fixture(1);
  CHECK(surrogate_loss(f.pi, f.pb) == doctest::Approx(-f.pb.advantages.mean()).epsilon(1e-12));
  CHECK(mean_kl(f.pi, f.pb) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("surrogate gradient matches finite differences") {
  auto f = fixture(2);
  Rng rng(3);
  const Vec theta = f.pi.flat() + 0.05 * standard_normal<double>(f.pi.flat_size(), rng);
  const auto moved = with_flat(f.pi, theta);
  const auto loss = [&](const Vec& t) { return surrogate_loss(with_flat(f.pi, t), f.pb); };
  CHECK(fd::rel_err(surrogate_gradient(moved, f.pb), fd::gradient(loss, theta)) < 1e-6);
}

TEST_CASE("mean kl gradient matches finite differences") {
  auto f = fixture(4);
  Rng rng(5);
  const Vec theta = f.pi.flat() + 0.1 * standard_normal<double>(f.pi.flat_size(), rng);
  const auto loss = [&](const Vec& t) { return mean_kl(with_flat(f.pi, t), f.pb); };
  CHECK(fd::rel_err(mean_kl_gradient(with_flat(f.pi, theta), f.pb), fd::gradient(loss, theta)) < 1e-6);
}

TEST_CASE("fisher vector product matches the finite-difference kl hessian") {
  auto f = fixture(6);
  Rng rng(7);
  const Vec v = standard_normal<double>(f.pi.flat_size(), rng);
  const double h = 1e-5;
  const Vec theta = f.pi.flat();
  const Vec hv = (mean_kl_gradient(with_flat(f.pi, theta + h * v), f.pb) - mean_kl_gradient(with_flat(f.pi, theta - h * v), f.pb)) / (2 * h);
  CHECK(fd::rel_err(fisher_vector_product(f.pi, f.pb, v, 0.0), hv) < 1e-3);
  CHECK(fd::rel_err(fisher_vector_product(f.pi, f.pb, v, 0.01), Vec(hv + 0.01 * v)) < 1e-3);
}

TEST_CASE("conjugate gradient solves an spd system") {
  Rng rng(9);
  Mat B(6, 6);
  for (int j = 0; j < 6; ++j) B.col(j) = standard_normal<double>(6, rng);
  const Mat A = B * B.transpose() + Mat::Identity(6, 6);
  const Vec b = standard_normal<double>(6, rng);
  const Vec x = conjugate_gradient([&](const Vec& p) { return Vec(A * p); }, b, 20);
  CHECK((A * x - b).norm() < 1e-8);
  CHECK(conjugate_gradient([&](const Vec& p) { return Vec(A * p); }, Vec::Zero(6), 5).isZero());
}

TEST_CASE("trust region step honors max kl and improves the surrogate") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    auto f = fixture(seed, 80);
    TrpoConfig cfg;
    const auto r = trpo_update(f.pi, f.pb, cfg);
    REQUIRE(r.accepted);
    CHECK(r.kl <= cfg.max_kl);
    CHECK(mean_kl(r.policy, f.pb) == doctest::Approx(r.kl));
    CHECK(r.objective_after < r.objective_before);
  }
}

TEST_CASE("zero advantages leave the policy unchanged") {
  auto f = fixture(20);
  f.pb.advantages.setZero();
  const auto r = trpo_update(f.pi, f.pb, TrpoConfig{});
  CHECK_FALSE(r.accepted);
  CHECK(r.policy.flat() == f.pi.flat());
}

TEST_CASE("invalid trust region settings") {
  auto f = fixture(21);
  TrpoConfig cfg;
  cfg.max_kl = 0.0;
  CHECK_THROWS_AS(trpo_update(f.pi, f.pb, cfg), std::invalid_argument);
  cfg = {};
  cfg.backtrack_coeff = 1.0;
  CHECK_THROWS_AS(trpo_update(f.pi, f.pb, cfg), std::invalid_argument);
}

TEST_CASE("regularized step reduces the fixed regularizer term") {
  auto f = fixture(22, 60);
  f.pb.advantages.setZero();
  TrpoConfig cfg;
  cfg.lambda1 = 1.0;
  PgdConfig pgd;
  pgd.eps = 0.5;
  pgd.step = 0.5;
  const auto reg = policy_regularizer(f.pi, f.pb.obs, Vec::Ones(f.pb.size()), pgd, 3);
  const auto r = trpo_update(f.pi, f.pb, cfg, &reg);
  REQUIRE(r.accepted);
  CHECK(policy_regularizer_fixed(r.policy, reg) < policy_regularizer_fixed(f.pi, reg));
  CHECK(r.kl <= cfg.max_kl);
}

TEST_CASE("value regression lowers the loss") {
  auto net = init_params<double>(MlpSpec::make(2, {16}, 1), 1);
  Rng rng(2);
  Mat X(2, 200);
  Vec y(200);
  for (int j = 0; j < 200; ++j) {
    X.col(j) = standard_normal<double>(2, rng);
    y[j] = std::sin(X(0, j)) + 0.5 * X(1, j);
  }
  const double before = value_mse(net, X, y);
  auto adam = AdamState::fresh(net.values.size(), 1e-3);
  ValueFitConfig cfg;
  cfg.epochs = 50;
  const double after = fit_value(net, X, y, adam, cfg, 4);
  CHECK(after < 0.5 * before);

  // Small learning rate: first epoch does not increase the full-batch loss.
  auto net2 = init_params<double>(MlpSpec::make(2, {16}, 1), 1);
  auto slow = AdamState::fresh(net2.values.size(), 1e-4);
  ValueFitConfig one;
  one.epochs = 1;
  CHECK(fit_value(net2, X, y, slow, one, 4) <= before);
}
