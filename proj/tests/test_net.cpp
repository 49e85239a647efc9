#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fd.hpp"
#include "spacil/net.hpp"

using namespace spacil;

namespace {

FlatParams small_net(std::uint64_t seed, double output_scale = 1.0) {
  auto p = init_params<double>(MlpSpec::make(3, {6, 5}, 2, output_scale), seed);
  Rng rng(seed + 99);
  p.values += 0.3 * standard_normal<double>(p.values.size(), rng);  // move the last layer off zero
  return p;
}

// Independent per-sample forward pass for the oracle.
Vec naive_forward(const FlatParams& p, const Vec& x) {
  Vec a = x;
  Eigen::Index off = 0;
  const auto& ls = p.spec.layer_sizes;
  for (std::size_t l = 0; l + 1 < ls.size(); ++l) {
    const int in = ls[l], out = ls[l + 1];
    Vec z(out);
    for (int i = 0; i < out; ++i) {
      double s = p.values[off + in * out + i];
      for (int j = 0; j < in; ++j) s += p.values[off + j * out + i] * a[j];
      z[i] = s;
    }
    off += in * out + out;
    a = (l + 2 < ls.size()) ? Vec(z.array().tanh()) : z;
  }
  return a;
}

}  // namespace

TEST_CASE("mlp spec sizes") {
  const auto s = MlpSpec::make(11, {400, 300}, 3);
  CHECK(s.output_size() == 3);
  CHECK(s.param_count() == 400 * 12 + 300 * 401 + 3 * 301);
  CHECK_THROWS_AS(MlpSpec{{4}}.validate(), std::invalid_argument);
  CHECK_THROWS_AS(MlpSpec::make(3, {0}, 1), std::invalid_argument);
}

TEST_CASE("init ranges") {
  const auto p = init_params<double>(MlpSpec::make(100, {100, 50}, 2), 7);
  // fan-in 100 -> U(-0.1, 0.1)
  CHECK(p.weight(1).cwiseAbs().maxCoeff() <= 0.1);
  CHECK(p.bias(1).cwiseAbs().maxCoeff() <= 0.1);
  CHECK(p.weight(1).cwiseAbs().maxCoeff() > 0.09);
  // final layer: zero bias, weights scaled by 0.1 of U(-1/sqrt(50), 1/sqrt(50))
  CHECK(p.bias(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.weight(2).cwiseAbs().maxCoeff() <= 0.1 / std::sqrt(50.0));
  CHECK(init_params<double>(p.spec, 7).values == p.values);
}

TEST_CASE("forward matches per-sample oracle") {
  const auto p = small_net(1);
  Rng rng(5);
  Mat X(3, 7);
  for (int j = 0; j < 7; ++j) X.col(j) = standard_normal<double>(3, rng);
  const Mat Y = forward_batch(p, X);
  CHECK(Y.rows() == 2);
  for (int j = 0; j < 7; ++j) CHECK((Y.col(j) - naive_forward(p, X.col(j))).norm() < 1e-12);
  CHECK_THROWS_AS(forward_batch(p, Mat(Mat::Zero(4, 1))), std::invalid_argument);
}

TEST_CASE("backward matches finite differences") {
  const auto p = small_net(2);
  Rng rng(3);
  Mat X(3, 4);
  for (int j = 0; j < 4; ++j) X.col(j) = standard_normal<double>(3, rng);
  Mat U(2, 4);
  for (int j = 0; j < 4; ++j) U.col(j) = standard_normal<double>(2, rng);
  const auto g = backward_batch(p, X, U);

  auto loss_params = [&](const Vec& theta) {
    FlatParams q{theta, p.spec};
    return (U.array() * forward_batch(q, X).array()).sum();
  };
  CHECK(fd::rel_err(g.params, fd::gradient(loss_params, p.values)) < 1e-6);

  for (int j = 0; j < 4; ++j) {
    auto loss_x = [&](const Vec& x) { return U.col(j).dot(forward(p, x)); };
    CHECK(fd::rel_err(g.input.col(j), fd::gradient(loss_x, X.col(j))) < 1e-6);
  }
}

TEST_CASE("jvp and jacobian match finite differences") {
  const auto p = small_net(4);
  Rng rng(8);
  const Vec x = standard_normal<double>(3, rng);
  const Vec t = standard_normal<double>(p.values.size(), rng);
  const Mat jv = jvp_batch(p, Mat(x), t);
  const double h = 1e-6;
  FlatParams a{p.values + h * t, p.spec}, b{p.values - h * t, p.spec};
  const Vec fd_jv = (forward(a, x) - forward(b, x)) / (2 * h);
  CHECK(fd::rel_err(jv.col(0), fd_jv) < 1e-6);

  const Mat J = jacobian(p, x);
  const Mat J_fd = fd::jacobian([&](const Vec& z) { return forward(p, z); }, x);
  CHECK(fd::rel_err(J, J_fd) < 1e-6);
}

TEST_CASE("adam first step") {
  // Bias-corrected first step: lr * g / (|g| + eps_adam)
  auto st = AdamState::fresh(1, 0.01);
  Vec theta = Vec::Constant(1, 1.0);
  adam_step(st, theta, Vec(Vec::Constant(1, 0.5)));
  CHECK(theta[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(st.step == 1);
  Vec bad = Vec::Constant(1, std::nan(""));
  CHECK_THROWS_AS(adam_step(st, theta, bad), std::domain_error);
}

TEST_CASE("adam minimizes a quadratic") {
  auto st = AdamState::fresh(2, 0.05);
  Vec theta(2);
  theta << 3.0, -2.0;
  for (int i = 0; i < 2000; ++i) adam_step(st, theta, Vec(2.0 * theta));
  CHECK(theta.norm() < 1e-2);
}

TEST_CASE("net block round trip") {
  const auto p = small_net(6, 0.1);
  std::stringstream ss;
  write_net_block(ss, p);
  const auto q = read_net_block(ss);
  CHECK(q.values == p.values);
  CHECK(q.spec.layer_sizes == p.spec.layer_sizes);

  std::string bytes = ss.str();
  std::stringstream trunc(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_net_block(trunc), FormatError);
  std::stringstream bad("SPCLNETX");
  CHECK_THROWS_AS(read_net_block(bad), FormatError);
}
