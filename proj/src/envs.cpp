#include "spacil/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace spacil {

namespace {

std::map<std::string, double> apply_overrides(std::map<std::string, double> base,
                                              const std::map<std::string, double>& overrides,
                                              const std::string& env) {
  for (const auto& [k, v] : overrides) {
    auto it = base.find(k);
    if (it == base.end()) throw std::invalid_argument(env + ": unknown dynamics key '" + k + "'");
    it->second = v;
  }
  return base;
}

void check_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw std::domain_error(std::string("env step: non-finite ") + what);
}

}  // namespace

void EnvSpec::validate() const {
  if (state_dim < 1 || action_dim < 1) throw std::invalid_argument("EnvSpec: dims must be >= 1");
  if (horizon < 1) throw std::invalid_argument("EnvSpec: horizon must be >= 1");
  if (action_low.size() != action_dim || action_high.size() != action_dim)
    throw std::invalid_argument("EnvSpec: bounds size mismatch");
  if (!action_low.allFinite() || !action_high.allFinite()) throw std::invalid_argument("EnvSpec: bounds must be finite");
}

Vec Env::clip_action(const Vec& action) const {
  return action.cwiseMax(spec().action_low).cwiseMin(spec().action_high);
}

double wrap_angle(double theta) {
  constexpr double pi = std::numbers::pi;
  double w = std::fmod(theta + pi, 2.0 * pi);
  if (w < 0) w += 2.0 * pi;
  return w - pi;
}

// --- point-reacher ---------------------------------------------------------

PointReacher::PointReacher(const std::map<std::string, double>& overrides) {
  spec_.name = "point-reacher";
  spec_.state_dim = 4;
  spec_.action_dim = 2;
  spec_.params = apply_overrides(
      {{"step_size", 0.05}, {"action_cost", 0.01}, {"target_range", 0.8}, {"start_range", 0.1}, {"horizon", 50}},
      overrides, spec_.name);
  spec_.horizon = static_cast<int>(spec_.params.at("horizon"));
  spec_.action_low = Vec::Constant(2, -1.0);
  spec_.action_high = Vec::Constant(2, 1.0);
  spec_.validate();
}

Vec PointReacher::reset(std::uint64_t seed) const {
  Rng rng(seed);
  const double tr = spec_.params.at("target_range");
  const double sr = spec_.params.at("start_range");
  std::uniform_real_distribution<double> ut(-tr, tr), us(-sr, sr);
  const double tx = ut(rng), ty = ut(rng);
  const double px = us(rng), py = us(rng);
  Vec s(4);
  s << px, py, px - tx, py - ty;
  return s;
}

StepResult PointReacher::step(const Vec& state, const Vec& action) const {
  check_finite(state, "state");
  check_finite(action, "action");
  if (state.size() != 4 || action.size() != 2) throw std::invalid_argument("point-reacher: dimension mismatch");
  const Vec a = clip_action(action);
  const Eigen::Vector2d p = state.head<2>();
  const Eigen::Vector2d target = p - state.tail<2>();
  const Eigen::Vector2d p_next = (p + spec_.params.at("step_size") * a).cwiseMax(-1.0).cwiseMin(1.0);
  StepResult r;
  r.next_state.resize(4);
  r.next_state << p_next, p_next - target;
  r.true_cost = state.tail<2>().norm() + spec_.params.at("action_cost") * a.squaredNorm();
  return r;
}

// --- pendulum --------------------------------------------------------------

Pendulum::Pendulum(const std::map<std::string, double>& overrides) {
  spec_.name = "pendulum";
  spec_.state_dim = 3;
  spec_.action_dim = 1;
  spec_.params = apply_overrides({{"gravity_gain", 15.0},
                                  {"torque_gain", 3.0},
                                  {"dt", 0.05},
                                  {"max_speed", 8.0},
                                  {"max_torque", 2.0},
                                  {"speed_cost", 0.1},
                                  {"torque_cost", 0.001},
                                  {"horizon", 200}},
                                 overrides, spec_.name);
  spec_.horizon = static_cast<int>(spec_.params.at("horizon"));
  const double mt = spec_.params.at("max_torque");
  spec_.action_low = Vec::Constant(1, -mt);
  spec_.action_high = Vec::Constant(1, mt);
  spec_.validate();
}

Vec Pendulum::reset(std::uint64_t seed) const {
  Rng rng(seed);
  std::uniform_real_distribution<double> uth(-std::numbers::pi, std::numbers::pi), uw(-1.0, 1.0);
  const double th = uth(rng);
  const double w = uw(rng);
  Vec s(3);
  s << std::cos(th), std::sin(th), w;
  return s;
}

StepResult Pendulum::step(const Vec& state, const Vec& action) const {
  check_finite(state, "state");
  check_finite(action, "action");
  if (state.size() != 3 || action.size() != 1) throw std::invalid_argument("pendulum: dimension mismatch");
  const auto& P = spec_.params;
  const double u = clip_action(action)[0];
  const double th = std::atan2(state[1], state[0]);
  const double w = state[2];
  const double dt = P.at("dt");
  const double max_speed = P.at("max_speed");
  // Semi-implicit Euler: velocity first, then angle with the new velocity.
  const double acc = P.at("gravity_gain") * std::sin(th) + P.at("torque_gain") * u;
  const double w_next = std::clamp(w + acc * dt, -max_speed, max_speed);
  const double th_next = th + w_next * dt;
  const double wt = wrap_angle(th);
  StepResult r;
  r.next_state.resize(3);
  r.next_state << std::cos(th_next), std::sin(th_next), w_next;
  r.true_cost = wt * wt + P.at("speed_cost") * w * w + P.at("torque_cost") * u * u;
  return r;
}

EnvPtr make_env(const std::string& name, const std::map<std::string, double>& overrides) {
  if (name == "point-reacher") return std::make_shared<PointReacher>(overrides);
  if (name == "pendulum") return std::make_shared<Pendulum>(overrides);
  throw std::invalid_argument("unknown environment '" + name + "'");
}

// --- normalizer ------------------------------------------------------------

Normalizer::Normalizer(int dim) : mean_(Vec::Zero(dim)), var_(Vec::Zero(dim)) {}

Vec Normalizer::variance() const {
  if (count_ < 2) return Vec::Ones(mean_.size());
  return var_.cwiseMax(kVarianceFloor);
}

void Normalizer::observe(const Vec& x) {
  if (x.size() != mean_.size()) throw std::invalid_argument("normalizer: dimension mismatch");
  const double n1 = static_cast<double>(count_ + 1);
  const Vec delta = x - mean_;
  mean_ += delta / n1;
  var_ = (static_cast<double>(count_) * var_ + delta.cwiseProduct(x - mean_)) / n1;
  ++count_;
}

Vec Normalizer::normalize(const Vec& x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("normalizer: dimension mismatch");
  return (x - mean_).cwiseQuotient(stddev());
}

Mat Normalizer::normalize_batch(const Mat& X) const {
  if (X.rows() != mean_.size()) throw std::invalid_argument("normalizer: dimension mismatch");
  const Vec inv = stddev().cwiseInverse();
  return (X.colwise() - mean_).array().colwise() * inv.array();
}

// "SPCLNORM" | u32 dim | u64 count | f64 mean[dim] | f64 var[dim]
void Normalizer::write(std::ostream& os) const {
  bin::write_magic(os, "SPCLNORM");
  bin::write_u32(os, static_cast<std::uint32_t>(dim()));
  bin::write_u64(os, count_);
  bin::write_f64s(os, mean_);
  bin::write_f64s(os, var_);
}

Normalizer Normalizer::read(std::istream& is) {
  bin::expect_magic(is, "SPCLNORM");
  const auto dim = bin::read_u32(is, "normalizer dim");
  if (dim == 0 || dim > (1U << 16)) throw FormatError("implausible normalizer dimension");
  Normalizer n(static_cast<int>(dim));
  n.count_ = bin::read_u64(is, "normalizer count");
  n.mean_ = bin::read_f64s(is, dim, "normalizer mean");
  n.var_ = bin::read_f64s(is, dim, "normalizer variance");
  return n;
}

}  // namespace spacil
