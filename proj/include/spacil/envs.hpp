#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "spacil/net.hpp"

namespace spacil {

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  Vec action_low;
  Vec action_high;
  int horizon = 1;
  std::map<std::string, double> params;  // dynamics constants

  void validate() const;
};

struct StepResult {
  Vec next_state;
  double true_cost = 0.0;
  bool terminal = false;
};

/// Deterministic environment. Implementations are immutable after
/// construction, so one instance may be stepped from many threads.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Vec reset(std::uint64_t seed) const = 0;
  /// `action` is clipped to the bounds before integration.
  virtual StepResult step(const Vec& state, const Vec& action) const = 0;

  Vec clip_action(const Vec& action) const;
};

using EnvPtr = std::shared_ptr<const Env>;

/// Point mass on [-1,1]^2 chasing a fixed target.
/// state = [p_x, p_y, p_x - t_x, p_y - t_y]; p' = clip(p + step_size * a).
class PointReacher final : public Env {
 public:
  explicit PointReacher(const std::map<std::string, double>& overrides = {});
  const EnvSpec& spec() const override { return spec_; }
  Vec reset(std::uint64_t seed) const override;
  StepResult step(const Vec& state, const Vec& action) const override;

 private:
  EnvSpec spec_;
};

/// Torque-limited pendulum swing-up, upright at theta = 0.
/// state = [cos theta, sin theta, theta_dot].
class Pendulum final : public Env {
 public:
  explicit Pendulum(const std::map<std::string, double>& overrides = {});
  const EnvSpec& spec() const override { return spec_; }
  Vec reset(std::uint64_t seed) const override;
  StepResult step(const Vec& state, const Vec& action) const override;

 private:
  EnvSpec spec_;
};

/// "point-reacher" or "pendulum". Override keys must already exist in the
/// environment's parameter table.
EnvPtr make_env(const std::string& name, const std::map<std::string, double>& overrides = {});

/// Wraps angle to [-pi, pi).
double wrap_angle(double theta);

/// Running per-dimension mean/variance (Welford). Population variance.
class Normalizer {
 public:
  static constexpr double kVarianceFloor = 1e-8;

  Normalizer() = default;
  explicit Normalizer(int dim);

  int dim() const { return static_cast<int>(mean_.size()); }
  std::uint64_t count() const { return count_; }
  const Vec& mean() const { return mean_; }
  const Vec& raw_variance() const { return var_; }
  /// Variance used for scaling: 1 until two samples are seen, then the
  /// running variance clamped at the floor.
  Vec variance() const;
  Vec stddev() const { return variance().cwiseSqrt(); }

  void observe(const Vec& x);
  Vec normalize(const Vec& x) const;
  Mat normalize_batch(const Mat& X) const;

  bool operator==(const Normalizer&) const = default;

  void write(std::ostream& os) const;
  static Normalizer read(std::istream& is);

 private:
  Vec mean_;
  Vec var_;
  std::uint64_t count_ = 0;
};

}  // namespace spacil
