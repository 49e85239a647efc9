#include "spacil/rollout.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "spacil/binary_io.hpp"
#include "spacil/random.hpp"

namespace spacil {

namespace {

Trajectory run_episode(const Env& env, const GaussianPolicy& pi, const Normalizer& norm, std::uint64_t ep_seed,
                       const SampleOptions& opts) {
  const auto& spec = env.spec();
  const int T = spec.horizon;
  Rng action_rng(derive_seed(ep_seed, {1}));
  Vec s = env.reset(derive_seed(ep_seed, {0}));

  Trajectory tr;
  tr.states.resize(spec.state_dim, T);
  tr.obs.resize(spec.state_dim, T);
  tr.actions.resize(spec.action_dim, T);
  tr.costs = Vec::Zero(T);
  tr.true_costs.resize(T);
  int t = 0;
  for (; t < T; ++t) {
    const Vec o = norm.normalize(s);
    const Vec a = opts.stochastic ? sample_action(pi, o, action_rng) : mean_action(pi, o);
    StepResult r = env.step(s, a);
    tr.states.col(t) = s;
    tr.obs.col(t) = o;
    tr.actions.col(t) = a;
    tr.true_costs[t] = r.true_cost;
    if (opts.use_true_cost) tr.costs[t] = r.true_cost;
    s = std::move(r.next_state);
    if (r.terminal) {
      ++t;
      tr.terminal = true;
      break;
    }
  }
  if (t == T) tr.terminal = true;  // horizon reached
  tr.states.conservativeResize(Eigen::NoChange, t);
  tr.obs.conservativeResize(Eigen::NoChange, t);
  tr.actions.conservativeResize(Eigen::NoChange, t);
  tr.costs.conservativeResize(t);
  tr.true_costs.conservativeResize(t);
  tr.final_obs = norm.normalize(s);
  tr.final_state = std::move(s);
  return tr;
}

}  // namespace

void Batch::assemble() {
  Eigen::Index total = 0;
  for (const auto& tr : trajectories) total += tr.length();
  if (trajectories.empty()) {
    obs.resize(0, 0);
    actions.resize(0, 0);
    time_index.clear();
    return;
  }
  obs.resize(trajectories.front().obs.rows(), total);
  actions.resize(trajectories.front().actions.rows(), total);
  time_index.resize(static_cast<std::size_t>(total));
  Eigen::Index off = 0;
  for (const auto& tr : trajectories) {
    const auto T = tr.length();
    obs.middleCols(off, T) = tr.obs;
    actions.middleCols(off, T) = tr.actions;
    for (Eigen::Index t = 0; t < T; ++t) time_index[static_cast<std::size_t>(off + t)] = static_cast<int>(t);
    off += T;
  }
}

Batch sample_trajectories(const Env& env, const GaussianPolicy& pi, const Normalizer& norm, int n, std::uint64_t seed,
                          std::uint64_t iteration, const SampleOptions& opts) {
  if (n < 1) throw std::invalid_argument("sample_trajectories: n must be >= 1");
  if (pi.state_dim() != env.spec().state_dim || pi.action_dim() != env.spec().action_dim)
    throw std::invalid_argument("sample_trajectories: policy/environment dimension mismatch");
  Batch batch;
  batch.trajectories.resize(static_cast<std::size_t>(n));
  const int workers = std::max(1, std::min(opts.workers, n));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        batch.trajectories[static_cast<std::size_t>(i)] =
            run_episode(env, pi, norm, derive_seed(seed, {iteration, static_cast<std::uint64_t>(i)}), opts);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  batch.assemble();
  return batch;
}

double discounted_return(const Vec& costs, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("discounted_return: gamma must lie in [0, 1]");
  double g = 0.0, w = 1.0;
  for (Eigen::Index t = 0; t < costs.size(); ++t) {
    g -= w * costs[t];
    w *= gamma;
  }
  return g;
}

double discounted_return(const Trajectory& traj, double gamma) { return discounted_return(traj.costs, gamma); }

double true_return(const Trajectory& traj, double gamma) { return discounted_return(traj.true_costs, gamma); }

void normalize_advantages(Vec& adv) {
  if (adv.size() < 2) return;
  const double mean = adv.mean();
  adv.array() -= mean;
  const double sd = std::sqrt(adv.squaredNorm() / static_cast<double>(adv.size()));
  if (sd > 0.0) adv /= sd;
}

void gae(Batch& batch, const FlatParams& value_net, double gamma, double tau, bool normalize) {
  const Eigen::Index N = batch.steps();
  batch.advantages.resize(N);
  batch.value_targets.resize(N);
  Eigen::Index off = 0;
  for (const auto& tr : batch.trajectories) {
    const auto T = tr.length();
    const Vec v = forward_batch(value_net, tr.obs).row(0).transpose();
    const double v_last = tr.terminal ? 0.0 : forward(value_net, tr.final_obs)[0];
    double running = 0.0;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const double v_next = (t + 1 < T) ? v[t + 1] : v_last;
      const double delta = -tr.costs[t] + gamma * v_next - v[t];
      running = delta + gamma * tau * running;
      batch.advantages[off + t] = running;
      batch.value_targets[off + t] = running + v[t];
    }
    off += T;
  }
  if (normalize) normalize_advantages(batch.advantages);
}

// --- demos -----------------------------------------------------------------

Eigen::Index DemoSet::total_steps() const {
  Eigen::Index n = 0;
  for (const auto& tr : trajectories) n += tr.length();
  return n;
}

Mat DemoSet::all_states() const {
  Mat S(state_dim, total_steps());
  Eigen::Index off = 0;
  for (const auto& tr : trajectories) {
    S.middleCols(off, tr.length()) = tr.states;
    off += tr.length();
  }
  return S;
}

Mat DemoSet::all_actions() const {
  Mat A(action_dim, total_steps());
  Eigen::Index off = 0;
  for (const auto& tr : trajectories) {
    A.middleCols(off, tr.length()) = tr.actions;
    off += tr.length();
  }
  return A;
}

// "SPCLDEMO" | u32 version | u32 D_s | u32 D_a | u32 n_traj
//   | per trajectory: u32 T, then per step D_s state f64 followed by D_a action f64
//   | normalizer block | u64 generator seed
void write_demos(const DemoSet& set, std::ostream& os) {
  bin::write_magic(os, "SPCLDEMO");
  bin::write_u32(os, 1);
  bin::write_u32(os, static_cast<std::uint32_t>(set.state_dim));
  bin::write_u32(os, static_cast<std::uint32_t>(set.action_dim));
  bin::write_u32(os, static_cast<std::uint32_t>(set.trajectories.size()));
  for (const auto& tr : set.trajectories) {
    if (tr.states.rows() != set.state_dim || tr.actions.rows() != set.action_dim || tr.actions.cols() != tr.states.cols())
      throw std::invalid_argument("write_demos: trajectory dimensions inconsistent with set");
    bin::write_u32(os, static_cast<std::uint32_t>(tr.length()));
    for (Eigen::Index t = 0; t < tr.length(); ++t) {
      bin::write_f64s(os, tr.states.col(t));
      bin::write_f64s(os, tr.actions.col(t));
    }
  }
  set.normalizer.write(os);
  bin::write_u64(os, set.seed);
}

DemoSet read_demos(std::istream& is) {
  bin::expect_magic(is, "SPCLDEMO");
  const auto version = bin::read_u32(is, "version");
  if (version != 1) throw FormatError("unsupported demo version " + std::to_string(version));
  DemoSet set;
  set.state_dim = static_cast<int>(bin::read_u32(is, "D_s"));
  set.action_dim = static_cast<int>(bin::read_u32(is, "D_a"));
  if (set.state_dim < 1 || set.action_dim < 1 || set.state_dim > 4096 || set.action_dim > 4096)
    throw FormatError("implausible demo dimensions");
  const auto n = bin::read_u32(is, "trajectory count");
  set.trajectories.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto T = bin::read_u32(is, "trajectory length");
    if (T > (1U << 24)) throw FormatError("implausible trajectory length");
    Trajectory tr;
    tr.states.resize(set.state_dim, T);
    tr.actions.resize(set.action_dim, T);
    for (std::uint32_t t = 0; t < T; ++t) {
      tr.states.col(t) = bin::read_f64s(is, set.state_dim, "demo state");
      tr.actions.col(t) = bin::read_f64s(is, set.action_dim, "demo action");
    }
    set.trajectories.push_back(std::move(tr));
  }
  set.normalizer = Normalizer::read(is);
  if (set.normalizer.dim() != set.state_dim) throw FormatError("demo normalizer dimension mismatch");
  set.seed = bin::read_u64(is, "generator seed");
  return set;
}

void write_demos(const DemoSet& set, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_demos(set, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

DemoSet read_demos(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_demos(is);
}

}  // namespace spacil
