#include "spacil/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace spacil::theory {

int matched_action_nodes(int resolution, double move) {
  const auto steps = static_cast<int>(std::lround(move * static_cast<double>(resolution - 1)));
  return 2 * std::max(steps, 1) + 1;
}

LipschitzMdp LipschitzMdp::tent(double lc, double gamma, int resolution) {
  LipschitzMdp m;
  m.lc = lc;
  m.gamma = gamma;
  m.resolution = resolution;
  m.action_nodes = matched_action_nodes(resolution, m.move);
  m.cost = [lc](double s, double) { return lc * std::abs(s - 0.5); };
  return m;
}

double LipschitzMdp::successor(double s, double a) const { return std::clamp(s + move * a, 0.0, 1.0); }

void LipschitzMdp::validate() const {
  if (resolution < 2 || action_nodes < 1) throw std::invalid_argument("mdp: grids need at least 2 states and 1 action");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("mdp: gamma must lie in [0, 1)");
  if (!(gamma * lp < 1.0)) throw std::invalid_argument("mdp: hypothesis gamma * L_p < 1 violated");
  if (!cost) throw std::invalid_argument("mdp: no cost function");
}

double interpolate(const Vec& values, double s) {
  const auto n = values.size();
  const double x = std::clamp(s, 0.0, 1.0) * static_cast<double>(n - 1);
  const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(x)), n - 2);
  const double t = x - static_cast<double>(i);
  return (1.0 - t) * values[i] + t * values[i + 1];
}

namespace {

struct Tables {
  Mat cost;  // states x actions
  std::vector<std::pair<Eigen::Index, double>> succ;  // (left node, weight of right) per (i,k)
};

Tables build_tables(const LipschitzMdp& mdp) {
  const Vec S = mdp.states();
  const Vec A = mdp.actions();
  Tables t;
  t.cost.resize(S.size(), A.size());
  t.succ.resize(static_cast<std::size_t>(S.size() * A.size()));
  const auto n = S.size();
  for (Eigen::Index i = 0; i < S.size(); ++i) {
    for (Eigen::Index k = 0; k < A.size(); ++k) {
      t.cost(i, k) = mdp.cost(S[i], A[k]);
      const double x = mdp.successor(S[i], A[k]) * static_cast<double>(n - 1);
      const auto left = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(x)), n - 2);
      t.succ[static_cast<std::size_t>(i * A.size() + k)] = {left, x - static_cast<double>(left)};
    }
  }
  return t;
}

Mat q_from_tables(const Tables& t, const LipschitzMdp& mdp, const Vec& V) {
  Mat Q = t.cost;
  const auto na = Q.cols();
  for (Eigen::Index i = 0; i < Q.rows(); ++i)
    for (Eigen::Index k = 0; k < na; ++k) {
      const auto [l, w] = t.succ[static_cast<std::size_t>(i * na + k)];
      Q(i, k) += mdp.gamma * ((1.0 - w) * V[l] + w * V[l + 1]);
    }
  return Q;
}

}  // namespace

ValueIterationResult value_iteration(const LipschitzMdp& mdp, double tol, int max_iterations) {
  mdp.validate();
  const Tables t = build_tables(mdp);
  ValueIterationResult r;
  r.values = Vec::Zero(mdp.resolution);
  for (int it = 0; it < max_iterations; ++it) {
    const Vec next = q_from_tables(t, mdp, r.values).rowwise().minCoeff();
    const double diff = (next - r.values).cwiseAbs().maxCoeff();
    r.values = next;
    r.iterations = it + 1;
    r.sup_diffs.push_back(diff);
    if (diff <= tol) return r;
  }
  throw std::runtime_error("value_iteration: no convergence within iteration cap");
}

Mat q_values(const LipschitzMdp& mdp, const Vec& values) { return q_from_tables(build_tables(mdp), mdp, values); }

double lipschitz_estimate(const Vec& values, const Vec& grid) {
  if (values.size() < 2 || grid.size() != values.size()) throw std::invalid_argument("lipschitz_estimate: need >= 2 grid points");
  double best = 0.0;
  for (Eigen::Index i = 0; i + 1 < values.size(); ++i)
    best = std::max(best, std::abs(values[i + 1] - values[i]) / std::abs(grid[i + 1] - grid[i]));
  return best;
}

double lipschitz_estimate_2d(const Mat& values, const Vec& row_grid, const Vec& col_grid) {
  if (values.size() < 2 || values.rows() != row_grid.size() || values.cols() != col_grid.size())
    throw std::invalid_argument("lipschitz_estimate_2d: need >= 2 grid points");
  // Under the summed norm a monotone lattice path between two nodes has the
  // same length as their distance, so axis-adjacent pairs attain the max.
  double best = 0.0;
  for (Eigen::Index k = 0; k < values.cols(); ++k)
    for (Eigen::Index i = 0; i + 1 < values.rows(); ++i)
      best = std::max(best, std::abs(values(i + 1, k) - values(i, k)) / std::abs(row_grid[i + 1] - row_grid[i]));
  for (Eigen::Index k = 0; k + 1 < values.cols(); ++k)
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      best = std::max(best, std::abs(values(i, k + 1) - values(i, k)) / std::abs(col_grid[k + 1] - col_grid[k]));
  return best;
}

TheoremReport verify_theorem1(const LipschitzMdp& mdp, double tol) {
  mdp.validate();
  const auto vi = value_iteration(mdp, 1e-12);
  const Mat Q = q_values(mdp, vi.values);
  TheoremReport rep;
  rep.lv = lipschitz_estimate(vi.values, mdp.states());
  rep.lq = lipschitz_estimate_2d(Q, mdp.states(), mdp.actions());
  rep.bound = mdp.lc / (1.0 - mdp.gamma * mdp.lp);
  rep.tolerance = tol;
  rep.h = mdp.h();
  rep.discretization = 2.0 * mdp.lc * rep.h;
  rep.resolution = mdp.resolution;
  const double limit = rep.bound * (1.0 + tol) + rep.discretization;
  rep.pass = rep.lv <= limit && rep.lq <= limit;
  return rep;
}

GreedyMapReport verify_theorem2(const LipschitzMdp& mdp, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("verify_theorem2: temperature must be > 0");
  mdp.validate();
  const auto vi = value_iteration(mdp, 1e-12);
  const Mat Q = q_values(mdp, vi.values);
  const Vec A = mdp.actions();
  GreedyMapReport rep;
  rep.temperature = temperature;
  rep.resolution = mdp.resolution;
  rep.mean_policy.resize(Q.rows());
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    const double qmin = Q.row(i).minCoeff();
    const Eigen::RowVectorXd w = ((Q.row(i).array() - qmin) * (-1.0 / temperature)).exp().matrix();
    rep.mean_policy[i] = w.dot(A.transpose()) / w.sum();
  }
  rep.l_mu = lipschitz_estimate(rep.mean_policy, mdp.states());
  rep.lq = lipschitz_estimate_2d(Q, mdp.states(), mdp.actions());
  rep.finite = std::isfinite(rep.l_mu);
  return rep;
}

void write_report(std::ostream& text, std::ostream& csv, const LipschitzMdp& mdp, const TheoremReport& t1,
                  const GreedyMapReport* t2) {
  text << std::setprecision(6);
  text << "Lipschitz MDP: L_c=" << mdp.lc << " L_p=" << mdp.lp << " gamma=" << mdp.gamma
       << " resolution=" << mdp.resolution << " (h=" << t1.h << ")\n";
  text << "  bound L_c/(1-gamma L_p) = " << t1.bound << "\n";
  text << "  empirical L_V = " << t1.lv << "\n";
  text << "  empirical L_Q = " << t1.lq << "\n";
  text << "  limit (bound*(1+" << t1.tolerance << ") + " << t1.discretization << ") = "
       << t1.bound * (1.0 + t1.tolerance) + t1.discretization << "\n";
  text << "  value bound: " << (t1.pass ? "PASS" : "FAIL") << "\n";
  if (t2) {
    text << "  greedy map (temperature " << t2->temperature << "): L_mu = " << t2->l_mu
         << (t2->finite ? " (finite)" : " (NOT finite)") << "\n";
  }
  csv << std::setprecision(17);
  csv << "lc,lp,gamma,resolution,h,bound,lv,lq,tolerance,discretization,pass,temperature,l_mu\n";
  csv << mdp.lc << ',' << mdp.lp << ',' << mdp.gamma << ',' << mdp.resolution << ',' << t1.h << ',' << t1.bound << ','
      << t1.lv << ',' << t1.lq << ',' << t1.tolerance << ',' << t1.discretization << ',' << (t1.pass ? 1 : 0) << ',';
  if (t2)
    csv << t2->temperature << ',' << t2->l_mu << '\n';
  else
    csv << ",\n";
}

}  // namespace spacil::theory
