#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spacil/net.hpp"

namespace spacil::theory {

/// Deterministic 1-D MDP on a uniform state grid over [0,1] with actions on a
/// uniform grid over [-1,1] and transition s' = clip(s + move * a, 0, 1).
/// Cost-to-go convention: the Bellman operator minimizes cost.
struct LipschitzMdp {
  int resolution = 201;
  int action_nodes = 21;
  double lc = 1.0;     // declared cost Lipschitz constant
  double lp = 1.0;     // declared transition Lipschitz constant
  double gamma = 0.9;
  double move = 0.1;
  std::function<double(double s, double a)> cost;

  /// c(s, a) = lc * |s - 0.5|, action grid from matched_action_nodes.
  static LipschitzMdp tent(double lc, double gamma, int resolution = 201);

  double h() const { return 1.0 / static_cast<double>(resolution - 1); }
  Vec states() const { return Vec::LinSpaced(resolution, 0.0, 1.0); }
  Vec actions() const { return Vec::LinSpaced(action_nodes, -1.0, 1.0); }
  double successor(double s, double a) const;
  void validate() const;
};

/// Action-grid size whose spacing moves the state by exactly one grid
/// node, so every node can reach every other node.
int matched_action_nodes(int resolution, double move);

/// Piecewise-linear interpolation of grid values over [0,1].
double interpolate(const Vec& values, double s);

struct ValueIterationResult {
  Vec values;
  int iterations = 0;
  std::vector<double> sup_diffs;  // ||V_{k+1} - V_k||_inf per sweep
};

ValueIterationResult value_iteration(const LipschitzMdp& mdp, double tol = 1e-10, int max_iterations = 100000);

/// Q(s_i, a_k) = c(s_i, a_k) + gamma * V(s'), rows = states, cols = actions.
Mat q_values(const LipschitzMdp& mdp, const Vec& values);

/// max |V(s1) - V(s2)| / |s1 - s2| over a sorted 1-D grid (adjacent pairs suffice).
double lipschitz_estimate(const Vec& values, const Vec& grid);
/// max |Q(p) - Q(q)| / (|ds| + |da|) over all pairs of a 2-D grid.
/// Evaluated on axis-adjacent pairs, which attain it under this norm.
double lipschitz_estimate_2d(const Mat& values, const Vec& row_grid, const Vec& col_grid);

struct TheoremReport {
  double lv = 0.0;
  double lq = 0.0;
  double bound = 0.0;
  double tolerance = 0.05;
  double discretization = 0.0;  // 2 * lc * h
  double h = 0.0;
  int resolution = 0;
  bool pass = false;
};

TheoremReport verify_theorem1(const LipschitzMdp& mdp, double tol = 0.05);

struct GreedyMapReport {
  double l_mu = 0.0;
  double lq = 0.0;
  double temperature = 0.0;
  int resolution = 0;
  bool finite = false;
  Vec mean_policy;
};

/// Boltzmann-weighted mean action mu(s) = sum_a w_a(s) a, w ~ exp(-Q/temperature).
GreedyMapReport verify_theorem2(const LipschitzMdp& mdp, double temperature);

void write_report(std::ostream& text, std::ostream& csv, const LipschitzMdp& mdp, const TheoremReport& t1,
                  const GreedyMapReport* t2);

}  // namespace spacil::theory
