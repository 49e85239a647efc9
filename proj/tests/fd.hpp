#pragma once

#include <algorithm>
#include <functional>

#include <Eigen/Dense>

namespace fd {

using Vec = Eigen::VectorXd;

/// Central differences of f at x.
inline Vec gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = xp[i];
    xp[i] = x0 + h;
    const double fp = f(xp);
    xp[i] = x0 - h;
    const double fm = f(xp);
    xp[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Central differences of a vector-valued map, one column per coordinate of x.
inline Eigen::MatrixXd jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = xp[i];
    xp[i] = x0 + h;
    const Vec fp = f(xp);
    xp[i] = x0 - h;
    const Vec fm = f(xp);
    xp[i] = x0;
    J.col(i) = (fp - fm) / (2.0 * h);
  }
  return J;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

}  // namespace fd
