#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace spacil {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stable seed for a (master, key...) tuple. Independent of thread scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(master);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<Scalar> dist(Scalar(0), Scalar(1));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = dist(rng);
  return z;
}

/// Uniform sample from the closed ball of the given radius in R^n.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> uniform_in_ball(Eigen::Index n, Scalar radius, Rng& rng) {
  auto dir = standard_normal<Scalar>(n, rng);
  Scalar norm = dir.norm();
  while (norm == Scalar(0)) {
    dir = standard_normal<Scalar>(n, rng);
    norm = dir.norm();
  }
  std::uniform_real_distribution<Scalar> u(Scalar(0), Scalar(1));
  const Scalar r = radius * std::pow(u(rng), Scalar(1) / Scalar(n));
  return dir * (r / norm);
}

}  // namespace spacil
