#pragma once

// Feed-forward tanh MLP over a flat parameter vector, with exact reverse-mode
// gradients (parameters and inputs), forward-mode tangents, and Adam.
//
// Parameter layout: for each linear layer l (in order), the weight matrix
// W_l (out x in, column-major) followed by the bias b_l (out).

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spacil/binary_io.hpp"
#include "spacil/random.hpp"

namespace spacil {

template <typename Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VecT<double>;
using Mat = MatT<double>;

struct MlpSpec {
  std::vector<int> layer_sizes;
  double output_scale = 0.1;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int num_linear() const { return static_cast<int>(layer_sizes.size()) - 1; }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for (int l = 0; l < num_linear(); ++l) n += Eigen::Index(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
    return n;
  }

  void validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("MlpSpec: need at least 2 layers");
    for (int s : layer_sizes)
      if (s < 1) throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
  }

  /// in -> hidden... -> out
  static MlpSpec make(int in, const std::vector<int>& hidden, int out, double output_scale = 0.1) {
    MlpSpec s;
    s.layer_sizes.push_back(in);
    s.layer_sizes.insert(s.layer_sizes.end(), hidden.begin(), hidden.end());
    s.layer_sizes.push_back(out);
    s.output_scale = output_scale;
    s.validate();
    return s;
  }

  bool operator==(const MlpSpec&) const = default;
};

template <typename Scalar>
struct FlatParamsT {
  VecT<Scalar> values;
  MlpSpec spec;

  Eigen::Index offset(int layer) const {
    Eigen::Index off = 0;
    for (int l = 0; l < layer; ++l) off += Eigen::Index(spec.layer_sizes[l + 1]) * (spec.layer_sizes[l] + 1);
    return off;
  }

  Eigen::Map<const MatT<Scalar>> weight(int l) const {
    return {values.data() + offset(l), spec.layer_sizes[l + 1], spec.layer_sizes[l]};
  }
  Eigen::Map<const VecT<Scalar>> bias(int l) const {
    const Eigen::Index rows = spec.layer_sizes[l + 1];
    return {values.data() + offset(l) + rows * spec.layer_sizes[l], rows};
  }
  Eigen::Map<MatT<Scalar>> weight(int l) {
    return {values.data() + offset(l), spec.layer_sizes[l + 1], spec.layer_sizes[l]};
  }
  Eigen::Map<VecT<Scalar>> bias(int l) {
    const Eigen::Index rows = spec.layer_sizes[l + 1];
    return {values.data() + offset(l) + rows * spec.layer_sizes[l], rows};
  }

  bool all_finite() const { return values.allFinite(); }
};

using FlatParams = FlatParamsT<double>;

/// U(-k, k) with k = 1/sqrt(fan_in); the final layer has zero bias and its
/// weights scaled by spec.output_scale.
template <typename Scalar = double>
FlatParamsT<Scalar> init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  FlatParamsT<Scalar> p{VecT<Scalar>::Zero(spec.param_count()), spec};
  Rng rng(seed);
  for (int l = 0; l < spec.num_linear(); ++l) {
    const Scalar k = Scalar(1) / std::sqrt(Scalar(spec.layer_sizes[l]));
    std::uniform_real_distribution<Scalar> u(-k, k);
    auto W = p.weight(l);
    auto b = p.bias(l);
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = u(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
    if (l == spec.num_linear() - 1) {
      W *= Scalar(spec.output_scale);
      b.setZero();
    }
  }
  return p;
}

namespace detail {

template <typename Scalar>
void check_input(const FlatParamsT<Scalar>& p, Eigen::Index rows) {
  if (rows != p.spec.input_size())
    throw std::invalid_argument("mlp: input size " + std::to_string(rows) + " != " + std::to_string(p.spec.input_size()));
  if (p.values.size() != p.spec.param_count()) throw std::invalid_argument("mlp: parameter count does not match spec");
}

}  // namespace detail

/// Layer activations; [0] is the input, back() the (linear) output.
template <typename Scalar>
using TapeT = std::vector<MatT<Scalar>>;
using Tape = TapeT<double>;

template <typename Scalar>
TapeT<Scalar> forward_tape(const FlatParamsT<Scalar>& p, const MatT<Scalar>& X) {
  detail::check_input(p, X.rows());
  const int L = p.spec.num_linear();
  TapeT<Scalar> acts(L + 1);
  acts[0] = X;
  for (int l = 0; l < L; ++l) {
    MatT<Scalar> z = p.weight(l) * acts[l];
    z.colwise() += p.bias(l);
    if (l + 1 < L) z = z.array().tanh().matrix();
    acts[l + 1] = std::move(z);
  }
  return acts;
}

/// Batched forward pass: one sample per column.
template <typename Scalar>
MatT<Scalar> forward_batch(const FlatParamsT<Scalar>& p, const MatT<Scalar>& X) {
  return std::move(forward_tape(p, X).back());
}

template <typename Scalar>
VecT<Scalar> forward(const FlatParamsT<Scalar>& p, const VecT<Scalar>& x) {
  return forward_batch(p, MatT<Scalar>(x)).col(0);
}

template <typename Scalar>
struct BatchGradients {
  VecT<Scalar> params;  // summed over columns
  MatT<Scalar> input;   // one column per sample
};

template <typename Scalar>
struct Gradients {
  VecT<Scalar> params;
  VecT<Scalar> input;
};

/// Gradient of sum_j upstream.col(j) . f(X.col(j)) with respect to the
/// parameters (summed) and each input column.
/// Same, reusing a tape recorded by forward_tape(p, X).
template <typename Scalar>
BatchGradients<Scalar> backward_tape(const FlatParamsT<Scalar>& p, const TapeT<Scalar>& acts, const MatT<Scalar>& upstream) {
  const MatT<Scalar>& X = acts.front();
  const int L = p.spec.num_linear();
  if (upstream.rows() != p.spec.output_size() || upstream.cols() != X.cols())
    throw std::invalid_argument("mlp backward: upstream shape mismatch");
  FlatParamsT<Scalar> g{VecT<Scalar>::Zero(p.values.size()), p.spec};
  MatT<Scalar> delta = upstream;
  for (int l = L - 1; l >= 0; --l) {
    g.weight(l).noalias() = delta * acts[l].transpose();
    g.bias(l) = delta.rowwise().sum();
    MatT<Scalar> back = p.weight(l).transpose() * delta;
    if (l > 0) back.array() *= (Scalar(1) - acts[l].array().square());
    delta = std::move(back);
  }
  return {std::move(g.values), std::move(delta)};
}

template <typename Scalar>
BatchGradients<Scalar> backward_batch(const FlatParamsT<Scalar>& p, const MatT<Scalar>& X, const MatT<Scalar>& upstream) {
  return backward_tape(p, forward_tape(p, X), upstream);
}

template <typename Scalar>
Gradients<Scalar> backward(const FlatParamsT<Scalar>& p, const VecT<Scalar>& x, const VecT<Scalar>& upstream) {
  if (upstream.size() != p.spec.output_size()) throw std::invalid_argument("mlp backward: upstream size mismatch");
  auto g = backward_batch(p, MatT<Scalar>(x), MatT<Scalar>(upstream));
  return {std::move(g.params), g.input.col(0)};
}

/// Forward-mode directional derivative of the outputs along a parameter
/// tangent (inputs held fixed). One output column per input column.
template <typename Scalar>
MatT<Scalar> jvp_tape(const FlatParamsT<Scalar>& p, const TapeT<Scalar>& acts, const VecT<Scalar>& tangent) {
  if (tangent.size() != p.values.size()) throw std::invalid_argument("mlp jvp: tangent size mismatch");
  const MatT<Scalar>& X = acts.front();
  const FlatParamsT<Scalar> t{tangent, p.spec};
  const int L = p.spec.num_linear();
  MatT<Scalar> dact = MatT<Scalar>::Zero(X.rows(), X.cols());
  for (int l = 0; l < L; ++l) {
    MatT<Scalar> dz = t.weight(l) * acts[l] + p.weight(l) * dact;
    dz.colwise() += t.bias(l);
    if (l + 1 < L) dz.array() *= (Scalar(1) - acts[l + 1].array().square());
    dact = std::move(dz);
  }
  return dact;
}

template <typename Scalar>
MatT<Scalar> jvp_batch(const FlatParamsT<Scalar>& p, const MatT<Scalar>& X, const VecT<Scalar>& tangent) {
  return jvp_tape(p, forward_tape(p, X), tangent);
}

/// Input Jacobian (out x in), one reverse pass per output coordinate.
template <typename Scalar>
MatT<Scalar> jacobian(const FlatParamsT<Scalar>& p, const VecT<Scalar>& x) {
  const int out = p.spec.output_size();
  MatT<Scalar> J(out, x.size());
  for (int i = 0; i < out; ++i) {
    VecT<Scalar> e = VecT<Scalar>::Zero(out);
    e[i] = Scalar(1);
    J.row(i) = backward(p, x, e).input.transpose();
  }
  return J;
}

template <typename Scalar = double>
struct AdamStateT {
  VecT<Scalar> m;
  VecT<Scalar> v;
  std::int64_t step = 0;
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  static AdamStateT fresh(Eigen::Index n, Scalar lr) {
    AdamStateT s;
    s.m = VecT<Scalar>::Zero(n);
    s.v = VecT<Scalar>::Zero(n);
    s.lr = lr;
    return s;
  }
};

using AdamState = AdamStateT<double>;

/// One Adam descent step on params (in place).
template <typename Scalar>
void adam_step(AdamStateT<Scalar>& st, VecT<Scalar>& params, const VecT<Scalar>& grads) {
  if (st.m.size() != params.size() || st.v.size() != params.size() || grads.size() != params.size())
    throw std::invalid_argument("adam: length mismatch");
  if (!grads.allFinite()) throw std::domain_error("adam: non-finite gradient");
  st.step += 1;
  st.m = st.beta1 * st.m + (Scalar(1) - st.beta1) * grads;
  st.v = st.beta2 * st.v + (Scalar(1) - st.beta2) * grads.cwiseAbs2();
  const Scalar bc1 = Scalar(1) - std::pow(st.beta1, Scalar(st.step));
  const Scalar bc2 = Scalar(1) - std::pow(st.beta2, Scalar(st.step));
  params.array() -= st.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + st.eps);
}

// SPCLNET1 block: magic, u32 layer count, u32 sizes, f64 parameters.

inline constexpr std::string_view kNetMagic = "SPCLNET1";

inline void write_net_block(std::ostream& os, const FlatParams& p) {
  bin::write_magic(os, kNetMagic);
  bin::write_u32(os, static_cast<std::uint32_t>(p.spec.layer_sizes.size()));
  for (int s : p.spec.layer_sizes) bin::write_u32(os, static_cast<std::uint32_t>(s));
  bin::write_f64s(os, p.values);
}

inline FlatParams read_net_block(std::istream& is, double output_scale = 0.1) {
  bin::expect_magic(is, kNetMagic);
  const auto n = bin::read_u32(is, "layer count");
  if (n < 2 || n > 64) throw FormatError("implausible layer count");
  FlatParams p;
  p.spec.output_scale = output_scale;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto s = bin::read_u32(is, "layer size");
    if (s == 0 || s > (1U << 20)) throw FormatError("implausible layer size");
    p.spec.layer_sizes.push_back(static_cast<int>(s));
  }
  p.values = bin::read_f64s(is, p.spec.param_count(), "parameters");
  if (!p.all_finite()) throw FormatError("non-finite parameters in checkpoint");
  return p;
}

}  // namespace spacil
