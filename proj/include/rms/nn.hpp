#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "rms/common.hpp"

// Scalar building blocks shared by the Q-network and the recommender.
// Everything is templated on the scalar so the same code runs in float or double.

namespace rms::nn {

enum class Activation { Identity, Relu, LeakyRelu, Elu, Tanh, Sigmoid };

Activation parse_activation(std::string_view name);
std::string to_string(Activation a);

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + e^x) without overflow for large |x|.
template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar activate(Activation a, Scalar x, Scalar slope = Scalar(0.2)) {
  switch (a) {
    case Activation::Identity:
      return x;
    case Activation::Relu:
      return x > Scalar(0) ? x : Scalar(0);
    case Activation::LeakyRelu:
      return x > Scalar(0) ? x : slope * x;
    case Activation::Elu:
      return x > Scalar(0) ? x : std::expm1(x);
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Sigmoid:
      return sigmoid(x);
  }
  return x;
}

/// d activate / dx, evaluated at the pre-activation x.
template <typename Scalar>
Scalar activate_grad(Activation a, Scalar x, Scalar slope = Scalar(0.2)) {
  switch (a) {
    case Activation::Identity:
      return Scalar(1);
    case Activation::Relu:
      return x > Scalar(0) ? Scalar(1) : Scalar(0);
    case Activation::LeakyRelu:
      return x > Scalar(0) ? Scalar(1) : slope;
    case Activation::Elu:
      return x > Scalar(0) ? Scalar(1) : std::exp(x);
    case Activation::Tanh: {
      Scalar t = std::tanh(x);
      return Scalar(1) - t * t;
    }
    case Activation::Sigmoid: {
      Scalar s = sigmoid(x);
      return s * (Scalar(1) - s);
    }
  }
  return Scalar(1);
}

template <typename Derived>
auto apply(Activation a, const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar slope = 0.2) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([a, slope](S v) { return activate(a, v, slope); }).eval();
}

template <typename Derived>
auto apply_grad(Activation a, const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar slope = 0.2) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([a, slope](S v) { return activate_grad(a, v, slope); }).eval();
}

/// Max-shifted softmax of a vector.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, Eigen::Dynamic, 1> e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Backward through softmax: given p = softmax(x) and dL/dp, returns dL/dx.
template <typename D1, typename D2>
Eigen::Matrix<typename D1::Scalar, Eigen::Dynamic, 1> softmax_backward(const Eigen::MatrixBase<D1>& p,
                                                                       const Eigen::MatrixBase<D2>& dp) {
  auto inner = p.dot(dp);
  return (p.array() * (dp.array() - inner)).matrix();
}

/// 1/2 d^2 for |d| <= 1, |d| - 1/2 otherwise.
template <typename Scalar>
Scalar huber_loss(Scalar delta) {
  Scalar a = std::abs(delta);
  return a <= Scalar(1) ? Scalar(0.5) * delta * delta : a - Scalar(0.5);
}

template <typename Scalar>
Scalar huber_grad(Scalar delta) {
  if (delta > Scalar(1)) return Scalar(1);
  if (delta < Scalar(-1)) return Scalar(-1);
  return delta;
}

/// Glorot/Xavier uniform: U(-sqrt(6/(fan_in+fan_out)), +sqrt(...)).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Scalar bound = std::sqrt(Scalar(6) / static_cast<Scalar>(rows + cols));
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace rms::nn
