#include "rms/optim.hpp"

#include "rms/nn.hpp"

namespace rms {

void Sgd::step(std::span<const ParamRef> params, std::span<const ParamRef> grads) {
  if (params.size() != grads.size()) throw Error("optimizer: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i].map() -= lr_ * grads[i].map();
}

void Adam::step(std::span<const ParamRef> params, std::span<const ParamRef> grads) {
  if (params.size() != grads.size()) throw Error("optimizer: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Eigen::VectorXd::Zero(p.size));
      v_.push_back(Eigen::VectorXd::Zero(p.size));
    }
  }
  if (m_.size() != params.size()) throw Error("optimizer: parameter layout changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].map();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[i].map().array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void Adam::save(TensorArchive& ar, const std::string& prefix) const {
  ar.put_int(prefix + ".t", t_);
  ar.put_int(prefix + ".count", static_cast<std::int64_t>(m_.size()));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    ar.put(prefix + ".m." + std::to_string(i), m_[i]);
    ar.put(prefix + ".v." + std::to_string(i), v_[i]);
  }
}

void Adam::load(const TensorArchive& ar, const std::string& prefix) {
  t_ = ar.integer(prefix + ".t");
  auto count = ar.integer(prefix + ".count");
  m_.clear();
  v_.clear();
  for (std::int64_t i = 0; i < count; ++i) {
    m_.push_back(ar.vector(prefix + ".m." + std::to_string(i)));
    v_.push_back(ar.vector(prefix + ".v." + std::to_string(i)));
  }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr) {
  if (name == "adam") return std::make_unique<Adam>(lr);
  if (name == "sgd") return std::make_unique<Sgd>(lr);
  throw Error("unknown optimizer '" + name + "'");
}

namespace nn {

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "elu") return Activation::Elu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw Error("unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::Relu:
      return "relu";
    case Activation::LeakyRelu:
      return "leaky_relu";
    case Activation::Elu:
      return "elu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "?";
}

}  // namespace nn

}  // namespace rms
