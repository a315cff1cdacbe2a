#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rms/archive.hpp"
#include "rms/common.hpp"

namespace rms {

/// Flat view of one parameter tensor (any Eigen dense object).
struct ParamRef {
  double* data = nullptr;
  Eigen::Index size = 0;

  template <typename M>
  static ParamRef of(M& m) {
    return {m.data(), m.size()};
  }
  auto map() const { return Eigen::Map<Eigen::VectorXd>(data, size); }
};

class Optimizer {
 public:
  explicit Optimizer(double lr) : lr_(lr) {}
  virtual ~Optimizer() = default;

  /// params[i] -= update(grads[i]); both lists must line up tensor by tensor.
  virtual void step(std::span<const ParamRef> params, std::span<const ParamRef> grads) = 0;
  virtual void save(TensorArchive&, const std::string&) const {}
  virtual void load(const TensorArchive&, const std::string&) {}

  double lr() const { return lr_; }

 protected:
  double lr_;
};

class Sgd final : public Optimizer {
 public:
  using Optimizer::Optimizer;
  void step(std::span<const ParamRef> params, std::span<const ParamRef> grads) override;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : Optimizer(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<const ParamRef> params, std::span<const ParamRef> grads) override;
  void save(TensorArchive& ar, const std::string& prefix) const override;
  void load(const TensorArchive& ar, const std::string& prefix) override;

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

/// "adam" or "sgd".
std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr);

}  // namespace rms
