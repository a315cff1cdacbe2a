#pragma once

#include "rms/common.hpp"

namespace rms {

struct EnvStep {
  Eigen::VectorXd state;
  double reward = 0.0;
  bool done = false;
};

/// Episodic environment with a fixed-width real state and actions 0..A-1,
/// where action 0 is STOP.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int state_dim() const = 0;
  virtual int num_actions() const = 0;
  virtual int max_steps() const = 0;
  virtual Eigen::VectorXd reset() = 0;
  virtual EnvStep step(int action) = 0;
};

}  // namespace rms
