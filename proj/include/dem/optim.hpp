#pragma once

#include "dem/types.hpp"

#include <vector>

namespace dem {

struct AdamConfig {
  Real learning_rate = 1e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
};

struct RmsPropConfig {
  Real learning_rate = 1e-4;
  Real decay = 0.9;
  Real epsilon = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  /// Bias-corrected Adam update applied to params in place.
  void step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads);

  long step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

class RmsPropState {
 public:
  explicit RmsPropState(RmsPropConfig config = {}) : config_(config) {}

  void step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads);

  long step_count() const { return t_; }
  const RmsPropConfig& config() const { return config_; }

 private:
  RmsPropConfig config_;
  std::vector<Matrix> ms_;
  long t_ = 0;
};

/// Scales all gradients by max_norm/g when the global L2 norm g over every
/// gradient entry exceeds max_norm.
void clip_gradients(std::vector<Matrix*> grads, Real max_norm);

}  // namespace dem
