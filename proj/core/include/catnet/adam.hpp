// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "catnet/tensor.hpp"

namespace catnet {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
};

/// One bias-corrected Adam update of `value` given `grad` at step t >= 1.
void adam_step(Tensor& value, const Tensor& grad, AdamState& state, std::size_t t, const AdamConfig& config);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Applies one update from the parameters' current grads.
  void step();
  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamState> state_;
  AdamConfig config_;
  std::size_t t_ = 0;
};

}  // namespace catnet
