// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "catnet/rng.hpp"
#include "catnet/tape.hpp"
#include "catnet/tensor.hpp"

namespace catnet {

/// Time kernel e(d) = W2 (1 - tanh((W1 d + b1)^2)) + b2 with W1, b1 of width
/// `hidden` and W2 of shape out x hidden. Shared by the local interval token and
/// the global decay gate.
struct TimeKernel {
  Parameter w1;  // 1 x hidden
  Parameter b1;  // 1 x hidden
  Parameter w2;  // out x hidden
  Parameter b2;  // 1 x out

  std::size_t hidden() const { return w1.value.cols(); }
  std::size_t out() const { return b2.value.cols(); }
};

TimeKernel make_time_kernel(const std::string& prefix, std::size_t hidden, std::size_t out, Rng& rng);

struct TimeKernelVars {
  Var w1, b1, w2, b2;
};

TimeKernelVars bind(Tape& tape, TimeKernel& kernel);

/// Embeds each delta (days) into one output row: result is deltas.size() x out.
/// Deltas are divided by time_scale first. Negative or non-finite deltas throw.
Var time_embed(Tape& tape, const TimeKernelVars& kernel, std::span<const double> deltas_days, double time_scale);

/// Value-only convenience for a single delta.
std::vector<double> time_embed(TimeKernel& kernel, double delta_days, double time_scale = 1.0);

/// The global decay-time embedding; identical kernel, separate parameters.
inline std::vector<double> global_time_embed(TimeKernel& kernel, double delta_global_days, double time_scale = 1.0) {
  return time_embed(kernel, delta_global_days, time_scale);
}

}  // namespace catnet
