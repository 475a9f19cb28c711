// SPDX-License-Identifier: Apache-2.0
#include "catnet/temporal_embedding.hpp"

#include <cmath>

#include "catnet/error.hpp"

namespace catnet {

TimeKernel make_time_kernel(const std::string& prefix, std::size_t hidden, std::size_t out, Rng& rng) {
  TimeKernel k;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  Tensor w1({1, hidden}), b1({1, hidden}), w2({out, hidden}), b2({1, out});
  for (auto& v : w1.storage()) v = rng.uniform(-1.0, 1.0);
  for (auto& v : b1.storage()) v = rng.uniform(-1.0, 1.0);
  for (auto& v : w2.storage()) v = rng.uniform(-bound, bound);
  for (auto& v : b2.storage()) v = rng.uniform(-bound, bound);
  k.w1 = Parameter(prefix + ".w1", std::move(w1));
  k.b1 = Parameter(prefix + ".b1", std::move(b1));
  k.w2 = Parameter(prefix + ".w2", std::move(w2));
  k.b2 = Parameter(prefix + ".b2", std::move(b2));
  return k;
}

TimeKernelVars bind(Tape& tape, TimeKernel& kernel) {
  return {tape.param(kernel.w1), tape.param(kernel.b1), tape.param(kernel.w2), tape.param(kernel.b2)};
}

Var time_embed(Tape& tape, const TimeKernelVars& kernel, std::span<const double> deltas_days, double time_scale) {
  if (deltas_days.empty()) throw ShapeError("time_embed: no deltas");
  if (!(time_scale > 0.0)) throw ConfigError("time_scale must be positive");
  std::vector<double> scaled(deltas_days.size());
  for (std::size_t i = 0; i < deltas_days.size(); ++i) {
    const double d = deltas_days[i];
    if (!std::isfinite(d) || d < 0.0) throw DataError("time_embed: interval must be finite and non-negative");
    scaled[i] = d / time_scale;
  }
  auto d = tape.constant(Tensor::column(std::move(scaled)));
  auto pre = tape.add(tape.matmul(d, kernel.w1), kernel.b1);
  auto bump = tape.affine(tape.tanh(tape.square(pre)), -1.0, 1.0);
  return tape.add(tape.matmul_transposed(bump, kernel.w2), kernel.b2);
}

std::vector<double> time_embed(TimeKernel& kernel, double delta_days, double time_scale) {
  Tape tape;
  const auto vars = bind(tape, kernel);
  const double d[] = {delta_days};
  const auto out = time_embed(tape, vars, d, time_scale);
  return tape.value(out).storage();
}

}  // namespace catnet
